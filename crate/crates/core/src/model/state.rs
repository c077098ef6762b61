use super::{ActionId, AtomId, GroundAction, GroundTask};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A closed-world state as a bitset over the atom universe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    words: Vec<u64>,
}

impl State {
    pub fn empty(num_atoms: usize) -> Self {
        State {
            words: vec![0; num_atoms.div_ceil(64)],
        }
    }

    pub fn from_ids(num_atoms: usize, ids: impl IntoIterator<Item = AtomId>) -> Self {
        let mut s = Self::empty(num_atoms);
        for id in ids {
            s.insert(id);
        }
        s
    }

    #[inline]
    pub fn contains(&self, id: AtomId) -> bool {
        let i = id.index();
        self.words.get(i / 64).is_some_and(|w| w & (1u64 << (i % 64)) != 0)
    }

    #[inline]
    pub fn insert(&mut self, id: AtomId) {
        let i = id.index();
        if i / 64 >= self.words.len() {
            self.words.resize(i / 64 + 1, 0);
        }
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, id: AtomId) {
        let i = id.index();
        if let Some(w) = self.words.get_mut(i / 64) {
            *w &= !(1u64 << (i % 64));
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                Some(AtomId((wi * 64) as u32 + b))
            })
        })
    }

    pub fn is_superset_of(&self, ids: &[AtomId]) -> bool {
        ids.iter().all(|&id| self.contains(id))
    }

    /// True iff every atom of `other` is in `self`.
    #[inline]
    pub fn contains_all(&self, other: &State) -> bool {
        other
            .words
            .iter()
            .enumerate()
            .all(|(i, &w)| w & !self.words.get(i).copied().unwrap_or(0) == 0)
    }

    /// Keeps only the atoms set in `mask`.
    pub fn retain_mask(&mut self, mask: &State) {
        for (w, m) in self
            .words
            .iter_mut()
            .zip(mask.words.iter().chain(std::iter::repeat(&0)))
        {
            *w &= m;
        }
    }

    /// `(s \ del) ∪ add`. Does not check the precondition.
    pub fn successor(&self, action: &GroundAction) -> State {
        let mut next = self.clone();
        for &d in &action.del {
            next.remove(d);
        }
        for &a in &action.add {
            next.insert(a);
        }
        next
    }

    /// Applies `action`, failing if its precondition does not hold.
    pub fn apply(&self, action: &GroundAction) -> Result<State, RunError> {
        if !self.is_superset_of(&action.pre) {
            return Err(RunError::Inapplicable {
                step: 0,
                action: action.name(),
            });
        }
        Ok(self.successor(action))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("step {step}: action {action} is not applicable")]
    Inapplicable { step: usize, action: String },
    #[error("unknown action {0}")]
    UnknownAction(String),
}

/// An action sequence over a [`GroundTask`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Plan {
    pub actions: Vec<ActionId>,
}

#[derive(Serialize, Deserialize)]
struct PlanStepJson {
    step: usize,
    action: String,
}

impl Plan {
    pub fn new(actions: Vec<ActionId>) -> Self {
        Plan { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn names(&self, task: &GroundTask) -> Vec<String> {
        self.actions.iter().map(|&a| task.action(a).name()).collect()
    }

    /// One action per line, `(name arg ...)`.
    pub fn to_text(&self, task: &GroundTask) -> String {
        let mut s = String::new();
        for n in self.names(task) {
            s.push_str(&n);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, task: &GroundTask) -> Result<Plan, RunError> {
        Self::from_names(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with(';')),
            task,
        )
    }

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>, task: &GroundTask) -> Result<Plan, RunError> {
        names
            .into_iter()
            .map(|n| {
                task.action_by_name(n)
                    .ok_or_else(|| RunError::UnknownAction(n.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Plan::new)
    }

    /// `[{"step": 0, "action": "(load p0 t1 l)"}, ...]`
    pub fn to_json(&self, task: &GroundTask) -> serde_json::Value {
        let steps: Vec<PlanStepJson> = self
            .names(task)
            .into_iter()
            .enumerate()
            .map(|(step, action)| PlanStepJson { step, action })
            .collect();
        serde_json::to_value(steps).expect("plan steps serialize")
    }

    /// Executes the plan from the task's initial state.
    pub fn run(&self, task: &GroundTask) -> Result<Trace, RunError> {
        self.run_from(task, task.init.clone())
    }

    pub fn run_from(&self, task: &GroundTask, init: State) -> Result<Trace, RunError> {
        let mut states = Vec::with_capacity(self.actions.len() + 1);
        states.push(init);
        for (step, &a) in self.actions.iter().enumerate() {
            let action = task.action(a);
            let next = states
                .last()
                .expect("trace is never empty")
                .apply(action)
                .map_err(|_| RunError::Inapplicable {
                    step,
                    action: action.name(),
                })?;
            states.push(next);
        }
        Ok(Trace { states })
    }
}

/// The state sequence induced by a plan; `states[0]` is the initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<State>,
}

impl Trace {
    pub fn last(&self) -> &State {
        self.states.last().expect("trace is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// True iff every goal atom holds in the final state.
    pub fn holds_goal_atoms(&self, goals: &[AtomId]) -> bool {
        self.last().is_superset_of(goals)
    }
}
