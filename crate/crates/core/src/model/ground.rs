use super::{Atom, LiftedAtom, LiftedTask, ObjectConst, PredicateSchema, State, Term, TypeTree};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;

/// Index of a ground atom in the task universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of a ground action in [`GroundTask::actions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<String>,
    pub pre: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
}

impl GroundAction {
    /// `(load p0 t1 postoffice)`
    pub fn name(&self) -> String {
        if self.args.is_empty() {
            format!("({})", self.schema)
        } else {
            format!("({} {})", self.schema, self.args.join(" "))
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A fully grounded task. The atom universe holds every type-consistent
/// instantiation of every predicate, so goals may mention atoms that are
/// unreachable.
#[derive(Debug, Clone)]
pub struct GroundTask {
    pub domain_name: String,
    pub problem_name: String,
    pub predicates: Vec<PredicateSchema>,
    pub types: TypeTree,
    pub objects: Vec<ObjectConst>,
    atoms: Vec<Atom>,
    atom_index: HashMap<Atom, AtomId>,
    /// Sorted by action name.
    pub actions: Vec<GroundAction>,
    action_index: HashMap<String, ActionId>,
    pub init: State,
    pub advisory_goals: Vec<AtomId>,
}

impl GroundTask {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id.index()]
    }

    pub fn atom_id(&self, atom: &Atom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    pub fn action(&self, id: ActionId) -> &GroundAction {
        &self.actions[id.0 as usize]
    }

    /// Looks up an action by its rendered name, e.g. `(drive t1 a b)`.
    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        let normalized = name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        self.action_index.get(&normalized).copied()
    }

    pub fn empty_state(&self) -> State {
        State::empty(self.atoms.len())
    }

    pub fn state_from_atoms<'a>(&self, atoms: impl IntoIterator<Item = &'a Atom>) -> Option<State> {
        let mut s = self.empty_state();
        for a in atoms {
            s.insert(self.atom_id(a)?);
        }
        Some(s)
    }

    pub fn state_atoms<'a>(&'a self, s: &'a State) -> impl Iterator<Item = &'a Atom> + 'a {
        s.iter().map(move |id| self.atom(id))
    }

    /// Every action whose precondition holds in `state`, in name order.
    pub fn applicable(&self, state: &State) -> Vec<ActionId> {
        (0..self.actions.len() as u32)
            .map(ActionId)
            .filter(|&a| self.actions[a.0 as usize].pre.iter().all(|&p| state.contains(p)))
            .collect()
    }
}

/// Grounds every schema over every type-consistent substitution.
///
/// Actions whose preconditions mention a static atom (a predicate no action
/// adds or deletes) that is false initially are dropped: they are never
/// applicable in a reachable state.
pub fn ground(task: &LiftedTask) -> GroundTask {
    let dom = &task.domain;
    let objects_of = |ty: &str| -> Vec<&str> {
        task.objects
            .iter()
            .filter(|o| dom.types.is_subtype(&o.ty, ty))
            .map(|o| o.name.as_str())
            .collect()
    };

    let mut atoms = Vec::new();
    for p in &dom.predicates {
        let domains: Vec<Vec<&str>> = p.params.iter().map(|tp| objects_of(&tp.ty)).collect();
        for combo in cartesian(&domains) {
            atoms.push(Atom {
                predicate: p.name.clone(),
                args: combo.into_iter().map(str::to_string).collect(),
            });
        }
    }
    let atom_index: HashMap<Atom, AtomId> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), AtomId(i as u32)))
        .collect();

    let fluent: HashSet<&str> = dom
        .schemas
        .iter()
        .flat_map(|s| s.add.iter().chain(&s.del))
        .map(|a| a.predicate.as_str())
        .collect();
    let init: HashSet<&Atom> = task.init.iter().collect();

    let mut actions = Vec::new();
    for schema in &dom.schemas {
        let domains: Vec<Vec<&str>> = schema.params.iter().map(|tp| objects_of(&tp.ty)).collect();
        let var_pos: HashMap<&str, usize> = schema
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.as_str(), i))
            .collect();
        // Static preconditions become checkable once their last variable is bound.
        let mut static_at: Vec<Vec<&LiftedAtom>> = vec![Vec::new(); schema.params.len() + 1];
        for a in &schema.pre {
            if fluent.contains(a.predicate.as_str()) {
                continue;
            }
            let last = a
                .args
                .iter()
                .filter_map(|t| match t {
                    Term::Var(v) => var_pos.get(v.as_str()).map(|&i| i + 1),
                    Term::Const(_) => None,
                })
                .max()
                .unwrap_or(0);
            static_at[last].push(a);
        }
        let instantiate = |a: &LiftedAtom, binding: &[&str]| -> Atom {
            Atom {
                predicate: a.predicate.clone(),
                args: a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => binding[var_pos[v.as_str()]].to_string(),
                        Term::Const(c) => c.clone(),
                    })
                    .collect(),
            }
        };
        let static_ok =
            |level: usize, binding: &[&str]| static_at[level].iter().all(|a| init.contains(&instantiate(a, binding)));
        if !static_ok(0, &[]) {
            continue;
        }

        let mut binding: Vec<&str> = Vec::with_capacity(domains.len());
        let mut stack: Vec<usize> = vec![0];
        // Iterative backtracking over parameter choices.
        while let Some(&choice) = stack.last() {
            let depth = stack.len() - 1;
            if depth == domains.len() {
                let to_ids = |list: &[LiftedAtom]| -> Option<Vec<AtomId>> {
                    let mut v: Vec<AtomId> = list
                        .iter()
                        .map(|a| atom_index.get(&instantiate(a, &binding)).copied())
                        .collect::<Option<_>>()?;
                    v.sort();
                    v.dedup();
                    Some(v)
                };
                // Bindings that break predicate typing have no atoms to refer to.
                if let (Some(pre), Some(add), Some(del)) =
                    (to_ids(&schema.pre), to_ids(&schema.add), to_ids(&schema.del))
                {
                    actions.push(GroundAction {
                        schema: schema.name.clone(),
                        args: binding.iter().map(|s| s.to_string()).collect(),
                        pre,
                        add,
                        del,
                    });
                }
                stack.pop();
                binding.pop();
                if let Some(c) = stack.last_mut() {
                    *c += 1;
                }
                continue;
            }
            if choice >= domains[depth].len() {
                stack.pop();
                binding.pop();
                if let Some(c) = stack.last_mut() {
                    *c += 1;
                }
                continue;
            }
            binding.push(domains[depth][choice]);
            if static_ok(depth + 1, &binding) {
                stack.push(0);
            } else {
                binding.pop();
                *stack.last_mut().unwrap() += 1;
            }
        }
    }
    actions.sort_by_cached_key(GroundAction::name);
    actions.dedup_by(|a, b| a.name() == b.name());
    let action_index = actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name(), ActionId(i as u32)))
        .collect();

    let mut init_state = State::empty(atoms.len());
    for a in &task.init {
        if let Some(&id) = atom_index.get(a) {
            init_state.insert(id);
        }
    }
    let advisory_goals = task
        .advisory_goals
        .iter()
        .filter_map(|a| atom_index.get(a).copied())
        .collect();

    GroundTask {
        domain_name: dom.name.clone(),
        problem_name: task.problem_name.clone(),
        predicates: dom.predicates.clone(),
        objects: task.objects.clone(),
        atoms,
        atom_index,
        actions,
        action_index,
        init: init_state,
        advisory_goals,
        types: dom.types.clone(),
    }
}

fn cartesian<'a>(domains: &[Vec<&'a str>]) -> Vec<Vec<&'a str>> {
    let mut out: Vec<Vec<&str>> = vec![Vec::new()];
    for d in domains {
        let mut next = Vec::with_capacity(out.len() * d.len());
        for prefix in &out {
            for &o in d {
                let mut p = prefix.clone();
                p.push(o);
                next.push(p);
            }
        }
        out = next;
    }
    out
}
