//! Blind breadth-first search over (state, LTLf obligations) and a memoized
//! solvability oracle over goal sets.

use crate::goalset::GoalSet;
use crate::ltlf::{Ltl, Valuation};
use crate::model::{ActionId, AtomId, GroundTask, Plan};
use indexmap::{IndexMap, IndexSet};
use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const DEFAULT_MAX_EXPANDED: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_expanded: u64,
    pub timeout: Option<Duration>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_expanded: DEFAULT_MAX_EXPANDED,
            timeout: None,
        }
    }
}

/// The search stopped before deciding solvability. Callers must treat this as
/// "unknown".
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("search budget exhausted after {expanded} expansions ({elapsed_ms} ms)")]
pub struct ResourceExhausted {
    pub expanded: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Plan(Plan),
    Unsolvable,
}

impl SolveOutcome {
    pub fn is_solvable(&self) -> bool {
        matches!(self, SolveOutcome::Plan(_))
    }

    pub fn plan(&self) -> Option<&Plan> {
        match self {
            SolveOutcome::Plan(p) => Some(p),
            SolveOutcome::Unsolvable => None,
        }
    }
}

struct ProjectedAction {
    id: ActionId,
    pre: Vec<u32>,
    add: Vec<u32>,
    del: Vec<u32>,
    add_mono: Vec<u32>,
}

fn bit(words: &[u64], i: u32) -> bool {
    words[(i / 64) as usize] & (1u64 << (i % 64)) != 0
}

fn set_bit(words: &mut [u64], i: u32) {
    words[(i / 64) as usize] |= 1u64 << (i % 64);
}

fn clear_bit(words: &mut [u64], i: u32) {
    words[(i / 64) as usize] &= !(1u64 << (i % 64));
}

fn is_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

struct Front {
    members: Vec<u32>,
    reach: Option<Box<[u64]>>,
}

const UNKEPT: u32 = u32::MAX;
const MONO: u32 = 1 << 31;

/// A search state in local numbering: `core` holds the atoms that matter for
/// applicability or temporal goals, `mono` the goal-only atoms that are never
/// deleted.
struct View<'a> {
    local: &'a [u32],
    core: &'a [u64],
    mono: &'a [u64],
}

impl Valuation for View<'_> {
    fn holds(&self, atom: AtomId) -> bool {
        match self.local[atom.index()] {
            UNKEPT => false,
            l if l & MONO != 0 => bit(self.mono, l & !MONO),
            l => bit(self.core, l),
        }
    }
}

fn negative_atoms(f: &Ltl, negated: bool, out: &mut Vec<AtomId>) {
    match f {
        Ltl::True | Ltl::False => {}
        Ltl::Atom(a) => {
            if negated {
                out.push(*a)
            }
        }
        Ltl::Not(a) => negative_atoms(a, !negated, out),
        Ltl::Next(a) | Ltl::WeakNext(a) | Ltl::Eventually(a) | Ltl::Always(a) => negative_atoms(a, negated, out),
        Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Until(a, b) => {
            negative_atoms(a, negated, out);
            negative_atoms(b, negated, out);
        }
    }
}

/// Evaluates a propositional formula treating every negated atom as
/// satisfiable, so `false` means no reachable state can satisfy it.
fn optimistic(f: &Ltl, negated: bool, reach: &dyn Fn(AtomId) -> bool) -> bool {
    match f {
        Ltl::True => !negated,
        Ltl::False => negated,
        Ltl::Atom(a) => negated || reach(*a),
        Ltl::Not(a) => optimistic(a, !negated, reach),
        Ltl::And(a, b) if !negated => optimistic(a, negated, reach) && optimistic(b, negated, reach),
        Ltl::Or(a, b) if negated => optimistic(a, negated, reach) && optimistic(b, negated, reach),
        Ltl::And(a, b) | Ltl::Or(a, b) => optimistic(a, negated, reach) || optimistic(b, negated, reach),
        _ => true,
    }
}

/// Splits into conjuncts, drops `true`, sorts and deduplicates. `None` if a
/// conjunct is `false`.
fn canonical(formulas: impl IntoIterator<Item = Ltl>) -> Option<Vec<Ltl>> {
    let mut out = Vec::new();
    for f in formulas {
        for c in f.conjuncts() {
            match c {
                Ltl::True => {}
                Ltl::False => return None,
                other => out.push(other),
            }
        }
    }
    out.sort();
    out.dedup();
    Some(out)
}

/// Finds a shortest plan whose trace satisfies every goal, or proves that none
/// exists.
///
/// States are projected onto atoms that occur in some precondition or goal;
/// the remaining atoms cannot influence applicability or goal truth. Goals of
/// the form `F (g & WX false)` with propositional `g` are invariant under
/// progression and are checked only at the goal test.
///
/// Atoms that are never deleted, occur in no precondition and only positively
/// in such end goals are monotone: a state with more of them is at least as
/// good as one with fewer, so a state dominated by one already reached is not
/// enqueued.
pub fn solve(task: &GroundTask, goals: &[&Ltl], limits: &Limits) -> Result<SolveOutcome, ResourceExhausted> {
    let start = Instant::now();
    let n = task.num_atoms();

    // Atoms no action touches keep their initial value forever.
    let mut fluent = vec![false; n];
    for a in &task.actions {
        for &x in a.add.iter().chain(&a.del) {
            fluent[x.index()] = true;
        }
    }

    let mut end_goals: Vec<Ltl> = Vec::new();
    let mut dynamic: Vec<Ltl> = Vec::new();
    for g in goals {
        match g.as_at_end() {
            Some(body) if body.is_propositional() => end_goals.push(body.clone()),
            _ => dynamic.push((*g).clone()),
        }
    }
    end_goals.sort();
    end_goals.dedup();

    let mut kept = vec![false; n];
    let mut in_pre = vec![false; n];
    let mut deleted = vec![false; n];
    let mut pinned = vec![false; n];
    for g in goals {
        for id in g.atoms() {
            kept[id.index()] = true;
        }
    }
    for a in &task.actions {
        for &p in &a.pre {
            if fluent[p.index()] {
                kept[p.index()] = true;
                in_pre[p.index()] = true;
            }
        }
        for &d in &a.del {
            if !a.add.contains(&d) {
                deleted[d.index()] = true;
            }
        }
    }
    for g in &dynamic {
        for id in g.atoms() {
            pinned[id.index()] = true;
        }
    }
    let mut negative = Vec::new();
    for g in &end_goals {
        negative_atoms(g, false, &mut negative);
    }
    for id in negative {
        pinned[id.index()] = true;
    }

    let mut local = vec![UNKEPT; n];
    let (mut n_core, mut n_mono) = (0u32, 0u32);
    for i in 0..n {
        if !kept[i] {
            continue;
        }
        if in_pre[i] || deleted[i] || pinned[i] {
            local[i] = n_core;
            n_core += 1;
        } else {
            local[i] = MONO | n_mono;
            n_mono += 1;
        }
    }
    let core_words = (n_core as usize).div_ceil(64);
    let mono_words = (n_mono as usize).div_ceil(64);

    let mut seen = HashSet::new();
    let mut actions = Vec::new();
    for (i, a) in task.actions.iter().enumerate() {
        if a.pre.iter().any(|&p| !fluent[p.index()] && !task.init.contains(p)) {
            continue;
        }
        let pre: Vec<u32> = a
            .pre
            .iter()
            .filter(|p| fluent[p.index()])
            .map(|p| local[p.index()])
            .collect();
        let mut add = Vec::new();
        let mut add_mono = Vec::new();
        for x in &a.add {
            match local[x.index()] {
                UNKEPT => {}
                l if l & MONO != 0 => add_mono.push(l & !MONO),
                l => add.push(l),
            }
        }
        // Add wins, so a deleted atom that is also added is never removed.
        let del: Vec<u32> = a
            .del
            .iter()
            .filter(|x| !a.add.contains(x))
            .map(|x| local[x.index()])
            .filter(|&l| l != UNKEPT)
            .collect();
        // Actions with identical projections yield identical successors; the
        // first in name order represents them.
        if seen.insert((pre.clone(), add.clone(), del.clone(), add_mono.clone())) {
            actions.push(ProjectedAction {
                id: ActionId(i as u32),
                pre,
                add,
                del,
                add_mono,
            });
        }
    }
    // Each action is indexed under its least shared precondition atom, so
    // expansion only inspects actions keyed by atoms of the current state.
    let mut uses = vec![0usize; n_core as usize];
    for a in &actions {
        for &p in &a.pre {
            uses[p as usize] += 1;
        }
    }
    let mut unkeyed: Vec<usize> = Vec::new();
    let mut by_key: Vec<Vec<usize>> = vec![Vec::new(); n_core as usize];
    for (i, a) in actions.iter().enumerate() {
        match a.pre.iter().min_by_key(|&&p| (uses[p as usize], p)) {
            Some(&k) => by_key[k as usize].push(i),
            None => unkeyed.push(i),
        }
    }

    let Some(initial_obligations) = canonical(dynamic) else {
        return Ok(SolveOutcome::Unsolvable);
    };

    let mut init_core = vec![0u64; core_words].into_boxed_slice();
    let mut init_mono = vec![0u64; mono_words].into_boxed_slice();
    for id in task.init.iter() {
        match local[id.index()] {
            UNKEPT => {}
            l if l & MONO != 0 => set_bit(&mut init_mono, l & !MONO),
            l => set_bit(&mut init_core, l),
        }
    }

    // Actions by core precondition atom, for relaxed reachability.
    let mut pre_of: Vec<Vec<usize>> = vec![Vec::new(); n_core as usize];
    for (i, a) in actions.iter().enumerate() {
        for &p in &a.pre {
            pre_of[p as usize].push(i);
        }
    }
    // Atoms reachable from `core` when deletes are ignored: core words first,
    // then monotone words.
    let relaxed = |core: &[u64]| -> Box<[u64]> {
        let mut reach = vec![0u64; core_words + mono_words];
        let mut missing: Vec<usize> = actions.iter().map(|a| a.pre.len()).collect();
        let mut queue: Vec<u32> = Vec::new();
        for (w, &word) in core.iter().enumerate() {
            reach[w] = word;
            let mut bits = word;
            while bits != 0 {
                queue.push((w * 64) as u32 + bits.trailing_zeros());
                bits &= bits - 1;
            }
        }
        let fire = |i: usize, reach: &mut Vec<u64>, queue: &mut Vec<u32>| {
            for &x in &actions[i].add {
                if !bit(reach, x) {
                    set_bit(reach, x);
                    queue.push(x);
                }
            }
            for &x in &actions[i].add_mono {
                set_bit(&mut reach[core_words..], x);
            }
        };
        for &i in &unkeyed {
            fire(i, &mut reach, &mut queue);
        }
        while let Some(p) = queue.pop() {
            for &i in &pre_of[p as usize] {
                missing[i] -= 1;
                if missing[i] == 0 {
                    fire(i, &mut reach, &mut queue);
                }
            }
        }
        reach.into_boxed_slice()
    };
    // False if some end goal cannot hold in any state reachable from here.
    let viable = |reach: &[u64], mono: &[u64]| {
        let holds = |atom: AtomId| match local[atom.index()] {
            UNKEPT => false,
            l if l & MONO != 0 => bit(mono, l & !MONO) || bit(&reach[core_words..], l & !MONO),
            l => bit(reach, l),
        };
        end_goals.iter().all(|g| optimistic(g, false, &holds))
    };

    let accepting = |core: &[u64], mono: &[u64], obl: &[Ltl]| {
        let v = View {
            local: &local,
            core,
            mono,
        };
        end_goals.iter().all(|g| g.accepting_if_ends(&v)) && obl.iter().all(|f| f.accepting_if_ends(&v))
    };

    let mut obligations: IndexSet<Vec<Ltl>> = IndexSet::new();
    let (root_obl, _) = obligations.insert_full(initial_obligations);
    // Each (core, obligations) key keeps the antichain of nodes whose monotone
    // parts are not dominated, and its relaxed reachable atoms once needed.
    let mut keys: IndexMap<(Box<[u64]>, u32), Front> = IndexMap::new();
    let mut nodes: Vec<(u32, Box<[u64]>)> = Vec::new();
    let mut parents: Vec<(u32, ActionId)> = Vec::new();

    if accepting(&init_core, &init_mono, &obligations[root_obl]) {
        return Ok(SolveOutcome::Plan(Plan::default()));
    }
    if !viable(&relaxed(&init_core), &init_mono) {
        return Ok(SolveOutcome::Unsolvable);
    }
    keys.insert(
        (init_core, root_obl as u32),
        Front {
            members: vec![0],
            reach: None,
        },
    );
    nodes.push((0, init_mono));
    parents.push((u32::MAX, ActionId(u32::MAX)));

    let reconstruct = |parents: &[(u32, ActionId)], mut idx: usize| {
        let mut steps = Vec::new();
        while parents[idx].0 != u32::MAX {
            steps.push(parents[idx].1);
            idx = parents[idx].0 as usize;
        }
        steps.reverse();
        Plan::new(steps)
    };

    let deadline = limits.timeout.map(|t| start + t);
    let mut expanded: u64 = 0;
    let mut head = 0;
    let mut applicable: Vec<usize> = Vec::new();
    while head < nodes.len() {
        expanded += 1;
        if expanded > limits.max_expanded
            || (expanded.is_multiple_of(1024) && deadline.is_some_and(|d| Instant::now() >= d))
        {
            return Err(ResourceExhausted {
                expanded,
                elapsed_ms: start.elapsed().as_millis() as u64,
            });
        }
        let (key_id, mono) = &nodes[head];
        let ((core, obl_id), _) = keys.get_index(*key_id as usize).expect("node key");
        let (core, mono) = (core.clone(), mono.clone());
        let progressed = {
            let v = View {
                local: &local,
                core: &core,
                mono: &mono,
            };
            canonical(obligations[*obl_id as usize].iter().map(|f| f.progress(&v)))
        };
        let Some(progressed) = progressed else {
            head += 1;
            continue;
        };
        let (next_obl, _) = obligations.insert_full(progressed);

        applicable.clear();
        applicable.extend_from_slice(&unkeyed);
        for (w, &word) in core.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let k = w * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                applicable.extend(
                    by_key[k]
                        .iter()
                        .copied()
                        .filter(|&i| actions[i].pre.iter().all(|&p| bit(&core, p))),
                );
            }
        }
        applicable.sort_unstable();
        for &i in &applicable {
            let a = &actions[i];
            let mut succ = core.clone();
            for &d in &a.del {
                clear_bit(&mut succ, d);
            }
            for &x in &a.add {
                set_bit(&mut succ, x);
            }
            let mut succ_mono = mono.clone();
            for &x in &a.add_mono {
                set_bit(&mut succ_mono, x);
            }
            let entry = keys.entry((succ, next_obl as u32));
            let key_id = entry.index() as u32;
            let front = match entry {
                indexmap::map::Entry::Occupied(e) => e.into_mut(),
                indexmap::map::Entry::Vacant(e) => {
                    let reach = (!end_goals.is_empty()).then(|| relaxed(e.key().0.as_ref()));
                    e.insert(Front {
                        members: Vec::new(),
                        reach,
                    })
                }
            };
            if front
                .members
                .iter()
                .any(|&m| is_subset(&succ_mono, &nodes[m as usize].1))
            {
                continue;
            }
            if let Some(reach) = &front.reach {
                if !viable(reach, &succ_mono) {
                    continue;
                }
            }
            front.members.retain(|&m| !is_subset(&nodes[m as usize].1, &succ_mono));
            let idx = nodes.len();
            front.members.push(idx as u32);
            nodes.push((key_id, succ_mono));
            parents.push((head as u32, a.id));
            let ((succ_core, _), _) = keys.get_index(key_id as usize).expect("fresh key");
            if accepting(succ_core, &nodes[idx].1, &obligations[next_obl]) {
                let plan = reconstruct(&parents, idx);
                debug_assert!(validates(task, goals, &plan));
                return Ok(SolveOutcome::Plan(plan));
            }
        }
        head += 1;
    }
    Ok(SolveOutcome::Unsolvable)
}

/// Executes the plan and checks every goal on the resulting trace.
pub fn validates(task: &GroundTask, goals: &[&Ltl], plan: &Plan) -> bool {
    match plan.run(task) {
        Ok(trace) => goals.iter().all(|g| g.evaluate(&trace.states, 0)),
        Err(_) => false,
    }
}

/// Solvability of goal subsets of a fixed universe.
pub trait Oracle: Sync {
    fn universe_size(&self) -> usize;
    fn is_solvable(&self, set: GoalSet) -> Result<bool, ResourceExhausted>;
}

#[derive(Debug, Default)]
struct Lattice {
    /// ⊆-maximal recorded solvable sets.
    solvable: Vec<GoalSet>,
    /// ⊆-minimal recorded unsolvable sets.
    unsolvable: Vec<GoalSet>,
}

/// Memoized verdicts closed under anti-monotonicity: subsets of solvable sets
/// are solvable, supersets of unsolvable sets are unsolvable.
#[derive(Debug, Default)]
pub struct SolvabilityCache {
    lattice: RwLock<Lattice>,
    planner_calls: AtomicU64,
    hits: AtomicU64,
}

impl SolvabilityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lookup(&self, set: GoalSet) -> Option<bool> {
        let l = self.lattice.read().expect("cache lock poisoned");
        if l.unsolvable.iter().any(|u| u.is_subset_of(set)) {
            Some(false)
        } else if l.solvable.iter().any(|s| set.is_subset_of(*s)) {
            Some(true)
        } else {
            None
        }
    }

    pub fn record(&self, set: GoalSet, solvable: bool) {
        let mut l = self.lattice.write().expect("cache lock poisoned");
        if solvable {
            debug_assert!(
                !l.unsolvable.iter().any(|u| u.is_subset_of(set)),
                "oracle is not anti-monotone"
            );
            if l.solvable.iter().any(|s| set.is_subset_of(*s)) {
                return;
            }
            l.solvable.retain(|s| !s.is_subset_of(set));
            l.solvable.push(set);
        } else {
            debug_assert!(
                !l.solvable.iter().any(|s| set.is_subset_of(*s)),
                "oracle is not anti-monotone"
            );
            if l.unsolvable.iter().any(|u| u.is_subset_of(set)) {
                return;
            }
            l.unsolvable.retain(|u| !set.is_subset_of(*u));
            l.unsolvable.push(set);
        }
    }

    /// Consults the cache, falling back to `compute` on a miss.
    pub fn get_or_compute<E>(&self, set: GoalSet, compute: impl FnOnce() -> Result<bool, E>) -> Result<bool, E> {
        if let Some(v) = self.lookup(set) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v);
        }
        self.planner_calls.fetch_add(1, Ordering::Relaxed);
        let v = compute()?;
        self.record(set, v);
        Ok(v)
    }

    pub fn planner_calls(&self) -> u64 {
        self.planner_calls.load(Ordering::Relaxed)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    /// (maximal solvable, minimal unsolvable) antichains recorded so far.
    pub fn snapshot(&self) -> (Vec<GoalSet>, Vec<GoalSet>) {
        let l = self.lattice.read().expect("cache lock poisoned");
        (l.solvable.clone(), l.unsolvable.clone())
    }
}

/// Oracle that plans for the selected goals of a fixed goal list.
pub struct PlanningOracle {
    task: Arc<GroundTask>,
    goals: Vec<Ltl>,
    limits: Limits,
    cache: SolvabilityCache,
    plans: Mutex<HashMap<GoalSet, Plan>>,
}

impl PlanningOracle {
    pub fn new(task: Arc<GroundTask>, goals: Vec<Ltl>, limits: Limits) -> Self {
        assert!(goals.len() <= crate::goalset::MAX_GOALS);
        PlanningOracle {
            task,
            goals,
            limits,
            cache: SolvabilityCache::new(),
            plans: Mutex::new(HashMap::new()),
        }
    }

    pub fn cache(&self) -> &SolvabilityCache {
        &self.cache
    }

    pub fn task(&self) -> &GroundTask {
        &self.task
    }

    fn selected(&self, set: GoalSet) -> Vec<&Ltl> {
        set.iter().map(|i| &self.goals[i]).collect()
    }

    /// Plans for `set`, recording the verdict in the cache. Repeated
    /// requests return the same plan; known-unsolvable sets skip the search.
    pub fn plan(&self, set: GoalSet) -> Result<SolveOutcome, ResourceExhausted> {
        if let Some(p) = self.plans.lock().expect("plan memo poisoned").get(&set) {
            self.cache.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(SolveOutcome::Plan(p.clone()));
        }
        if self.cache.lookup(set) == Some(false) {
            self.cache.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(SolveOutcome::Unsolvable);
        }
        let out = solve(&self.task, &self.selected(set), &self.limits)?;
        self.cache.record(set, out.is_solvable());
        if let SolveOutcome::Plan(p) = &out {
            self.plans.lock().expect("plan memo poisoned").insert(set, p.clone());
        }
        Ok(out)
    }
}

impl Oracle for PlanningOracle {
    fn universe_size(&self) -> usize {
        self.goals.len()
    }

    fn is_solvable(&self, set: GoalSet) -> Result<bool, ResourceExhausted> {
        self.cache.get_or_compute(set, || {
            solve(&self.task, &self.selected(set), &self.limits).map(|o| o.is_solvable())
        })
    }
}
