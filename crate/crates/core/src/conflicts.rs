//! Minimal unsolvable subsets (MUS) and minimal correction sets (MCS) of a goal
//! universe.

use crate::goalset::{canonicalize, minimal_hitting_sets, GoalSet, MAX_GOALS};
use crate::planner::{Oracle, ResourceExhausted};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;
use thiserror::Error;

/// Largest universe accepted by [`enumerate_exhaustive`].
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConflictError {
    #[error("universe of {size} goals exceeds the limit of {limit}")]
    UniverseTooLarge { size: usize, limit: usize },
    #[error("universe has {names} names but the oracle covers {oracle} goals")]
    UniverseMismatch { names: usize, oracle: usize },
    #[error("the task is unsolvable even without goals")]
    EmptySetUnsolvable,
    #[error(transparent)]
    Exhausted(#[from] ResourceExhausted),
    #[error("unknown goal id `{0}`")]
    UnknownGoal(String),
}

/// MUS and MCS families over an ordered goal universe; bit `i` of every set
/// refers to `universe[i]`.
///
/// A fully solvable universe has no MUS and, by convention, no MCS; the
/// `fully_solvable` flag marks it. [`ConflictData::literal_mcs`] gives the
/// hitting-set dual `{∅}` for formula evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ConflictJson", try_from = "ConflictJson")]
pub struct ConflictData {
    pub universe: Vec<String>,
    pub mus: Vec<GoalSet>,
    pub mcs: Vec<GoalSet>,
    pub fully_solvable: bool,
    /// Enumeration stopped early; families are partial.
    pub incomplete: bool,
    pub oracle_calls: u64,
}

#[derive(Serialize, Deserialize)]
struct ConflictJson {
    universe: Vec<String>,
    mus: Vec<Vec<String>>,
    mcs: Vec<Vec<String>>,
    fully_solvable: bool,
    #[serde(default)]
    incomplete: bool,
    #[serde(default)]
    oracle_calls: u64,
}

impl From<ConflictData> for ConflictJson {
    fn from(d: ConflictData) -> Self {
        ConflictJson {
            mus: d.mus.iter().map(|s| d.names(*s)).collect(),
            mcs: d.mcs.iter().map(|s| d.names(*s)).collect(),
            universe: d.universe,
            fully_solvable: d.fully_solvable,
            incomplete: d.incomplete,
            oracle_calls: d.oracle_calls,
        }
    }
}

impl TryFrom<ConflictJson> for ConflictData {
    type Error = ConflictError;

    fn try_from(j: ConflictJson) -> Result<Self, Self::Error> {
        if j.universe.len() > MAX_GOALS {
            return Err(ConflictError::UniverseTooLarge {
                size: j.universe.len(),
                limit: MAX_GOALS,
            });
        }
        let mut d = ConflictData {
            universe: j.universe,
            mus: Vec::new(),
            mcs: Vec::new(),
            fully_solvable: j.fully_solvable,
            incomplete: j.incomplete,
            oracle_calls: j.oracle_calls,
        };
        d.mus = j.mus.iter().map(|s| d.set_of(s)).collect::<Result<_, _>>()?;
        d.mcs = j.mcs.iter().map(|s| d.set_of(s)).collect::<Result<_, _>>()?;
        canonicalize(&mut d.mus);
        canonicalize(&mut d.mcs);
        Ok(d)
    }
}

impl ConflictData {
    fn from_families(
        universe: Vec<String>,
        mut mus: Vec<GoalSet>,
        mut mcs: Vec<GoalSet>,
        incomplete: bool,
        oracle_calls: u64,
    ) -> Self {
        canonicalize(&mut mus);
        canonicalize(&mut mcs);
        let fully_solvable = !incomplete && mus.is_empty();
        if fully_solvable {
            mcs.clear();
        }
        ConflictData {
            universe,
            mus,
            mcs,
            fully_solvable,
            incomplete,
            oracle_calls,
        }
    }

    pub fn full_set(&self) -> GoalSet {
        GoalSet::full(self.universe.len())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.universe.iter().position(|u| u == id)
    }

    pub fn set_of<S: AsRef<str>>(&self, ids: &[S]) -> Result<GoalSet, ConflictError> {
        ids.iter().try_fold(GoalSet::EMPTY, |acc, id| {
            self.index_of(id.as_ref())
                .map(|i| acc.with(i))
                .ok_or_else(|| ConflictError::UnknownGoal(id.as_ref().to_string()))
        })
    }

    /// Goal ids of `set` in universe order.
    pub fn names(&self, set: GoalSet) -> Vec<String> {
        set.iter().map(|i| self.universe[i].clone()).collect()
    }

    /// The MCS family as the exact hitting-set dual of the MUS family:
    /// `{∅}` when fully solvable.
    pub fn literal_mcs(&self) -> Vec<GoalSet> {
        if self.fully_solvable {
            vec![GoalSet::EMPTY]
        } else {
            self.mcs.clone()
        }
    }

    /// Families of the sub-universe `sub`: a MUS of `sub` is exactly a MUS of
    /// the whole universe contained in `sub`, and the MCS follow by duality.
    pub fn restrict(&self, sub: GoalSet) -> ConflictData {
        let mus: Vec<GoalSet> = self.mus.iter().copied().filter(|c| c.is_subset_of(sub)).collect();
        let mcs = if mus.is_empty() {
            Vec::new()
        } else {
            minimal_hitting_sets(&mus)
        };
        ConflictData::from_families(self.universe.clone(), mus, mcs, self.incomplete, 0)
    }

    /// Highest total utility of a solvable subset: everything minus the
    /// cheapest correction.
    pub fn max_utility(&self, utilities: &[u64]) -> u64 {
        let total = self.utility(self.full_set(), utilities);
        total - self.cheapest_corrections(utilities).0
    }

    /// The minimum correction cost and every MCS attaining it.
    pub fn cheapest_corrections(&self, utilities: &[u64]) -> (u64, Vec<GoalSet>) {
        let mcs = self.literal_mcs();
        let best = mcs.iter().map(|r| self.utility(*r, utilities)).min().unwrap_or(0);
        let at_best = mcs
            .into_iter()
            .filter(|r| self.utility(*r, utilities) == best)
            .collect();
        (best, at_best)
    }

    pub fn utility(&self, set: GoalSet, utilities: &[u64]) -> u64 {
        set.iter().map(|i| utilities[i]).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("conflict data serializes")
    }
}

struct Counting<'a> {
    inner: &'a dyn Oracle,
    calls: AtomicU64,
}

impl Counting<'_> {
    fn query(&self, s: GoalSet) -> Result<bool, ResourceExhausted> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.is_solvable(s)
    }
}

fn check_universe(oracle: &dyn Oracle, universe: &[String], limit: usize) -> Result<(), ConflictError> {
    if universe.len() > limit {
        return Err(ConflictError::UniverseTooLarge {
            size: universe.len(),
            limit,
        });
    }
    if universe.len() != oracle.universe_size() {
        return Err(ConflictError::UniverseMismatch {
            names: universe.len(),
            oracle: oracle.universe_size(),
        });
    }
    Ok(())
}

/// Walks the subset lattice by cardinality. A set is queried only if all its
/// one-smaller subsets are solvable, so every unsolvable query is a MUS and
/// every solvable set is visited; the maximal ones give the MCS.
pub fn enumerate_exhaustive(oracle: &dyn Oracle, universe: Vec<String>) -> Result<ConflictData, ConflictError> {
    check_universe(oracle, &universe, EXHAUSTIVE_LIMIT)?;
    let n = universe.len();
    let o = Counting {
        inner: oracle,
        calls: AtomicU64::new(0),
    };
    if !o.query(GoalSet::EMPTY)? {
        return Err(ConflictError::EmptySetUnsolvable);
    }
    let mut solvable: HashSet<GoalSet> = HashSet::from([GoalSet::EMPTY]);
    let mut layer = vec![GoalSet::EMPTY];
    let mut mus = Vec::new();
    for _ in 1..=n {
        let mut candidates: Vec<GoalSet> = Vec::new();
        for s in &layer {
            let top = 64 - s.0.leading_zeros() as usize;
            for i in top..n {
                let c = s.with(i);
                if c.iter().all(|j| solvable.contains(&c.without(j))) {
                    candidates.push(c);
                }
            }
        }
        let verdicts: Vec<(GoalSet, bool)> = candidates
            .par_iter()
            .map(|&c| o.query(c).map(|v| (c, v)))
            .collect::<Result<_, _>>()?;
        layer.clear();
        for (c, ok) in verdicts {
            if ok {
                solvable.insert(c);
                layer.push(c);
            } else {
                mus.push(c);
            }
        }
        if layer.is_empty() {
            break;
        }
    }
    let full = GoalSet::full(n);
    let mcs: Vec<GoalSet> = solvable
        .iter()
        .filter(|s| (0..n).all(|i| s.contains(i) || !solvable.contains(&s.with(i))))
        .map(|s| full.difference(*s))
        .collect();
    Ok(ConflictData::from_families(
        universe,
        mus,
        mcs,
        false,
        o.calls.into_inner(),
    ))
}

/// Shrinks an unsolvable set to a MUS by element-wise removal.
fn shrink(o: &Counting, seed: GoalSet) -> Result<GoalSet, ResourceExhausted> {
    let mut s = seed;
    for i in seed.iter() {
        let t = s.without(i);
        if !o.query(t)? {
            s = t;
        }
    }
    Ok(s)
}

/// [`enumerate_marco_until`] without a deadline.
pub fn enumerate_marco(oracle: &dyn Oracle, universe: Vec<String>) -> Result<ConflictData, ConflictError> {
    enumerate_marco_until(oracle, universe, None)
}

/// Dualize-and-advance: every minimal hitting set `H` of the MUS found so far
/// is tested by querying `U \ H`. A solvable complement makes `H` an MCS; an
/// unsolvable one is shrunk to a new MUS that `H` misses. Enumeration is
/// complete once every minimal hitting set is a verified MCS.
///
/// Budget exhaustion or the deadline yields partial families flagged
/// `incomplete` rather than an error.
pub fn enumerate_marco_until(
    oracle: &dyn Oracle,
    universe: Vec<String>,
    deadline: Option<Instant>,
) -> Result<ConflictData, ConflictError> {
    check_universe(oracle, &universe, MAX_GOALS)?;
    let full = GoalSet::full(universe.len());
    let o = Counting {
        inner: oracle,
        calls: AtomicU64::new(0),
    };
    if !o.query(GoalSet::EMPTY)? {
        return Err(ConflictError::EmptySetUnsolvable);
    }
    let mut mus: Vec<GoalSet> = Vec::new();
    let mut verified: HashSet<GoalSet> = HashSet::new();
    let mut incomplete = false;
    loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            incomplete = true;
            break;
        }
        let pending: Vec<GoalSet> = minimal_hitting_sets(&mus)
            .into_iter()
            .filter(|h| !verified.contains(h))
            .collect();
        if pending.is_empty() {
            break;
        }
        let outcomes: Vec<Result<(GoalSet, Option<GoalSet>), ResourceExhausted>> = pending
            .par_iter()
            .map(|&h| {
                let seed = full.difference(h);
                if o.query(seed)? {
                    Ok((h, None))
                } else {
                    Ok((h, Some(shrink(&o, seed)?)))
                }
            })
            .collect();
        for r in outcomes {
            match r {
                Ok((h, None)) => {
                    verified.insert(h);
                }
                Ok((_, Some(c))) => {
                    if !mus.contains(&c) {
                        mus.push(c);
                    }
                }
                Err(_) => incomplete = true,
            }
        }
        if incomplete {
            break;
        }
    }
    let mcs: Vec<GoalSet> = verified.into_iter().collect();
    Ok(ConflictData::from_families(
        universe,
        mus,
        mcs,
        incomplete,
        o.calls.into_inner(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Unsolvable iff the set contains one of `minimal`.
    struct Monotone {
        n: usize,
        minimal: Vec<GoalSet>,
    }

    impl Oracle for Monotone {
        fn universe_size(&self) -> usize {
            self.n
        }

        fn is_solvable(&self, s: GoalSet) -> Result<bool, ResourceExhausted> {
            Ok(!self.minimal.iter().any(|m| m.is_subset_of(s)))
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("g{i}")).collect()
    }

    fn s(ix: &[usize]) -> GoalSet {
        GoalSet::from_indices(ix.iter().copied())
    }

    #[test]
    fn single_conflict() {
        // S=0, C=1, M=2
        let o = Monotone {
            n: 3,
            minimal: vec![s(&[1, 2])],
        };
        for d in [
            enumerate_exhaustive(&o, names(3)).unwrap(),
            enumerate_marco(&o, names(3)).unwrap(),
        ] {
            assert_eq!(d.mus, vec![s(&[1, 2])]);
            assert_eq!(d.mcs, vec![s(&[1]), s(&[2])]);
            assert!(!d.fully_solvable);
        }
    }

    #[test]
    fn fully_solvable_convention() {
        let o = Monotone { n: 4, minimal: vec![] };
        let d = enumerate_exhaustive(&o, names(4)).unwrap();
        assert!(d.mus.is_empty() && d.mcs.is_empty() && d.fully_solvable);
        assert_eq!(d.literal_mcs(), vec![GoalSet::EMPTY]);
        assert_eq!(enumerate_marco(&o, names(4)).unwrap().mcs, d.mcs);
        assert_eq!(d.max_utility(&[1, 2, 3, 4]), 10);
    }

    #[test]
    fn unsolvable_empty_set_is_rejected() {
        let o = Monotone {
            n: 2,
            minimal: vec![GoalSet::EMPTY],
        };
        assert_eq!(
            enumerate_exhaustive(&o, names(2)),
            Err(ConflictError::EmptySetUnsolvable)
        );
        assert_eq!(enumerate_marco(&o, names(2)), Err(ConflictError::EmptySetUnsolvable));
    }

    #[test]
    fn exhaustive_guard() {
        let o = Monotone { n: 21, minimal: vec![] };
        assert!(matches!(
            enumerate_exhaustive(&o, names(21)),
            Err(ConflictError::UniverseTooLarge { .. })
        ));
    }

    #[test]
    fn restriction_and_utility() {
        let o = Monotone {
            n: 4,
            minimal: vec![s(&[0, 1]), s(&[2, 3])],
        };
        let d = enumerate_exhaustive(&o, names(4)).unwrap();
        assert_eq!(d.mcs.len(), 4);
        let r = d.restrict(s(&[0, 1, 2]));
        assert_eq!(r.mus, vec![s(&[0, 1])]);
        assert_eq!(r.mcs, vec![s(&[0]), s(&[1])]);
        let r = d.restrict(s(&[0, 2]));
        assert!(r.fully_solvable);
        let u = [5, 1, 2, 7];
        assert_eq!(d.max_utility(&u), 15 - 3);
        assert_eq!(d.cheapest_corrections(&u).1, vec![s(&[1, 2])]);
    }

    #[test]
    fn json_round_trip() {
        let o = Monotone {
            n: 3,
            minimal: vec![s(&[1, 2])],
        };
        let d = enumerate_exhaustive(&o, names(3)).unwrap();
        let v = d.to_json();
        assert_eq!(v["mus"], serde_json::json!([["g1", "g2"]]));
        assert_eq!(v["mcs"], serde_json::json!([["g1"], ["g2"]]));
        let back: ConflictData = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn exhaustive_counts_queries() {
        let o = Monotone {
            n: 3,
            minimal: vec![s(&[1, 2])],
        };
        let d = enumerate_exhaustive(&o, names(3)).unwrap();
        // ∅, three singletons, three pairs; the full set contains the MUS.
        assert_eq!(d.oracle_calls, 7);
    }
}
