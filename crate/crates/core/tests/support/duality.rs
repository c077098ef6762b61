//! MUS/MCS duality against brute-force families on random monotone oracles.

use goalscope_core::conflicts::{enumerate_exhaustive, enumerate_marco};
use goalscope_core::goalset::{canonicalize, minimal_hitting_sets, GoalSet};
use goalscope_core::planner::{Oracle, ResourceExhausted};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Unsolvable exactly when the set contains one of `generators`.
struct Monotone {
    n: usize,
    generators: Vec<GoalSet>,
}

impl Oracle for Monotone {
    fn universe_size(&self) -> usize {
        self.n
    }

    fn is_solvable(&self, s: GoalSet) -> Result<bool, ResourceExhausted> {
        Ok(!self.generators.iter().any(|g| g.is_subset_of(s)))
    }
}

fn solvable(o: &Monotone, s: GoalSet) -> bool {
    o.is_solvable(s).unwrap()
}

/// MUS straight from the definition: unsolvable, every one-smaller subset
/// solvable.
fn brute_mus(o: &Monotone) -> Vec<GoalSet> {
    let mut out: Vec<GoalSet> = (0..1u64 << o.n)
        .map(GoalSet)
        .filter(|&s| !solvable(o, s) && s.iter().all(|i| solvable(o, s.without(i))))
        .collect();
    canonicalize(&mut out);
    out
}

/// MCS straight from the definition: removing it restores solvability, and
/// putting back any one element does not.
fn brute_mcs(o: &Monotone) -> Vec<GoalSet> {
    let full = GoalSet::full(o.n);
    let mut out: Vec<GoalSet> = (0..1u64 << o.n)
        .map(GoalSet)
        .filter(|&r| solvable(o, full.difference(r)) && r.iter().all(|i| !solvable(o, full.difference(r.without(i)))))
        .collect();
    canonicalize(&mut out);
    out
}

fn is_antichain(f: &[GoalSet]) -> bool {
    f.iter().all(|a| f.iter().all(|b| a == b || !a.is_subset_of(*b)))
}

fn random_oracle(rng: &mut StdRng) -> Monotone {
    let n = rng.gen_range(1..=8);
    let k = rng.gen_range(0..=5);
    let generators = (0..k)
        .map(|_| {
            let mut g = GoalSet::EMPTY;
            while g.is_empty() {
                g = GoalSet((0..n).filter(|_| rng.gen_bool(0.35)).fold(0, |m, i| m | 1 << i));
            }
            g
        })
        .collect();
    Monotone { n, generators }
}

/// Checks `cases` random oracles; returns how many were fully solvable.
pub fn check(cases: usize, seed: u64) -> usize {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut fully = 0;
    for case in 0..cases {
        let o = random_oracle(&mut rng);
        let names: Vec<String> = (0..o.n).map(|i| format!("g{i}")).collect();
        let ex = enumerate_exhaustive(&o, names.clone()).unwrap();
        let ma = enumerate_marco(&o, names).unwrap();
        let mus = brute_mus(&o);
        let mcs = brute_mcs(&o);
        assert_eq!(ex.mus, mus, "case {case}: exhaustive MUS");
        assert_eq!(ex.literal_mcs(), mcs, "case {case}: exhaustive MCS");
        assert_eq!(ma.mus, ex.mus, "case {case}: MARCO MUS");
        assert_eq!(ma.mcs, ex.mcs, "case {case}: MARCO MCS");
        assert_eq!(ma.fully_solvable, ex.fully_solvable);
        assert!(!ma.incomplete);
        assert_eq!(
            minimal_hitting_sets(&ex.mus),
            ex.literal_mcs(),
            "case {case}: MCS = HIT(MUS)"
        );
        assert_eq!(
            minimal_hitting_sets(&ex.literal_mcs()),
            ex.mus,
            "case {case}: MUS = HIT(MCS)"
        );
        assert!(is_antichain(&ex.mus) && is_antichain(&ex.mcs));
        if ex.fully_solvable {
            assert!(ex.mus.is_empty() && ex.mcs.is_empty());
            fully += 1;
        }
    }
    fully
}
