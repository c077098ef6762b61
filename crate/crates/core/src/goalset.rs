use std::fmt;

/// Maximum number of goals in one universe.
pub const MAX_GOALS: usize = 64;

/// A set of goals as a bitmask over a fixed universe ordering.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GoalSet(pub u64);

impl GoalSet {
    pub const EMPTY: GoalSet = GoalSet(0);

    pub fn full(n: usize) -> GoalSet {
        assert!(n <= MAX_GOALS, "universe of {n} goals exceeds {MAX_GOALS}");
        if n == 64 {
            GoalSet(u64::MAX)
        } else {
            GoalSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> GoalSet {
        GoalSet(1u64 << i)
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> GoalSet {
        indices.into_iter().fold(GoalSet::EMPTY, |s, i| s.with(i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1u64 << i) != 0
    }

    pub fn with(self, i: usize) -> GoalSet {
        GoalSet(self.0 | (1u64 << i))
    }

    pub fn without(self, i: usize) -> GoalSet {
        GoalSet(self.0 & !(1u64 << i))
    }

    pub fn union(self, o: GoalSet) -> GoalSet {
        GoalSet(self.0 | o.0)
    }

    pub fn intersection(self, o: GoalSet) -> GoalSet {
        GoalSet(self.0 & o.0)
    }

    pub fn difference(self, o: GoalSet) -> GoalSet {
        GoalSet(self.0 & !o.0)
    }

    pub fn is_subset_of(self, o: GoalSet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn intersects(self, o: GoalSet) -> bool {
        self.0 & o.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    /// Canonical order for families: by size, then lexicographically by index.
    pub fn canonical_key(self) -> (usize, u64) {
        (self.len(), !self.0.reverse_bits())
    }
}

impl fmt::Debug for GoalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Sorts a family into canonical order and removes duplicates.
pub fn canonicalize(family: &mut Vec<GoalSet>) {
    family.sort_by_key(|s| s.canonical_key());
    family.dedup();
}

/// Keeps exactly the ⊆-minimal members, in canonical order.
pub fn min_subsets(family: &[GoalSet]) -> Vec<GoalSet> {
    let mut sorted = family.to_vec();
    canonicalize(&mut sorted);
    let mut out: Vec<GoalSet> = Vec::with_capacity(sorted.len());
    // Sorted by size, so any subset of `s` is already in `out`.
    for s in sorted {
        if !out.iter().any(|m| m.is_subset_of(s)) {
            out.push(s);
        }
    }
    out
}

/// All ⊆-minimal sets intersecting every member of `family` (Berge's
/// incremental construction). `HIT(∅) = {∅}`; if `∅ ∈ family` the result is
/// empty.
pub fn minimal_hitting_sets(family: &[GoalSet]) -> Vec<GoalSet> {
    let mut members = min_subsets(family);
    // Small sets first keeps intermediate antichains small.
    members.sort_by_key(|s| s.len());
    let mut hs = vec![GoalSet::EMPTY];
    for f in members {
        let (keep, miss): (Vec<GoalSet>, Vec<GoalSet>) = hs.into_iter().partition(|h| h.intersects(f));
        let mut next = keep.clone();
        for h in miss {
            for e in f.iter() {
                let cand = h.with(e);
                if !keep.iter().any(|k| k.is_subset_of(cand)) {
                    next.push(cand);
                }
            }
        }
        hs = min_subsets(&next);
    }
    canonicalize(&mut hs);
    hs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(ix: &[usize]) -> GoalSet {
        GoalSet::from_indices(ix.iter().copied())
    }

    #[test]
    fn hitting_set_examples() {
        assert_eq!(minimal_hitting_sets(&[s(&[1, 2])]), vec![s(&[1]), s(&[2])]);
        assert_eq!(minimal_hitting_sets(&[s(&[0]), s(&[1])]), vec![s(&[0, 1])]);
        assert_eq!(minimal_hitting_sets(&[]), vec![GoalSet::EMPTY]);
        assert_eq!(minimal_hitting_sets(&[s(&[0]), GoalSet::EMPTY]), vec![]);
    }

    #[test]
    fn min_subsets_examples() {
        assert_eq!(min_subsets(&[s(&[2]), s(&[2, 0])]), vec![s(&[2])]);
        let anti = vec![s(&[0, 1]), s(&[1, 2]), s(&[0, 2])];
        let mut expected = anti.clone();
        canonicalize(&mut expected);
        assert_eq!(min_subsets(&anti), expected);
    }

    fn brute_hit(family: &[GoalSet], n: usize) -> Vec<GoalSet> {
        let hits: Vec<GoalSet> = (0..1u64 << n)
            .map(GoalSet)
            .filter(|h| family.iter().all(|f| h.intersects(*f)))
            .collect();
        let minimal: Vec<GoalSet> = hits
            .iter()
            .copied()
            .filter(|h| !hits.iter().any(|o| o != h && o.is_subset_of(*h)))
            .collect();
        let mut out = minimal;
        canonicalize(&mut out);
        out
    }

    fn family(n: usize) -> impl Strategy<Value = Vec<GoalSet>> {
        proptest::collection::vec((1u64..(1 << n)).prop_map(GoalSet), 0..6)
    }

    proptest! {
        #[test]
        fn berge_matches_brute_force(f in family(6)) {
            prop_assert_eq!(minimal_hitting_sets(&f), brute_hit(&f, 6));
        }

        #[test]
        fn double_dual_is_minimization(f in family(6)) {
            prop_assert_eq!(minimal_hitting_sets(&minimal_hitting_sets(&f)), min_subsets(&f));
        }

        #[test]
        fn min_subsets_matches_pairwise(f in proptest::collection::vec((0u64..64).prop_map(GoalSet), 0..10)) {
            let mut expected: Vec<GoalSet> = f
                .iter()
                .copied()
                .filter(|a| !f.iter().any(|b| b != a && b.is_subset_of(*a)))
                .collect();
            canonicalize(&mut expected);
            prop_assert_eq!(min_subsets(&f), expected);
        }
    }
}
