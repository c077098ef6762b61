use goalscope_core::conflicts::enumerate_exhaustive;
use goalscope_core::fixtures;
use goalscope_core::goalset::GoalSet;
use goalscope_core::planner::{Oracle, SolveOutcome};
use goalscope_core::session::Mode;

fn ids(p: &goalscope_core::session::Project, family: &[GoalSet]) -> Vec<Vec<String>> {
    family.iter().map(|s| p.ids_of(*s)).collect()
}

#[test]
fn running_example_has_one_conflict() {
    let p = fixtures::running_example();
    let names: Vec<String> = p.goals().iter().map(|g| g.id.clone()).collect();
    let d = enumerate_exhaustive(p.oracle().as_ref(), names).unwrap();
    assert_eq!(ids(&p, &d.mus), vec![vec!["C", "M"]]);
    assert_eq!(ids(&p, &d.mcs), vec![vec!["C"], vec!["M"]]);
    let demo = p.precompute_demo().unwrap();
    assert_eq!(demo.max_utility, 4);
}

#[test]
fn introduction_instance() {
    let p = fixtures::intro_instance();
    assert_eq!(p.goals().len(), 8);
    let demo = p.precompute_demo().unwrap();
    let d = &demo.conflicts;
    assert_eq!(
        ids(&p, &d.mus),
        vec![
            vec!["alice-violin", "alice-homework"],
            vec!["clean-home", "bob-tennis", "bob-homework"]
        ]
    );
    assert_eq!(d.mcs.len(), 6);
    assert!(d.mcs.iter().all(|c| c.len() == 2));
    assert_eq!(demo.max_utility, 15);
    let utilities: Vec<u64> = p.goals().iter().map(|g| g.utility).collect();
    let (_, best) = d.cheapest_corrections(&utilities);
    assert_eq!(ids(&p, &best), vec![vec!["clean-home", "alice-violin"]]);
    assert!(p.oracle().cache().planner_calls() <= 256);
}

#[test]
fn every_goal_is_individually_enforceable() {
    for f in fixtures::ALL {
        let p = f.project(Mode::Free).unwrap();
        for i in 0..p.goals().len() {
            let out = p.oracle().plan(GoalSet::singleton(i)).unwrap();
            assert!(
                matches!(out, SolveOutcome::Plan(_)),
                "{} in {}",
                p.goals()[i].id,
                f.name
            );
        }
    }
}

#[test]
fn evaluation_drop_list_is_solvable_and_full_set_is_not() {
    let p = fixtures::eval_instance();
    let dropped = [
        "alice-hangs-out",
        "bob-hangs-out",
        "cook-dinner",
        "go-shopping",
        "hairdresser",
        "drink-with-friends",
    ];
    let all = GoalSet::full(p.goals().len());
    let kept = all.difference(p.set_of(&dropped).unwrap());
    assert!(p.oracle().is_solvable(kept).unwrap());
    let utility: u64 = kept.iter().map(|i| p.goals()[i].utility).sum();
    assert_eq!(utility, 27);
    assert!(!p.oracle().is_solvable(all).unwrap());
}

#[test]
fn transport_goals_conflict_only_through_the_route() {
    let p = fixtures::transport();
    let names: Vec<String> = p.goals().iter().map(|g| g.id.clone()).collect();
    let d = enumerate_exhaustive(p.oracle().as_ref(), names).unwrap();
    // p2 can reach the depot without touching the packing station.
    assert!(d.fully_solvable);
}
