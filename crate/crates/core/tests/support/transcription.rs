//! Every question type on every step of the running example, checked against
//! the answer formulas written out directly over brute-force families.

use goalscope_core::efcc::QuestionType;
use goalscope_core::fixtures;
use goalscope_core::goalset::GoalSet;
use goalscope_core::planner::Oracle;
use goalscope_core::session::{Mode, Project};
use std::collections::BTreeSet;

const N: usize = 3;

fn solvable(p: &Project, s: GoalSet) -> bool {
    p.oracle().is_solvable(s).unwrap()
}

fn subsets(of: GoalSet) -> impl Iterator<Item = GoalSet> {
    (0..1u64 << N).map(GoalSet).filter(move |s| s.is_subset_of(of))
}

fn minimal(family: Vec<GoalSet>) -> BTreeSet<GoalSet> {
    family
        .iter()
        .copied()
        .filter(|a| !family.iter().any(|b| b != a && b.is_subset_of(*a)))
        .collect()
}

/// { C ⊆ G | C unsolvable, every C \ {c} solvable }
fn mus(p: &Project, g: GoalSet) -> Vec<GoalSet> {
    subsets(g)
        .filter(|&c| !solvable(p, c) && c.iter().all(|i| solvable(p, c.without(i))))
        .collect()
}

/// { C ⊆ G | G \ C solvable, every G \ (C \ {c}) unsolvable }
fn mcs(p: &Project, g: GoalSet) -> Vec<GoalSet> {
    subsets(g)
        .filter(|&c| solvable(p, g.difference(c)) && c.iter().all(|i| !solvable(p, g.difference(c.without(i)))))
        .collect()
}

struct Step {
    enf: GoalSet,
    reference: GoalSet,
    solvable: bool,
    g_true: GoalSet,
}

/// E(Q) exactly as the answer formulas state it.
fn transcribe(p: &Project, q: QuestionType, args: GoalSet, d: &Step) -> BTreeSet<GoalSet> {
    let g_false = d.reference.difference(d.g_true);
    match q {
        QuestionType::UsWhy => mus(p, d.enf).into_iter().collect(),
        QuestionType::UsHow => mcs(p, d.enf).into_iter().collect(),
        QuestionType::SWhyNot | QuestionType::SWhatIf | QuestionType::SCan => minimal(
            mus(p, d.reference)
                .into_iter()
                .filter(|c| c.is_subset_of(d.g_true.union(args)))
                .map(|c| c.difference(args))
                .collect(),
        ),
        QuestionType::SHow => minimal(
            mcs(p, d.reference)
                .into_iter()
                .filter(|c| c.intersection(args).is_empty())
                .map(|c| c.difference(g_false))
                .collect(),
        ),
        _ => unreachable!(),
    }
}

/// The sample sentence for a family, chosen by the branch conditions.
fn sentence(q: QuestionType, args: &str, e: &BTreeSet<GoalSet>, family: &str) -> (String, &'static str) {
    let empty = e.is_empty();
    let has_empty = e.contains(&GoalSet::EMPTY);
    match q {
        QuestionType::UsWhy => (
            format!("The task is unsolvable because it is not possible to satisfy any of the conflicts: {family}."),
            "only",
        ),
        QuestionType::UsHow => (
            format!("To make the task solvable you have to forego one of the goal sets: {family}."),
            "only",
        ),
        QuestionType::SWhyNot if empty => (
            format!("{args} can be satisfied without foregoing any of the already satisfied goals."),
            "empty",
        ),
        QuestionType::SWhyNot if has_empty => (
            format!("The goals {args} cannot be satisfied together."),
            "contains-empty",
        ),
        QuestionType::SWhyNot => (
            format!("There is a conflict between {args} and all the goal subsets: {family}."),
            "otherwise",
        ),
        QuestionType::SWhatIf if empty => (
            format!("{args} can be satisfied without foregoing any goal satisfied by the plan."),
            "empty",
        ),
        QuestionType::SWhatIf if has_empty => ("Then the problem would be unsolvable.".to_string(), "contains-empty"),
        QuestionType::SWhatIf => (
            format!("You could no longer satisfy any of the goal sets: {family}."),
            "otherwise",
        ),
        QuestionType::SCan if empty => (format!("{args} can be satisfied."), "empty"),
        QuestionType::SCan => ("It is not possible.".to_string(), "otherwise"),
        QuestionType::SHow if has_empty => (
            format!("{args} can be satisfied without foregoing any goals satisfied by the plan."),
            "contains-empty",
        ),
        QuestionType::SHow if empty => ("It is not possible.".to_string(), "empty"),
        QuestionType::SHow => (
            format!("You have to forego one of the goal sets: {family}."),
            "otherwise",
        ),
        _ => unreachable!(),
    }
}

fn names(p: &Project, s: GoalSet) -> Vec<String> {
    s.iter().map(|i| p.short_name(i)).collect()
}

fn join(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn render(p: &Project, family: &[GoalSet]) -> String {
    family
        .iter()
        .map(|s| format!("{{{}}}", names(p, *s).join(", ")))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Builds and resolves a step, returning it with its id.
fn step(p: &mut Project, enf: GoalSet, reference: GoalSet) -> (String, Step) {
    let enf_ids = p.ids_of(enf);
    let ref_ids = p.ids_of(reference);
    let id = p.create_step(&enf_ids, &ref_ids, None).unwrap().id.clone();
    p.run_step(&id).unwrap();
    let v = p.step_view(p.step(&id).unwrap()).unwrap();
    assert_eq!(v.solvable, solvable(p, enf));
    (
        id,
        Step {
            enf: v.g_enf,
            reference: v.g_ref,
            solvable: v.solvable,
            g_true: v.g_true,
        },
    )
}

/// Asks every question on every step and checks answers and sample
/// sentences; returns how many questions were checked.
pub fn check_all_steps() -> usize {
    let mut free = fixtures::RUNNING.project(Mode::Free).unwrap();
    let mut demo = fixtures::RUNNING.project(Mode::Demo).unwrap();
    let all = GoalSet::full(N);
    let mut cases: Vec<(bool, GoalSet, GoalSet)> = vec![(true, GoalSet::EMPTY, all)];
    for enf in subsets(all).filter(|s| !s.is_empty()) {
        for reference in subsets(all).filter(|r| enf.is_subset_of(*r)) {
            cases.push((false, enf, reference));
        }
    }

    let mut covered: BTreeSet<(&'static str, &'static str)> = BTreeSet::new();
    let mut checked = 0;
    for (in_demo, enf, reference) in cases {
        let p = if in_demo { &mut demo } else { &mut free };
        let (id, d) = step(p, enf, reference);
        let questions: Vec<(QuestionType, GoalSet)> = if d.solvable {
            let g_false = d.reference.difference(d.g_true);
            subsets(g_false)
                .filter(|a| !a.is_empty())
                .flat_map(|a| QuestionType::SOLVABLE.into_iter().map(move |q| (q, a)))
                .collect()
        } else {
            QuestionType::UNSOLVABLE
                .into_iter()
                .map(|q| (q, GoalSet::EMPTY))
                .collect()
        };
        for (q, args) in questions {
            let arg_ids = p.ids_of(args);
            let b = p.ask(&id, q, &arg_ids).unwrap();
            let expected = transcribe(p, q, args, &d);
            let got: BTreeSet<GoalSet> = b.answer.family.iter().copied().collect();
            assert_eq!(got.len(), b.answer.family.len(), "duplicates in {q} answer");
            assert_eq!(got, expected, "{q} {:?} on enf {:?} ref {:?}", args, enf, reference);

            let (text, branch) = sentence(q, &join(&names(p, args)), &expected, &render(p, &b.answer.family));
            let name = |i: usize| p.short_name(i);
            assert_eq!(b.sample_answer(&name), text);
            covered.insert((q.label(), branch));
            checked += 1;
        }
    }

    let expected_coverage = [
        ("US-WHY", "only"),
        ("US-HOW", "only"),
        ("S-WHY-NOT", "empty"),
        ("S-WHY-NOT", "contains-empty"),
        ("S-WHY-NOT", "otherwise"),
        ("S-WHAT-IF", "empty"),
        ("S-WHAT-IF", "contains-empty"),
        ("S-WHAT-IF", "otherwise"),
        ("S-CAN", "empty"),
        ("S-CAN", "otherwise"),
        ("S-HOW", "empty"),
        ("S-HOW", "contains-empty"),
        ("S-HOW", "otherwise"),
    ];
    for c in expected_coverage {
        assert!(covered.contains(&c), "branch {c:?} never exercised");
    }
    assert!(checked > 50, "{checked}");
    checked
}
