//! Explanation sets for typed questions, computed from MUS/MCS families.
//!
//! | type        | family                                                          |
//! |-------------|-----------------------------------------------------------------|
//! | `US-WHY`    | `MUS(G_enf)`                                                    |
//! | `US-HOW`    | `MCS(G_enf)`                                                    |
//! | `S-WHY-NOT`, `S-WHAT-IF`, `S-CAN` | `min⊆ { C \ args : C ∈ MUS(G_ref), C ⊆ G_true ∪ args }` |
//! | `S-HOW`     | `min⊆ { C \ G_false : C ∈ MCS(G_ref), C ∩ args = ∅ }`           |

use crate::conflicts::ConflictData;
use crate::goalset::{min_subsets, GoalSet};
use crate::ltlf::Ltl;
use crate::model::State;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionType {
    #[serde(rename = "US-WHY")]
    UsWhy,
    #[serde(rename = "US-HOW")]
    UsHow,
    #[serde(rename = "S-WHY-NOT")]
    SWhyNot,
    #[serde(rename = "S-WHAT-IF")]
    SWhatIf,
    #[serde(rename = "S-CAN")]
    SCan,
    #[serde(rename = "S-HOW")]
    SHow,
    /// Routing only: answered without the explanation framework.
    #[serde(rename = "DIRECT")]
    Direct,
    /// Routing only: handed to the explanation translator as-is.
    #[serde(rename = "FOLLOW-UP")]
    FollowUp,
}

impl QuestionType {
    pub const UNSOLVABLE: [QuestionType; 2] = [QuestionType::UsWhy, QuestionType::UsHow];
    pub const SOLVABLE: [QuestionType; 4] = [
        QuestionType::SWhyNot,
        QuestionType::SWhatIf,
        QuestionType::SCan,
        QuestionType::SHow,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QuestionType::UsWhy => "US-WHY",
            QuestionType::UsHow => "US-HOW",
            QuestionType::SWhyNot => "S-WHY-NOT",
            QuestionType::SWhatIf => "S-WHAT-IF",
            QuestionType::SCan => "S-CAN",
            QuestionType::SHow => "S-HOW",
            QuestionType::Direct => "DIRECT",
            QuestionType::FollowUp => "FOLLOW-UP",
        }
    }

    /// Accepts labels case-insensitively, with `-` or `_` separators.
    pub fn from_label(label: &str) -> Option<QuestionType> {
        let norm = label.trim().to_ascii_uppercase().replace('_', "-");
        [
            QuestionType::UsWhy,
            QuestionType::UsHow,
            QuestionType::SWhyNot,
            QuestionType::SWhatIf,
            QuestionType::SCan,
            QuestionType::SHow,
            QuestionType::Direct,
            QuestionType::FollowUp,
        ]
        .into_iter()
        .find(|q| q.label() == norm)
    }

    pub fn is_unsolvable_type(self) -> bool {
        matches!(self, QuestionType::UsWhy | QuestionType::UsHow)
    }

    pub fn is_solvable_type(self) -> bool {
        matches!(
            self,
            QuestionType::SWhyNot | QuestionType::SWhatIf | QuestionType::SCan | QuestionType::SHow
        )
    }

    /// Natural-language template, `{args}` marks the argument slot.
    pub fn template(self) -> &'static str {
        match self {
            QuestionType::UsWhy => "Why is the task unsolvable?",
            QuestionType::UsHow => "How can I make the task solvable?",
            QuestionType::SWhyNot => "Why is {args} not satisfied?",
            QuestionType::SWhatIf => "What happens if we enforce {args}?",
            QuestionType::SCan => "Can {args} be satisfied?",
            QuestionType::SHow => "How can {args} be satisfied?",
            QuestionType::Direct | QuestionType::FollowUp => "{args}",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A typed question; `args` indexes the conflict-data universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Question {
    pub qtype: QuestionType,
    pub args: GoalSet,
}

/// Goal sets of an iteration step in conflict-data universe coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepView {
    pub g_ref: GoalSet,
    pub g_enf: GoalSet,
    pub solvable: bool,
    /// Reference goals satisfied by the sample plan; empty if unsolvable.
    pub g_true: GoalSet,
}

impl StepView {
    pub fn g_false(&self) -> GoalSet {
        self.g_ref.difference(self.g_true)
    }
}

/// Splits `g_ref` by truth on the plan's trace. `goals[i]` is the formula of
/// universe index `i`; without a trace every reference goal is false.
pub fn goals_true_false(goals: &[Ltl], g_ref: GoalSet, trace: Option<&[State]>) -> (GoalSet, GoalSet) {
    let g_true = match trace {
        Some(t) => GoalSet::from_indices(g_ref.iter().filter(|&i| goals[i].evaluate(t, 0))),
        None => GoalSet::EMPTY,
    };
    (g_true, g_ref.difference(g_true))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EfccError {
    #[error("{qtype} is not a question for the explanation framework")]
    NotAQuery { qtype: QuestionType },
    #[error("{qtype} cannot be asked on a {} step", if *solvable { "solvable" } else { "unsolvable" })]
    WrongSolvability { qtype: QuestionType, solvable: bool },
    #[error("{qtype} takes no arguments")]
    UnexpectedArgs { qtype: QuestionType },
    #[error("{qtype} needs at least one argument")]
    EmptyArgs { qtype: QuestionType },
    #[error("arguments must be unsatisfied reference goals")]
    ArgsNotUnsatisfied,
    #[error("conflict data does not cover the reference goals")]
    UncoveredUniverse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationSet {
    pub qtype: QuestionType,
    pub family: Vec<GoalSet>,
}

fn check(q: &Question, step: &StepView, data: &ConflictData) -> Result<(), EfccError> {
    if !step.g_ref.is_subset_of(data.full_set()) || !step.g_enf.is_subset_of(step.g_ref) {
        return Err(EfccError::UncoveredUniverse);
    }
    if q.qtype.is_unsolvable_type() {
        if step.solvable {
            return Err(EfccError::WrongSolvability {
                qtype: q.qtype,
                solvable: true,
            });
        }
        if !q.args.is_empty() {
            return Err(EfccError::UnexpectedArgs { qtype: q.qtype });
        }
    } else if q.qtype.is_solvable_type() {
        if !step.solvable {
            return Err(EfccError::WrongSolvability {
                qtype: q.qtype,
                solvable: false,
            });
        }
        if q.args.is_empty() {
            return Err(EfccError::EmptyArgs { qtype: q.qtype });
        }
        if !q.args.is_subset_of(step.g_false()) {
            return Err(EfccError::ArgsNotUnsatisfied);
        }
    } else {
        return Err(EfccError::NotAQuery { qtype: q.qtype });
    }
    Ok(())
}

/// Families a question is answered from: `MUS/MCS(G_enf)` for unsolvable
/// steps and `MUS/MCS(G_ref)` otherwise. MCS are the literal hitting-set dual
/// (`{∅}` for a solvable universe).
pub fn families_for(q: &Question, step: &StepView, data: &ConflictData) -> (Vec<GoalSet>, Vec<GoalSet>) {
    let scope = if q.qtype.is_unsolvable_type() {
        step.g_enf
    } else {
        step.g_ref
    };
    let r = data.restrict(scope);
    let mcs = r.literal_mcs();
    (r.mus, mcs)
}

/// Applies the question's formula to the given families.
pub fn apply_formula(q: &Question, step: &StepView, mus: &[GoalSet], mcs: &[GoalSet]) -> Vec<GoalSet> {
    match q.qtype {
        QuestionType::UsWhy => min_subsets(mus),
        QuestionType::UsHow => min_subsets(mcs),
        QuestionType::SWhyNot | QuestionType::SWhatIf | QuestionType::SCan => {
            let allowed = step.g_true.union(q.args);
            let shifted: Vec<GoalSet> = mus
                .iter()
                .filter(|c| c.is_subset_of(allowed))
                .map(|c| c.difference(q.args))
                .collect();
            min_subsets(&shifted)
        }
        QuestionType::SHow => {
            let g_false = step.g_false();
            let shifted: Vec<GoalSet> = mcs
                .iter()
                .filter(|c| !c.intersects(q.args))
                .map(|c| c.difference(g_false))
                .collect();
            min_subsets(&shifted)
        }
        QuestionType::Direct | QuestionType::FollowUp => Vec::new(),
    }
}

/// The explanation set for `q` on `step`, with no selection or truncation.
pub fn answer(q: &Question, step: &StepView, data: &ConflictData) -> Result<ExplanationSet, EfccError> {
    check(q, step, data)?;
    let (mus, mcs) = families_for(q, step, data);
    Ok(ExplanationSet {
        qtype: q.qtype,
        family: apply_formula(q, step, &mus, &mcs),
    })
}

/// Which sample sentence answers a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    UnsolvableBecause,
    ForegoToRestore,
    SatisfiableWithoutSacrifice,
    CannotBeSatisfiedTogether,
    ConflictsWith,
    WouldBeUnsolvable,
    CouldNoLongerSatisfy,
    Possible,
    NotPossible,
    ForegoOneOf,
}

pub fn classify_answer_branch(qtype: QuestionType, family: &[GoalSet]) -> Branch {
    let empty = family.is_empty();
    let has_empty = family.contains(&GoalSet::EMPTY);
    match qtype {
        QuestionType::UsWhy => Branch::UnsolvableBecause,
        QuestionType::UsHow => Branch::ForegoToRestore,
        QuestionType::SWhyNot if empty => Branch::SatisfiableWithoutSacrifice,
        QuestionType::SWhyNot if has_empty => Branch::CannotBeSatisfiedTogether,
        QuestionType::SWhyNot => Branch::ConflictsWith,
        QuestionType::SWhatIf if empty => Branch::SatisfiableWithoutSacrifice,
        QuestionType::SWhatIf if has_empty => Branch::WouldBeUnsolvable,
        QuestionType::SWhatIf => Branch::CouldNoLongerSatisfy,
        QuestionType::SCan if empty => Branch::Possible,
        QuestionType::SCan => Branch::NotPossible,
        QuestionType::SHow if has_empty => Branch::SatisfiableWithoutSacrifice,
        QuestionType::SHow if empty => Branch::NotPossible,
        QuestionType::SHow => Branch::ForegoOneOf,
        QuestionType::Direct | QuestionType::FollowUp => Branch::Possible,
    }
}

/// `a`, `a and b`, `a, b and c`.
pub fn join_names(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// `{a, b}, {c}`
pub fn render_family(family: &[GoalSet], name: &dyn Fn(usize) -> String) -> String {
    family
        .iter()
        .map(|s| format!("{{{}}}", s.iter().map(name).collect::<Vec<_>>().join(", ")))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The sample answer sentence for a family.
pub fn sample_answer(qtype: QuestionType, args: GoalSet, family: &[GoalSet], name: &dyn Fn(usize) -> String) -> String {
    let a = join_names(&args.iter().map(name).collect::<Vec<_>>());
    let e = render_family(family, name);
    match classify_answer_branch(qtype, family) {
        Branch::UnsolvableBecause => {
            format!("The task is unsolvable because it is not possible to satisfy any of the conflicts: {e}.")
        }
        Branch::ForegoToRestore => {
            format!("To make the task solvable you have to forego one of the goal sets: {e}.")
        }
        Branch::SatisfiableWithoutSacrifice => match qtype {
            QuestionType::SWhyNot => {
                format!("{a} can be satisfied without foregoing any of the already satisfied goals.")
            }
            QuestionType::SWhatIf => format!("{a} can be satisfied without foregoing any goal satisfied by the plan."),
            _ => format!("{a} can be satisfied without foregoing any goals satisfied by the plan."),
        },
        Branch::CannotBeSatisfiedTogether => format!("The goals {a} cannot be satisfied together."),
        Branch::ConflictsWith => format!("There is a conflict between {a} and all the goal subsets: {e}."),
        Branch::WouldBeUnsolvable => "Then the problem would be unsolvable.".to_string(),
        Branch::CouldNoLongerSatisfy => format!("You could no longer satisfy any of the goal sets: {e}."),
        Branch::Possible => format!("{a} can be satisfied."),
        Branch::NotPossible => "It is not possible.".to_string(),
        Branch::ForegoOneOf => format!("You have to forego one of the goal sets: {e}."),
    }
}

/// A question with its answer plus the conflicts and corrections a follow-up
/// question may need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationBundle {
    pub step_id: String,
    pub question: Question,
    pub answer: ExplanationSet,
    pub branch: Branch,
    pub conflicts: Vec<GoalSet>,
    pub corrections: Vec<GoalSet>,
    pub step: StepView,
}

/// Answers `q` and attaches context. On unsolvable steps the full `G_enf`
/// families are kept. On solvable steps conflicts are those touching
/// `args ∪ G_false`; all corrections are kept, since `S-HOW` answers may
/// consist of satisfied goals only.
pub fn bundle(
    step_id: &str,
    q: &Question,
    step: &StepView,
    data: &ConflictData,
) -> Result<ExplanationBundle, EfccError> {
    let answer = answer(q, step, data)?;
    let (mus, mcs) = families_for(q, step, data);
    let conflicts = if step.solvable {
        let focus = q.args.union(step.g_false());
        mus.into_iter().filter(|c| c.intersects(focus)).collect()
    } else {
        mus
    };
    Ok(ExplanationBundle {
        step_id: step_id.to_string(),
        question: *q,
        branch: classify_answer_branch(q.qtype, &answer.family),
        answer,
        conflicts,
        corrections: mcs,
        step: *step,
    })
}

/// Wire form of a bundle with goal names in place of indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BundleJson {
    pub step_id: String,
    pub question_type: QuestionType,
    pub question_arguments: Vec<String>,
    pub answer: Vec<Vec<String>>,
    pub branch: Branch,
    pub conflicts: Vec<Vec<String>>,
    pub resolutions: Vec<Vec<String>>,
    pub enforced_goals: Vec<String>,
    pub satisfied_goals: Vec<String>,
    pub unsatisfied_goals: Vec<String>,
    pub solvable: bool,
}

impl ExplanationBundle {
    pub fn to_wire(&self, name: &dyn Fn(usize) -> String) -> BundleJson {
        let set = |s: GoalSet| s.iter().map(name).collect::<Vec<_>>();
        let fam = |f: &[GoalSet]| f.iter().map(|s| set(*s)).collect::<Vec<_>>();
        BundleJson {
            step_id: self.step_id.clone(),
            question_type: self.question.qtype,
            question_arguments: set(self.question.args),
            answer: fam(&self.answer.family),
            branch: self.branch,
            conflicts: fam(&self.conflicts),
            resolutions: fam(&self.corrections),
            enforced_goals: set(self.step.g_enf),
            satisfied_goals: set(self.step.g_true),
            unsatisfied_goals: set(self.step.g_false()),
            solvable: self.step.solvable,
        }
    }

    pub fn sample_answer(&self, name: &dyn Fn(usize) -> String) -> String {
        sample_answer(self.question.qtype, self.question.args, &self.answer.family, name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflicts::enumerate_exhaustive;
    use crate::planner::{Oracle, ResourceExhausted};

    // S=0, C=1, M=2; C and M conflict.
    struct Running;
    impl Oracle for Running {
        fn universe_size(&self) -> usize {
            3
        }
        fn is_solvable(&self, s: GoalSet) -> Result<bool, ResourceExhausted> {
            Ok(!(s.contains(1) && s.contains(2)))
        }
    }

    fn data() -> ConflictData {
        enumerate_exhaustive(&Running, vec!["S".into(), "C".into(), "M".into()]).unwrap()
    }

    fn s(ix: &[usize]) -> GoalSet {
        GoalSet::from_indices(ix.iter().copied())
    }

    fn sm_step() -> StepView {
        StepView {
            g_ref: s(&[0, 1, 2]),
            g_enf: s(&[0, 2]),
            solvable: true,
            g_true: s(&[0, 2]),
        }
    }

    fn name(i: usize) -> String {
        ["shopping", "cook dinner", "sports match"][i].to_string()
    }

    #[test]
    fn s_how_cancels_the_match() {
        let q = Question {
            qtype: QuestionType::SHow,
            args: s(&[1]),
        };
        let a = answer(&q, &sm_step(), &data()).unwrap();
        assert_eq!(a.family, vec![s(&[2])]);
        assert_eq!(classify_answer_branch(q.qtype, &a.family), Branch::ForegoOneOf);
        assert_eq!(
            sample_answer(q.qtype, q.args, &a.family, &name),
            "You have to forego one of the goal sets: {sports match}."
        );
    }

    #[test]
    fn s_why_not_names_the_conflicting_goal() {
        let q = Question {
            qtype: QuestionType::SWhyNot,
            args: s(&[1]),
        };
        assert_eq!(answer(&q, &sm_step(), &data()).unwrap().family, vec![s(&[2])]);
    }

    #[test]
    fn unsolvable_step_questions() {
        let step = StepView {
            g_ref: s(&[0, 1, 2]),
            g_enf: s(&[1, 2]),
            solvable: false,
            g_true: GoalSet::EMPTY,
        };
        let why = Question {
            qtype: QuestionType::UsWhy,
            args: GoalSet::EMPTY,
        };
        let how = Question {
            qtype: QuestionType::UsHow,
            args: GoalSet::EMPTY,
        };
        assert_eq!(answer(&why, &step, &data()).unwrap().family, vec![s(&[1, 2])]);
        let h = answer(&how, &step, &data()).unwrap();
        assert_eq!(h.family, vec![s(&[1]), s(&[2])]);
        assert_eq!(
            sample_answer(how.qtype, how.args, &h.family, &name),
            "To make the task solvable you have to forego one of the goal sets: {cook dinner}, {sports match}."
        );
        let b = bundle("st", &why, &step, &data()).unwrap();
        assert_eq!(b.corrections, vec![s(&[1]), s(&[2])]);
    }

    #[test]
    fn guards() {
        let step = sm_step();
        let d = data();
        let bad = |qtype, args| answer(&Question { qtype, args }, &step, &d).unwrap_err();
        assert!(matches!(
            bad(QuestionType::UsWhy, GoalSet::EMPTY),
            EfccError::WrongSolvability { .. }
        ));
        assert!(matches!(
            bad(QuestionType::SCan, GoalSet::EMPTY),
            EfccError::EmptyArgs { .. }
        ));
        assert_eq!(bad(QuestionType::SCan, s(&[0])), EfccError::ArgsNotUnsatisfied);
        assert!(matches!(
            bad(QuestionType::Direct, GoalSet::EMPTY),
            EfccError::NotAQuery { .. }
        ));
    }

    #[test]
    fn s_can_on_conflict_free_goal() {
        // Plan satisfies only S; C alone does not clash with S.
        let step = StepView {
            g_ref: s(&[0, 1, 2]),
            g_enf: s(&[0]),
            solvable: true,
            g_true: s(&[0]),
        };
        let q = Question {
            qtype: QuestionType::SCan,
            args: s(&[1]),
        };
        let b = bundle("st", &q, &step, &data()).unwrap();
        assert!(b.answer.family.is_empty());
        assert_eq!(b.sample_answer(&name), "cook dinner can be satisfied.");
        // Asking for both C and M at once hits their mutual conflict.
        let q = Question {
            qtype: QuestionType::SWhatIf,
            args: s(&[1, 2]),
        };
        let a = answer(&q, &step, &data()).unwrap();
        assert_eq!(a.family, vec![GoalSet::EMPTY]);
        assert_eq!(
            sample_answer(q.qtype, q.args, &a.family, &name),
            "Then the problem would be unsolvable."
        );
    }

    #[test]
    fn labels_round_trip() {
        for q in QuestionType::SOLVABLE.iter().chain(&QuestionType::UNSOLVABLE) {
            assert_eq!(QuestionType::from_label(q.label()), Some(*q));
            assert_eq!(serde_json::to_value(q).unwrap(), serde_json::json!(q.label()));
        }
        assert_eq!(QuestionType::from_label("s_why_not"), Some(QuestionType::SWhyNot));
    }
}
