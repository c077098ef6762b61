//! Deterministic translators: a question menu, sentence templates and
//! suggestions drawn from the menu.

use goalscope_core::efcc::{join_names, BundleJson, ExplanationBundle, Question, QuestionType, StepView};
use goalscope_core::goalset::{canonicalize, GoalSet};
use goalscope_core::session::{IterationStep, Project, SessionError, StepStatus};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MenuEntry {
    pub label: String,
    pub question_type: QuestionType,
    pub args: Vec<String>,
}

/// The question sentence for a type, arguments given by short name.
pub fn question_text(qtype: QuestionType, arg_names: &[String]) -> String {
    qtype.template().replace("{args}", &join_names(arg_names))
}

/// Every question valid on the step: the two unsolvability questions, or
/// the four solvable-step questions per unsatisfied reference goal.
pub fn question_menu(project: &Project, step: &IterationStep) -> Result<Vec<MenuEntry>, SessionError> {
    let view = project.step_view(step)?;
    if step.status == StepStatus::Failed {
        return Ok(Vec::new());
    }
    if !view.solvable {
        return Ok(QuestionType::UNSOLVABLE
            .into_iter()
            .map(|q| MenuEntry {
                label: question_text(q, &[]),
                question_type: q,
                args: Vec::new(),
            })
            .collect());
    }
    Ok(view
        .g_false()
        .iter()
        .flat_map(|i| {
            let id = project.goals()[i].id.clone();
            let name = project.short_name(i);
            QuestionType::SOLVABLE.into_iter().map(move |q| MenuEntry {
                label: question_text(q, std::slice::from_ref(&name)),
                question_type: q,
                args: vec![id.clone()],
            })
        })
        .collect())
}

pub const ENFORCE_MORE: &str = "Can I enforce any other goals without creating new conflicts?";

/// One to three menu questions. Unsolvable steps get both unsolvability
/// questions; solvable steps cycle question types over unsatisfied goals.
pub fn suggestions(project: &Project, step: &IterationStep) -> Result<Vec<String>, SessionError> {
    let menu = question_menu(project, step)?;
    let view = project.step_view(step)?;
    if !view.solvable {
        return Ok(menu.into_iter().map(|e| e.label).collect());
    }
    let unsatisfied: Vec<usize> = view.g_false().iter().collect();
    if unsatisfied.is_empty() {
        return Ok(vec![ENFORCE_MORE.to_string()]);
    }
    let k = (QuestionType::SOLVABLE.len() * unsatisfied.len()).min(3);
    Ok((0..k)
        .map(|j| {
            let q = QuestionType::SOLVABLE[j % QuestionType::SOLVABLE.len()];
            let g = unsatisfied[j % unsatisfied.len()];
            question_text(q, &[project.short_name(g)])
        })
        .collect())
}

/// A question answered by the explanation framework. Multi-goal questions
/// are split into one request per goal; goals the plan already satisfies
/// need no request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation {
    pub step_id: String,
    pub question_type: QuestionType,
    pub args: GoalSet,
    pub view: StepView,
    pub parts: Vec<ExplanationBundle>,
    pub already_satisfied: GoalSet,
}

impl Explanation {
    pub fn compute(
        project: &Project,
        step_id: &str,
        qtype: QuestionType,
        args: GoalSet,
    ) -> Result<Explanation, SessionError> {
        let step = project
            .step(step_id)
            .ok_or_else(|| SessionError::UnknownStep(step_id.to_string()))?;
        let view = project.step_view_with(step, args)?;
        let mut parts = Vec::new();
        let mut already_satisfied = GoalSet::EMPTY;
        if qtype.is_solvable_type() && view.solvable {
            for i in args.iter() {
                if view.g_true.contains(i) {
                    already_satisfied = already_satisfied.with(i);
                } else {
                    let q = Question {
                        qtype,
                        args: GoalSet::singleton(i),
                    };
                    parts.push(project.ask_view(step_id, &view, &q)?);
                }
            }
            if parts.is_empty() && already_satisfied.is_empty() {
                // No argument at all: let the framework report it.
                parts.push(project.ask_view(step_id, &view, &Question { qtype, args })?);
            }
        } else {
            parts.push(project.ask_view(step_id, &view, &Question { qtype, args })?);
        }
        Ok(Explanation {
            step_id: step_id.to_string(),
            question_type: qtype,
            args,
            view,
            parts,
            already_satisfied,
        })
    }

    /// Union of the parts' conflicts, canonically ordered.
    pub fn conflicts(&self) -> Vec<GoalSet> {
        let mut all: Vec<GoalSet> = self.parts.iter().flat_map(|b| b.conflicts.iter().copied()).collect();
        canonicalize(&mut all);
        all
    }

    /// Union of the parts' corrections, canonically ordered.
    pub fn resolutions(&self) -> Vec<GoalSet> {
        let mut all: Vec<GoalSet> = self.parts.iter().flat_map(|b| b.corrections.iter().copied()).collect();
        canonicalize(&mut all);
        all
    }

    pub fn to_wire(&self, project: &Project) -> Vec<BundleJson> {
        let name = |i: usize| project.goals()[i].id.clone();
        self.parts.iter().map(|b| b.to_wire(&name)).collect()
    }
}

/// Sample sentence per part, in argument order, listing whole families.
pub fn explain(project: &Project, e: &Explanation) -> String {
    let name = |i: usize| project.short_name(i);
    let mut lines: Vec<String> = e.parts.iter().map(|b| b.sample_answer(&name)).collect();
    if !e.already_satisfied.is_empty() {
        let names: Vec<String> = e.already_satisfied.iter().map(name).collect();
        let verb = if names.len() == 1 { "is" } else { "are" };
        lines.push(format!(
            "{} {verb} already satisfied by the current plan.",
            join_names(&names)
        ));
    }
    lines.join("\n")
}
