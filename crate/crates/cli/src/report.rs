//! Stable, id-ordered renderings of conflicts, plans and answers.

use goalscope_core::conflicts::ConflictData;
use goalscope_core::goalset::GoalSet;
use goalscope_core::session::{IterationStep, Project, StepStatus};
use serde::Serialize;

/// Conflict families with goals sorted by id inside each set and sets sorted
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConflictReport {
    pub universe: Vec<String>,
    pub mus: Vec<Vec<String>>,
    pub mcs: Vec<Vec<String>>,
    pub fully_solvable: bool,
    pub incomplete: bool,
    pub oracle_calls: u64,
    pub max_utility: u64,
    /// Cheapest corrections: the goals an optimal plan drops.
    pub optimal_drops: Vec<Vec<String>>,
}

fn sorted_family(data: &ConflictData, family: &[GoalSet]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = family
        .iter()
        .map(|s| {
            let mut names = data.names(*s);
            names.sort();
            names
        })
        .collect();
    out.sort();
    out
}

impl ConflictReport {
    /// `data` must range over goals of `project`.
    pub fn new(project: &Project, data: &ConflictData) -> ConflictReport {
        let utilities: Vec<u64> = data
            .universe
            .iter()
            .map(|id| project.goal(id).map_or(0, |g| g.utility))
            .collect();
        let (_, drops) = data.cheapest_corrections(&utilities);
        let mut universe = data.universe.clone();
        universe.sort();
        ConflictReport {
            universe,
            mus: sorted_family(data, &data.mus),
            mcs: sorted_family(data, &data.mcs),
            fully_solvable: data.fully_solvable,
            incomplete: data.incomplete,
            oracle_calls: data.oracle_calls,
            max_utility: data.max_utility(&utilities),
            optimal_drops: sorted_family(data, &drops),
        }
    }

    pub fn headline(&self) -> String {
        format!(
            "{} MUS, {} MCS, max utility {}{}",
            self.mus.len(),
            self.mcs.len(),
            self.max_utility,
            if self.incomplete { " (incomplete)" } else { "" }
        )
    }

    pub fn table(&self) -> String {
        let mut out = vec![self.headline()];
        let set = |s: &Vec<String>| format!("  {{{}}}", s.join(", "));
        out.push(format!("MUS ({}):", self.mus.len()));
        out.extend(self.mus.iter().map(set));
        out.push(format!("MCS ({}):", self.mcs.len()));
        out.extend(self.mcs.iter().map(set));
        out.push("optimal plans drop:".into());
        out.extend(self.optimal_drops.iter().map(set));
        out.join("\n")
    }
}

fn sorted(ids: &[String]) -> Vec<String> {
    let mut v = ids.to_vec();
    v.sort();
    v
}

pub fn step_table(step: &IterationStep) -> String {
    let mut out = vec![match step.status {
        StepStatus::Solvable => format!("solvable, utility {}", step.utility),
        other => format!("{other:?}").to_lowercase(),
    }];
    out.push(format!("enforced: {}", sorted(&step.g_enf).join(", ")));
    if step.status == StepStatus::Solvable {
        out.push(format!("satisfied: {}", sorted(&step.g_true).join(", ")));
        out.push(format!("unsatisfied: {}", sorted(&step.g_false).join(", ")));
    }
    if let Some(plan) = &step.plan {
        out.push(format!("plan ({} actions):", plan.len()));
        out.extend(plan.iter().enumerate().map(|(i, a)| format!("  {:>3}. {a}", i + 1)));
    }
    if let Some(e) = &step.error {
        out.push(format!("error: {e}"));
    }
    out.join("\n")
}
