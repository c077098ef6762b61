//! Request and response payloads.

use goalscope_agents::template::MenuEntry;
use goalscope_core::session::{GoalRecord, IterationStep, Mode, StepStatus};
use goalscope_core::templates::GoalTemplate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agents {
    /// Question menu and sentence templates.
    #[default]
    Template,
    /// Language-model translators.
    Llm,
}

/// Per-project switches, fixed at creation. Study setups hide plans and run
/// a timer; demo mode freezes the goal set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Settings {
    pub hide_plans: bool,
    pub timer_secs: Option<u64>,
    pub agents: Option<Agents>,
    pub goal_translator: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreateProject {
    pub name: Option<String>,
    /// A bundled task; replaces domain, problem, goals and templates.
    pub fixture: Option<String>,
    pub domain: Option<String>,
    pub problem: Option<String>,
    #[serde(default)]
    pub goals: Vec<GoalRecord>,
    #[serde(default)]
    pub templates: Vec<GoalTemplate>,
    pub mode: Option<Mode>,
    #[serde(default)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CreateGoal {
    Template {
        template: String,
        binding: BTreeMap<String, String>,
        #[serde(default)]
        utility: u64,
    },
    Description {
        description: String,
        #[serde(default)]
        utility: u64,
    },
    Formula {
        id: String,
        #[serde(rename = "shortName")]
        short_name: String,
        formula: String,
        #[serde(default)]
        utility: u64,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct PatchGoal {
    pub locked: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreateStep {
    /// Enforced goal ids; taken from the parent when forking.
    pub g_enf: Option<Vec<String>>,
    pub g_ref: Option<Vec<String>>,
    pub name: Option<String>,
    /// Step to fork from.
    pub fork: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    Plan,
    Conflicts,
    DemoPrecompute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_final(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub project_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_id: Option<String>,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepView {
    pub id: String,
    pub project_id: String,
    pub name: String,
    pub status: StepStatus,
    pub g_enf: Vec<String>,
    pub g_ref: Vec<String>,
    pub g_true: Vec<String>,
    pub g_false: Vec<String>,
    /// Absent while pending, for unsolvable steps and when plans are hidden.
    pub plan: Option<Vec<String>>,
    pub plan_hidden: bool,
    pub utility: u64,
    pub parent: Option<String>,
    pub error: Option<String>,
    /// The planning job while the step is pending.
    pub job: Option<String>,
}

impl StepView {
    pub fn new(project_id: &str, s: &IterationStep, settings: &Settings, job: Option<String>) -> StepView {
        StepView {
            id: s.id.clone(),
            project_id: project_id.to_string(),
            name: s.name.clone(),
            status: s.status,
            g_enf: s.g_enf.clone(),
            g_ref: s.g_ref.clone(),
            g_true: s.g_true.clone(),
            g_false: s.g_false.clone(),
            plan: if settings.hide_plans { None } else { s.plan.clone() },
            plan_hidden: settings.hide_plans,
            utility: if s.status == StepStatus::Solvable { s.utility } else { 0 },
            parent: s.parent.clone(),
            error: s.error.clone(),
            job: if s.is_pending() { job } else { None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DemoView {
    pub status: Option<JobStatus>,
    pub job: Option<String>,
    pub max_utility: Option<u64>,
    pub conflicts: Option<usize>,
    pub corrections: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProjectView {
    pub id: String,
    pub name: String,
    pub mode: Mode,
    pub agents: Agents,
    pub goal_translator: bool,
    pub settings: Settings,
    pub created_ms: u64,
    pub goals: Vec<GoalRecord>,
    pub templates: Vec<TemplateView>,
    pub steps: Vec<StepView>,
    pub best_utility: u64,
    /// Highest achievable utility, once the demo artifact exists.
    pub max_utility: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TemplateView {
    #[serde(flatten)]
    pub template: GoalTemplate,
    /// Objects allowed per parameter.
    pub candidates: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Menu {
    pub entries: Vec<MenuEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestions {
    pub questions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Accepted<T> {
    #[serde(flatten)]
    pub body: T,
    pub job: Job,
}

/// Server-sent event payloads; the event name is the `type` field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", rename_all_fields = "camelCase")]
pub enum Event {
    Job { project_id: String, job: Job },
    StepResolved { project_id: String, step: StepView },
    DemoReady { project_id: String, max_utility: u64 },
    GoalAdded { project_id: String, goal: GoalRecord },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Job { .. } => "job",
            Event::StepResolved { .. } => "step-resolved",
            Event::DemoReady { .. } => "demo-ready",
            Event::GoalAdded { .. } => "goal-added",
        }
    }

    pub fn project_id(&self) -> &str {
        match self {
            Event::Job { project_id, .. }
            | Event::StepResolved { project_id, .. }
            | Event::DemoReady { project_id, .. }
            | Event::GoalAdded { project_id, .. } => project_id,
        }
    }
}
