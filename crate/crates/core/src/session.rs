//! Projects, goal registries and iteration steps.

use crate::conflicts::{enumerate_exhaustive, enumerate_marco, ConflictData, ConflictError};
use crate::efcc::{self, EfccError, ExplanationBundle, Question, QuestionType, StepView};
use crate::goalset::{GoalSet, MAX_GOALS};
use crate::ltlf::{parse_ltlf, GoalSource, Ltl, LtlError};
use crate::model::{ground, parse_domain, parse_problem, GroundTask, PddlError, Plan, Trace};
use crate::planner::{Limits, Oracle, PlanningOracle, ResourceExhausted, SolveOutcome};
use crate::templates::{GoalTemplate, TemplateError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("domain: {0}")]
    Domain(PddlError),
    #[error("problem: {0}")]
    Problem(PddlError),
    #[error("goal `{id}`: {source}")]
    Goal { id: String, source: LtlError },
    #[error("goals file: {0}")]
    GoalsFile(String),
    #[error("duplicate goal id `{0}`")]
    DuplicateGoal(String),
    #[error("unknown goal `{0}`")]
    UnknownGoal(String),
    #[error("unknown step `{0}`")]
    UnknownStep(String),
    #[error("at least one goal must be enforced")]
    EmptyEnforcement,
    #[error("enforced goal `{0}` is not a reference goal")]
    EnforcedNotReferenced(String),
    #[error("step `{0}` is still pending")]
    StepPending(String),
    #[error("step `{0}` is already resolved")]
    StepResolved(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("the goal set of a demo project is frozen")]
    FrozenGoals,
    #[error("too many goals (limit {MAX_GOALS})")]
    TooManyGoals,
    #[error(transparent)]
    Conflicts(#[from] ConflictError),
    #[error(transparent)]
    Exhausted(#[from] ResourceExhausted),
    #[error(transparent)]
    Efcc(#[from] EfccError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// A named goal with its utility. Atomic formulas are goals on the final
/// state; anything else is an LTLf formula over the whole trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalRecord {
    pub id: String,
    pub short_name: String,
    pub formula: String,
    #[serde(default)]
    pub utility: u64,
    #[serde(default)]
    pub locked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon: Option<String>,
    #[serde(default)]
    pub source: GoalSource,
}

impl GoalRecord {
    pub fn new(id: &str, short_name: &str, formula: &str, utility: u64) -> Self {
        GoalRecord {
            id: id.to_string(),
            short_name: short_name.to_string(),
            formula: formula.to_string(),
            utility,
            locked: false,
            color: None,
            icon: None,
            source: GoalSource::Template,
        }
    }
}

/// Parses a goal formula; a lone atom becomes "holds at the end".
pub fn compile_goal(formula: &str, task: &GroundTask) -> Result<Ltl, LtlError> {
    let f = parse_ltlf(formula, task)?;
    Ok(match f {
        Ltl::Atom(_) => Ltl::at_end(f),
        other => other,
    })
}

/// Parses a goals file: a JSON array of goal records.
pub fn parse_goals(text: &str) -> Result<Vec<GoalRecord>, SessionError> {
    serde_json::from_str(text).map_err(|e| SessionError::GoalsFile(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Free,
    Demo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Pending,
    Solvable,
    Unsolvable,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationStep {
    pub id: String,
    pub name: String,
    pub g_ref: Vec<String>,
    pub g_enf: Vec<String>,
    pub status: StepStatus,
    /// Action names, present iff solvable.
    pub plan: Option<Vec<String>>,
    pub g_true: Vec<String>,
    pub g_false: Vec<String>,
    pub utility: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl IterationStep {
    pub fn is_pending(&self) -> bool {
        self.status == StepStatus::Pending
    }
}

/// Outcome of planning a step, computed off the project lock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepResult {
    pub step_id: String,
    pub status: StepStatus,
    pub plan: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DemoData {
    pub conflicts: ConflictData,
    pub max_utility: u64,
}

/// Persistent form of a project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProjectDoc {
    pub id: String,
    pub name: String,
    pub domain: String,
    pub problem: String,
    pub mode: Mode,
    pub goal_translator: bool,
    pub goals: Vec<GoalRecord>,
    pub steps: Vec<IterationStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<DemoData>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub templates: Vec<GoalTemplate>,
}

/// Solvability oracle over a sub-universe of another oracle's goals.
pub struct SubOracle<'a> {
    inner: &'a dyn Oracle,
    map: Vec<usize>,
}

impl<'a> SubOracle<'a> {
    pub fn new(inner: &'a dyn Oracle, map: Vec<usize>) -> Self {
        SubOracle { inner, map }
    }
}

impl Oracle for SubOracle<'_> {
    fn universe_size(&self) -> usize {
        self.map.len()
    }

    fn is_solvable(&self, set: GoalSet) -> Result<bool, ResourceExhausted> {
        self.inner
            .is_solvable(GoalSet::from_indices(set.iter().map(|i| self.map[i])))
    }
}

/// Planning for one step, runnable without access to the project.
#[derive(Clone)]
pub struct PlanJob {
    pub step_id: String,
    pub enf: GoalSet,
    oracle: Arc<PlanningOracle>,
    task: Arc<GroundTask>,
}

impl PlanJob {
    pub fn run(&self) -> StepResult {
        let (status, plan, error) = match self.oracle.plan(self.enf) {
            Ok(SolveOutcome::Plan(plan)) => (StepStatus::Solvable, Some(plan.names(&self.task)), None),
            Ok(SolveOutcome::Unsolvable) => (StepStatus::Unsolvable, None, None),
            Err(e) => (StepStatus::Failed, None, Some(e.to_string())),
        };
        StepResult {
            step_id: self.step_id.clone(),
            status,
            plan,
            error,
        }
    }
}

/// Conflict enumeration over the whole registry, detached from the project.
#[derive(Clone)]
pub struct DemoJob {
    names: Vec<String>,
    utilities: Vec<u64>,
    oracle: Arc<PlanningOracle>,
}

impl DemoJob {
    pub fn run(&self) -> Result<DemoData, SessionError> {
        let conflicts = if self.names.len() <= EXHAUSTIVE_UP_TO {
            enumerate_exhaustive(self.oracle.as_ref(), self.names.clone())?
        } else {
            enumerate_marco(self.oracle.as_ref(), self.names.clone())?
        };
        Ok(DemoData {
            max_utility: conflicts.max_utility(&self.utilities),
            conflicts,
        })
    }
}

/// Conflict enumeration over one reference set, detached from the project.
#[derive(Clone)]
pub struct ConflictJob {
    pub reference: GoalSet,
    universe: Vec<String>,
    oracle: Arc<PlanningOracle>,
}

impl ConflictJob {
    pub fn run(&self) -> Result<ConflictData, SessionError> {
        let map: Vec<usize> = self.reference.iter().collect();
        let sub = SubOracle::new(self.oracle.as_ref(), map.clone());
        let names: Vec<String> = map.iter().map(|&i| self.universe[i].clone()).collect();
        let local = if map.len() <= EXHAUSTIVE_UP_TO {
            enumerate_exhaustive(&sub, names)?
        } else {
            enumerate_marco(&sub, names)?
        };
        let lift = |s: &GoalSet| GoalSet::from_indices(s.iter().map(|i| map[i]));
        Ok(ConflictData {
            universe: self.universe.clone(),
            mus: local.mus.iter().map(lift).collect(),
            mcs: local.mcs.iter().map(lift).collect(),
            fully_solvable: local.fully_solvable,
            incomplete: local.incomplete,
            oracle_calls: local.oracle_calls,
        })
    }
}

/// Reference sets up to this size are enumerated over the whole lattice;
/// larger ones go through dualize-and-advance.
pub const EXHAUSTIVE_UP_TO: usize = 12;

pub struct Project {
    pub id: String,
    pub name: String,
    pub domain_text: String,
    pub problem_text: String,
    pub mode: Mode,
    /// Whether free-text goals may be translated into new goals.
    pub goal_translator: bool,
    pub task: Arc<GroundTask>,
    goals: Vec<GoalRecord>,
    formulas: Vec<Ltl>,
    steps: Vec<IterationStep>,
    demo: Option<DemoData>,
    templates: Vec<GoalTemplate>,
    limits: Limits,
    oracle: Arc<PlanningOracle>,
    /// Conflict data per reference set, in registry coordinates.
    conflict_cache: Mutex<HashMap<GoalSet, Arc<ConflictData>>>,
}

impl Project {
    pub fn new(
        id: &str,
        name: &str,
        domain: &str,
        problem: &str,
        goals: Vec<GoalRecord>,
        mode: Mode,
    ) -> Result<Project, SessionError> {
        let dom = parse_domain(domain).map_err(SessionError::Domain)?;
        let lifted = parse_problem(problem, &dom).map_err(SessionError::Problem)?;
        let task = Arc::new(ground(&lifted));
        let mut p = Project {
            id: id.to_string(),
            name: name.to_string(),
            domain_text: domain.to_string(),
            problem_text: problem.to_string(),
            mode,
            goal_translator: mode == Mode::Free,
            task: task.clone(),
            goals: Vec::new(),
            formulas: Vec::new(),
            steps: Vec::new(),
            demo: None,
            templates: Vec::new(),
            limits: Limits::default(),
            oracle: Arc::new(PlanningOracle::new(task, Vec::new(), Limits::default())),
            conflict_cache: Mutex::new(HashMap::new()),
        };
        for g in goals {
            p.push_goal(g)?;
        }
        p.rebuild_oracle();
        Ok(p)
    }

    pub fn from_doc(doc: ProjectDoc) -> Result<Project, SessionError> {
        let mut p = Project::new(&doc.id, &doc.name, &doc.domain, &doc.problem, doc.goals, doc.mode)?;
        p.goal_translator = doc.goal_translator;
        p.steps = doc.steps;
        p.demo = doc.demo;
        p.templates = doc.templates;
        Ok(p)
    }

    pub fn to_doc(&self) -> ProjectDoc {
        ProjectDoc {
            id: self.id.clone(),
            name: self.name.clone(),
            domain: self.domain_text.clone(),
            problem: self.problem_text.clone(),
            mode: self.mode,
            goal_translator: self.goal_translator,
            goals: self.goals.clone(),
            steps: self.steps.clone(),
            demo: self.demo.clone(),
            templates: self.templates.clone(),
        }
    }

    pub fn set_limits(&mut self, limits: Limits) {
        self.limits = limits;
        self.rebuild_oracle();
    }

    fn rebuild_oracle(&mut self) {
        self.oracle = Arc::new(PlanningOracle::new(
            self.task.clone(),
            self.formulas.clone(),
            self.limits,
        ));
        self.conflict_cache.lock().expect("conflict cache poisoned").clear();
    }

    fn push_goal(&mut self, g: GoalRecord) -> Result<(), SessionError> {
        if self.goals.len() >= MAX_GOALS {
            return Err(SessionError::TooManyGoals);
        }
        if self.goal_index(&g.id).is_some() {
            return Err(SessionError::DuplicateGoal(g.id));
        }
        let f = compile_goal(&g.formula, &self.task).map_err(|source| SessionError::Goal {
            id: g.id.clone(),
            source,
        })?;
        self.goals.push(g);
        self.formulas.push(f);
        Ok(())
    }

    /// Registers a goal. Demo projects are frozen.
    pub fn add_goal(&mut self, g: GoalRecord) -> Result<&GoalRecord, SessionError> {
        if self.mode == Mode::Demo {
            return Err(SessionError::FrozenGoals);
        }
        self.push_goal(g)?;
        // Existing verdicts stay valid: old sets never contain the new index.
        let (sol, unsol) = self.oracle.cache().snapshot();
        let fresh = PlanningOracle::new(self.task.clone(), self.formulas.clone(), self.limits);
        for s in sol {
            fresh.cache().record(s, true);
        }
        for u in unsol {
            fresh.cache().record(u, false);
        }
        self.oracle = Arc::new(fresh);
        Ok(self.goals.last().expect("just pushed"))
    }

    /// Locked goals are enforced in every later step. Demo projects are frozen.
    pub fn set_locked(&mut self, id: &str, locked: bool) -> Result<&GoalRecord, SessionError> {
        if self.mode == Mode::Demo {
            return Err(SessionError::FrozenGoals);
        }
        let i = self
            .goal_index(id)
            .ok_or_else(|| SessionError::UnknownGoal(id.to_string()))?;
        self.goals[i].locked = locked;
        Ok(&self.goals[i])
    }

    pub fn templates(&self) -> &[GoalTemplate] {
        &self.templates
    }

    pub fn set_templates(&mut self, templates: Vec<GoalTemplate>) {
        self.templates = templates;
    }

    /// Registers the goal a template yields for `binding`.
    pub fn instantiate_template(
        &mut self,
        template: &str,
        binding: &BTreeMap<String, String>,
        utility: u64,
    ) -> Result<&GoalRecord, SessionError> {
        let t = self
            .templates
            .iter()
            .find(|t| t.id == template)
            .ok_or_else(|| TemplateError::UnknownTemplate(template.to_string()))?;
        let inst = t.instantiate(&self.task, binding)?;
        self.add_goal(GoalRecord::new(&inst.id, &inst.short_name, &inst.formula_text, utility))
    }

    pub fn goals(&self) -> &[GoalRecord] {
        &self.goals
    }

    pub fn formulas(&self) -> &[Ltl] {
        &self.formulas
    }

    pub fn goal_index(&self, id: &str) -> Option<usize> {
        self.goals.iter().position(|g| g.id == id)
    }

    pub fn goal(&self, id: &str) -> Option<&GoalRecord> {
        self.goals.iter().find(|g| g.id == id)
    }

    /// Finds a goal by id or short name, ignoring case and surrounding space.
    pub fn resolve_goal_name(&self, name: &str) -> Option<&GoalRecord> {
        let n = name.trim().to_lowercase();
        self.goals
            .iter()
            .find(|g| g.id.to_lowercase() == n || g.short_name.to_lowercase() == n)
    }

    pub fn oracle(&self) -> &Arc<PlanningOracle> {
        &self.oracle
    }

    pub fn steps(&self) -> &[IterationStep] {
        &self.steps
    }

    pub fn step(&self, id: &str) -> Option<&IterationStep> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn demo(&self) -> Option<&DemoData> {
        self.demo.as_ref()
    }

    pub fn set_demo(&mut self, demo: DemoData) {
        self.demo = Some(demo);
    }

    /// Goal ids to a registry bitmask.
    pub fn set_of<S: AsRef<str>>(&self, ids: &[S]) -> Result<GoalSet, SessionError> {
        ids.iter().try_fold(GoalSet::EMPTY, |acc, id| {
            self.goal_index(id.as_ref())
                .map(|i| acc.with(i))
                .ok_or_else(|| SessionError::UnknownGoal(id.as_ref().to_string()))
        })
    }

    /// Registry bitmask to goal ids, in registry order.
    pub fn ids_of(&self, set: GoalSet) -> Vec<String> {
        set.iter().map(|i| self.goals[i].id.clone()).collect()
    }

    pub fn short_name(&self, i: usize) -> String {
        self.goals[i].short_name.clone()
    }

    fn locked(&self) -> GoalSet {
        GoalSet::from_indices((0..self.goals.len()).filter(|&i| self.goals[i].locked))
    }

    fn next_step_id(&self) -> String {
        format!("{}-s{}", self.id, self.steps.len() + 1)
    }

    /// Records a pending step. Locked goals are enforced automatically; in
    /// demo mode every goal is a reference goal.
    pub fn create_step<S: AsRef<str>>(
        &mut self,
        g_enf: &[S],
        g_ref: &[S],
        name: Option<&str>,
    ) -> Result<&IterationStep, SessionError> {
        self.create_step_from(g_enf, g_ref, name, None)
    }

    fn create_step_from<S: AsRef<str>>(
        &mut self,
        g_enf: &[S],
        g_ref: &[S],
        name: Option<&str>,
        parent: Option<String>,
    ) -> Result<&IterationStep, SessionError> {
        let enf = self.set_of(g_enf)?.union(self.locked());
        let reference = match self.mode {
            Mode::Demo => GoalSet::full(self.goals.len()),
            Mode::Free => self.set_of(g_ref)?.union(self.locked()),
        };
        if enf.is_empty() && self.mode == Mode::Free {
            return Err(SessionError::EmptyEnforcement);
        }
        if let Some(i) = enf.difference(reference).iter().next() {
            return Err(SessionError::EnforcedNotReferenced(self.goals[i].id.clone()));
        }
        let id = self.next_step_id();
        let step = IterationStep {
            name: name
                .map(str::to_string)
                .unwrap_or_else(|| format!("Step {}", self.steps.len() + 1)),
            id,
            g_ref: self.ids_of(reference),
            g_enf: self.ids_of(enf),
            status: StepStatus::Pending,
            plan: None,
            g_true: Vec::new(),
            g_false: Vec::new(),
            utility: 0,
            parent,
            error: None,
        };
        self.steps.push(step);
        Ok(self.steps.last().expect("just pushed"))
    }

    /// New pending step starting from `parent`'s goals, optionally replaced.
    pub fn fork(
        &mut self,
        parent: &str,
        g_enf: Option<Vec<String>>,
        g_ref: Option<Vec<String>>,
        name: Option<&str>,
    ) -> Result<&IterationStep, SessionError> {
        let p = self
            .step(parent)
            .ok_or_else(|| SessionError::UnknownStep(parent.to_string()))?;
        let enf = g_enf.unwrap_or_else(|| p.g_enf.clone());
        let reference = g_ref.unwrap_or_else(|| p.g_ref.clone());
        self.create_step_from(&enf, &reference, name, Some(parent.to_string()))
    }

    /// Plans a step without mutating the project.
    pub fn compute_step(&self, step_id: &str) -> Result<StepResult, SessionError> {
        Ok(self.plan_job(step_id)?.run())
    }

    /// Everything needed to plan a step, detached from the project.
    pub fn plan_job(&self, step_id: &str) -> Result<PlanJob, SessionError> {
        let step = self
            .step(step_id)
            .ok_or_else(|| SessionError::UnknownStep(step_id.to_string()))?;
        Ok(PlanJob {
            step_id: step_id.to_string(),
            enf: self.set_of(&step.g_enf)?,
            oracle: self.oracle.clone(),
            task: self.task.clone(),
        })
    }

    /// Applies a planning result to its pending step: the only mutation a
    /// step ever sees.
    pub fn resolve_step(&mut self, result: StepResult) -> Result<&IterationStep, SessionError> {
        let idx = self
            .steps
            .iter()
            .position(|s| s.id == result.step_id)
            .ok_or_else(|| SessionError::UnknownStep(result.step_id.clone()))?;
        if !self.steps[idx].is_pending() {
            return Err(SessionError::StepResolved(result.step_id));
        }
        let reference = self.set_of(&self.steps[idx].g_ref)?;
        let enf = self.set_of(&self.steps[idx].g_enf)?;
        let trace = self.trace_of(result.plan.as_deref())?;
        let (g_true, g_false) =
            efcc::goals_true_false(&self.formulas, reference, trace.as_ref().map(|t| t.states.as_slice()));
        if trace.is_some() && !enf.is_subset_of(g_true) {
            return Err(SessionError::InvalidPlan("an enforced goal does not hold".into()));
        }
        let utility = if result.status == StepStatus::Solvable {
            g_true.iter().map(|i| self.goals[i].utility).sum()
        } else {
            0
        };
        let (ids_true, ids_false) = (self.ids_of(g_true), self.ids_of(g_false));
        let s = &mut self.steps[idx];
        s.status = result.status;
        s.plan = result.plan;
        s.g_true = ids_true;
        s.g_false = ids_false;
        s.utility = utility;
        s.error = result.error;
        Ok(&self.steps[idx])
    }

    fn trace_of(&self, plan: Option<&[String]>) -> Result<Option<Trace>, SessionError> {
        let Some(names) = plan else {
            return Ok(None);
        };
        let plan = Plan::from_names(names.iter().map(String::as_str), &self.task)
            .map_err(|e| SessionError::InvalidPlan(e.to_string()))?;
        Ok(Some(
            plan.run(&self.task)
                .map_err(|e| SessionError::InvalidPlan(e.to_string()))?,
        ))
    }

    /// Plans and resolves a step synchronously.
    pub fn run_step(&mut self, step_id: &str) -> Result<&IterationStep, SessionError> {
        let r = self.compute_step(step_id)?;
        self.resolve_step(r)
    }

    pub fn step_utility(&self, step: &IterationStep) -> u64 {
        if step.status == StepStatus::Solvable {
            step.utility
        } else {
            0
        }
    }

    pub fn best_utility(&self) -> u64 {
        self.steps.iter().map(|s| self.step_utility(s)).max().unwrap_or(0)
    }

    /// Conflict data over `reference` in registry coordinates, memoized.
    pub fn conflicts_for(&self, reference: GoalSet) -> Result<Arc<ConflictData>, SessionError> {
        if let Some(d) = self.cached_conflicts(reference) {
            return Ok(d);
        }
        let data = Arc::new(self.conflict_job(reference).run()?);
        self.cache_conflicts(reference, data.clone());
        Ok(data)
    }

    /// Conflict data already known for `reference`, from the demo artifact
    /// or an earlier enumeration.
    pub fn cached_conflicts(&self, reference: GoalSet) -> Option<Arc<ConflictData>> {
        if let Some(demo) = &self.demo {
            if reference.is_subset_of(demo.conflicts.full_set()) {
                return Some(Arc::new(demo.conflicts.restrict(reference)));
            }
        }
        self.conflict_cache
            .lock()
            .expect("conflict cache poisoned")
            .get(&reference)
            .cloned()
    }

    pub fn cache_conflicts(&self, reference: GoalSet, data: Arc<ConflictData>) {
        self.conflict_cache
            .lock()
            .expect("conflict cache poisoned")
            .insert(reference, data);
    }

    pub fn conflict_job(&self, reference: GoalSet) -> ConflictJob {
        ConflictJob {
            reference,
            universe: self.goals.iter().map(|g| g.id.clone()).collect(),
            oracle: self.oracle.clone(),
        }
    }

    /// Enumerates conflicts over every goal and the best achievable utility.
    pub fn precompute_demo(&self) -> Result<DemoData, SessionError> {
        self.demo_job().run()
    }

    pub fn demo_job(&self) -> DemoJob {
        DemoJob {
            names: self.goals.iter().map(|g| g.id.clone()).collect(),
            utilities: self.goals.iter().map(|g| g.utility).collect(),
            oracle: self.oracle.clone(),
        }
    }

    /// Registry-coordinate view of a resolved step.
    pub fn step_view(&self, step: &IterationStep) -> Result<StepView, SessionError> {
        if step.is_pending() {
            return Err(SessionError::StepPending(step.id.clone()));
        }
        Ok(StepView {
            g_ref: self.set_of(&step.g_ref)?,
            g_enf: self.set_of(&step.g_enf)?,
            solvable: step.status == StepStatus::Solvable,
            g_true: self.set_of(&step.g_true)?,
        })
    }

    /// Like `step_view`, with `extra` goals joining the reference set and
    /// judged on the step's plan. Used for goals registered after the step.
    pub fn step_view_with(&self, step: &IterationStep, extra: GoalSet) -> Result<StepView, SessionError> {
        let mut view = self.step_view(step)?;
        let added = extra.difference(view.g_ref);
        if added.is_empty() {
            return Ok(view);
        }
        let trace = self.trace_of(step.plan.as_deref())?;
        let (t, _) = efcc::goals_true_false(&self.formulas, added, trace.as_ref().map(|t| t.states.as_slice()));
        view.g_ref = view.g_ref.union(added);
        view.g_true = view.g_true.union(t);
        Ok(view)
    }

    /// Answers `q` against an explicit view of `step_id`.
    pub fn ask_view(&self, step_id: &str, view: &StepView, q: &Question) -> Result<ExplanationBundle, SessionError> {
        let data = self.conflicts_for(view.g_ref)?;
        Ok(efcc::bundle(step_id, q, view, &data)?)
    }

    /// Answers a typed question whose arguments are goal ids.
    pub fn ask<S: AsRef<str>>(
        &self,
        step_id: &str,
        qtype: QuestionType,
        args: &[S],
    ) -> Result<ExplanationBundle, SessionError> {
        let step = self
            .step(step_id)
            .ok_or_else(|| SessionError::UnknownStep(step_id.to_string()))?;
        let view = self.step_view(step)?;
        let q = Question {
            qtype,
            args: self.set_of(args)?,
        };
        let data = self.conflicts_for(view.g_ref)?;
        Ok(efcc::bundle(step_id, &q, &view, &data)?)
    }

    /// Goal ids touched by any step, in registry order.
    pub fn referenced_goals(&self) -> Vec<String> {
        let ids: BTreeSet<usize> = self
            .steps
            .iter()
            .flat_map(|s| s.g_ref.iter().filter_map(|g| self.goal_index(g)))
            .collect();
        ids.into_iter().map(|i| self.goals[i].id.clone()).collect()
    }
}
