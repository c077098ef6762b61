//! Service state: projects behind per-project locks, the job runner and
//! persistence. Handlers call into `App` from blocking tasks; planning,
//! conflict enumeration and demo precomputation run as jobs that hold no
//! project lock while they compute.

use crate::error::ApiError;
use crate::store::{DocumentStore, StoreError};
use crate::wire::*;
use goalscope_agents::prompts::Prompts;
use goalscope_agents::template::{self, MenuEntry};
use goalscope_agents::{Conversation, Dispatcher, GoalOutcome, Provider, Turn, UserInput};
use goalscope_core::fixtures;
use goalscope_core::session::{
    ConflictJob, DemoData, DemoJob, GoalRecord, IterationStep, Mode, PlanJob, Project, ProjectDoc,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};
use tokio::runtime::Handle;
use tokio::sync::{broadcast, Semaphore};

const PROJECTS: &str = "projects";
const STEPS: &str = "steps";
const DEMO: &str = "demo";
const CONVERSATIONS: &str = "conversations";
const JOBS: &str = "jobs";

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Stored project document. Steps, the demo artifact and the conversation
/// are separate documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ProjectRecord {
    project: ProjectDoc,
    settings: Settings,
    created_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct StepRecord {
    project_id: String,
    seq: usize,
    step: IterationStep,
}

pub struct Slot {
    pub id: String,
    pub settings: Settings,
    pub created_ms: u64,
    pub project: RwLock<Project>,
    pub conv: Mutex<Conversation>,
}

enum Work {
    Plan(PlanJob),
    Conflicts(ConflictJob),
    Demo(DemoJob),
}

#[derive(Default)]
struct JobBoard {
    jobs: BTreeMap<String, Job>,
    by_step: HashMap<String, String>,
    demo: HashMap<String, String>,
}

pub struct Options {
    pub store: Arc<dyn DocumentStore>,
    pub workers: usize,
    pub agents: Agents,
    pub provider: Option<Arc<dyn Provider>>,
    pub prompts: Prompts,
}

impl Options {
    /// Two workers, template agents, shipped prompts.
    pub fn new(store: Arc<dyn DocumentStore>) -> Self {
        Options {
            store,
            workers: 2,
            agents: Agents::Template,
            provider: None,
            prompts: Prompts::default(),
        }
    }
}

pub struct App {
    store: Arc<dyn DocumentStore>,
    projects: RwLock<BTreeMap<String, Arc<Slot>>>,
    step_owner: RwLock<HashMap<String, String>>,
    board: Mutex<JobBoard>,
    job_seq: AtomicU64,
    project_seq: AtomicU64,
    events: broadcast::Sender<Event>,
    workers: Arc<Semaphore>,
    rt: Handle,
    template: Dispatcher,
    llm: Option<Dispatcher>,
    default_agents: Agents,
}

fn decode<T: for<'de> Deserialize<'de>>(what: &str, v: Value) -> Result<T, ApiError> {
    serde_json::from_value(v).map_err(|e| {
        ApiError::new(
            axum::http::StatusCode::INTERNAL_SERVER_ERROR,
            "store",
            format!("stored {what} does not decode: {e}"),
        )
    })
}

fn numeric_suffix(id: &str, prefix: &str) -> u64 {
    id.strip_prefix(prefix).and_then(|n| n.parse().ok()).unwrap_or(0)
}

impl App {
    /// Builds the service state from the store. Must run inside a tokio
    /// runtime; pending steps found in the store are planned again.
    pub fn open(opts: Options) -> Result<Arc<App>, ApiError> {
        let (events, _) = broadcast::channel(256);
        let llm = opts
            .provider
            .map(|p| Dispatcher::llm(p).with_prompts(opts.prompts.clone()));
        let app = Arc::new(App {
            store: opts.store,
            projects: RwLock::new(BTreeMap::new()),
            step_owner: RwLock::new(HashMap::new()),
            board: Mutex::new(JobBoard::default()),
            job_seq: AtomicU64::new(0),
            project_seq: AtomicU64::new(0),
            events,
            workers: Arc::new(Semaphore::new(opts.workers.max(1))),
            rt: Handle::current(),
            template: Dispatcher::template().with_prompts(opts.prompts),
            llm,
            default_agents: opts.agents,
        });
        app.load()?;
        Ok(app)
    }

    fn load(self: &Arc<Self>) -> Result<(), ApiError> {
        let mut steps: HashMap<String, Vec<StepRecord>> = HashMap::new();
        for (_, v) in self.store.list(STEPS)? {
            let r: StepRecord = decode("step", v)?;
            steps.entry(r.project_id.clone()).or_default().push(r);
        }
        let mut pending = Vec::new();
        let mut max_project = 0;
        for (id, v) in self.store.list(PROJECTS)? {
            let rec: ProjectRecord = decode("project", v)?;
            let mut doc = rec.project;
            let mut own = steps.remove(&id).unwrap_or_default();
            own.sort_by_key(|r| r.seq);
            doc.steps = own.into_iter().map(|r| r.step).collect();
            doc.demo = match self.store.get(DEMO, &id)? {
                Some(v) => Some(decode::<DemoData>("demo artifact", v)?),
                None => None,
            };
            let conv = match self.store.get(CONVERSATIONS, &id)? {
                Some(v) => decode("conversation", v)?,
                None => Conversation::default(),
            };
            let project = Project::from_doc(doc)?;
            {
                let mut owner = self.step_owner.write().expect("step index poisoned");
                for s in project.steps() {
                    owner.insert(s.id.clone(), id.clone());
                    if s.is_pending() {
                        pending.push((id.clone(), s.id.clone()));
                    }
                }
            }
            max_project = max_project.max(numeric_suffix(&id, "p"));
            self.projects.write().expect("project index poisoned").insert(
                id.clone(),
                Arc::new(Slot {
                    id,
                    settings: rec.settings,
                    created_ms: rec.created_ms,
                    project: RwLock::new(project),
                    conv: Mutex::new(conv),
                }),
            );
        }
        self.project_seq.store(max_project, Ordering::SeqCst);

        let mut max_job = 0;
        for (id, v) in self.store.list(JOBS)? {
            let mut job: Job = decode("job", v)?;
            max_job = max_job.max(numeric_suffix(&id, "j"));
            if !job.status.is_final() {
                job.status = JobStatus::Failed;
                job.error = Some("interrupted by a restart".into());
                job.finished_ms = Some(now_ms());
                self.store
                    .put(JOBS, &job.id, &serde_json::to_value(&job).expect("job serializes"))?;
            }
            let mut board = self.board.lock().expect("job board poisoned");
            if job.kind == JobKind::DemoPrecompute {
                board.demo.insert(job.project_id.clone(), job.id.clone());
            }
            board.jobs.insert(job.id.clone(), job);
        }
        self.job_seq.store(max_job, Ordering::SeqCst);

        for (pid, sid) in pending {
            let slot = self.slot(&pid)?;
            let job = slot.project.read().expect("project lock poisoned").plan_job(&sid)?;
            self.enqueue(JobKind::Plan, &pid, Some(&sid), Work::Plan(job))?;
        }
        Ok(())
    }

    /// Takes every worker slot; jobs stay queued until the permit drops.
    #[doc(hidden)]
    pub async fn hold_workers(&self, n: u32) -> tokio::sync::OwnedSemaphorePermit {
        self.workers
            .clone()
            .acquire_many_owned(n)
            .await
            .expect("worker pool closed")
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Event> {
        self.events.subscribe()
    }

    fn emit(&self, e: Event) {
        // No subscribers is fine.
        let _ = self.events.send(e);
    }

    fn audit(&self, action: &str, project: &str, detail: Value) {
        let entry = json!({ "unixMs": now_ms(), "action": action, "projectId": project, "detail": detail });
        if let Err(e) = self.store.audit(&entry) {
            tracing::warn!("audit log: {e}");
        }
    }

    pub fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.projects
            .read()
            .expect("project index poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("project", id))
    }

    fn step_slot(&self, step_id: &str) -> Result<Arc<Slot>, ApiError> {
        let pid = self
            .step_owner
            .read()
            .expect("step index poisoned")
            .get(step_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("step", step_id))?;
        self.slot(&pid)
    }

    fn agents_of(&self, slot: &Slot) -> Agents {
        slot.settings.agents.unwrap_or(self.default_agents)
    }

    fn dispatcher(&self, slot: &Slot) -> Result<&Dispatcher, ApiError> {
        match self.agents_of(slot) {
            Agents::Template => Ok(&self.template),
            Agents::Llm => self
                .llm
                .as_ref()
                .ok_or_else(|| ApiError::conflict("unavailable", "no language-model provider is configured")),
        }
    }

    fn persist_project(&self, slot: &Slot, p: &Project) -> Result<(), StoreError> {
        let mut doc = p.to_doc();
        doc.steps.clear();
        doc.demo = None;
        let rec = ProjectRecord {
            project: doc,
            settings: slot.settings.clone(),
            created_ms: slot.created_ms,
        };
        self.store.put(
            PROJECTS,
            &slot.id,
            &serde_json::to_value(rec).expect("project serializes"),
        )
    }

    fn persist_step(&self, pid: &str, p: &Project, step_id: &str) -> Result<(), StoreError> {
        let seq = p.steps().iter().position(|s| s.id == step_id).expect("step exists");
        let rec = StepRecord {
            project_id: pid.to_string(),
            seq,
            step: p.steps()[seq].clone(),
        };
        self.store
            .put(STEPS, step_id, &serde_json::to_value(rec).expect("step serializes"))
    }

    fn persist_job(&self, job: &Job) {
        if let Err(e) = self
            .store
            .put(JOBS, &job.id, &serde_json::to_value(job).expect("job serializes"))
        {
            tracing::warn!("job {}: {e}", job.id);
        }
    }

    // Projects and goals.

    pub fn create_project(&self, req: CreateProject) -> Result<ProjectView, ApiError> {
        let n = self.project_seq.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("p{n}");
        let mode = req.mode.unwrap_or(Mode::Free);
        let mut project = if let Some(name) = &req.fixture {
            let f = fixtures::by_name(name).ok_or_else(|| ApiError::not_found("fixture", name))?;
            let mut p = f.project(mode)?;
            p.id = id.clone();
            p
        } else {
            let (Some(domain), Some(problem)) = (&req.domain, &req.problem) else {
                return Err(ApiError::bad_request(
                    "either `fixture` or both `domain` and `problem` are required",
                ));
            };
            let mut p = Project::new(&id, &id, domain, problem, req.goals.clone(), mode)?;
            p.set_templates(req.templates.clone());
            p
        };
        project.name = req.name.clone().or(req.fixture.clone()).unwrap_or_else(|| id.clone());
        if let Some(gt) = req.settings.goal_translator {
            project.goal_translator = gt;
        }
        if req.settings.agents == Some(Agents::Llm) && self.llm.is_none() {
            return Err(ApiError::conflict(
                "unavailable",
                "no language-model provider is configured",
            ));
        }
        let slot = Arc::new(Slot {
            id: id.clone(),
            settings: req.settings,
            created_ms: now_ms(),
            project: RwLock::new(project),
            conv: Mutex::new(Conversation::default()),
        });
        {
            let p = slot.project.read().expect("project lock poisoned");
            self.persist_project(&slot, &p)?;
        }
        self.projects
            .write()
            .expect("project index poisoned")
            .insert(id.clone(), slot.clone());
        self.audit("create-project", &id, json!({ "mode": mode, "fixture": req.fixture }));
        self.project_view(&id)
    }

    pub fn list_projects(&self) -> Vec<String> {
        self.projects
            .read()
            .expect("project index poisoned")
            .keys()
            .cloned()
            .collect()
    }

    pub fn project_view(&self, id: &str) -> Result<ProjectView, ApiError> {
        let slot = self.slot(id)?;
        let p = slot.project.read().expect("project lock poisoned");
        let board = self.board.lock().expect("job board poisoned");
        Ok(ProjectView {
            id: slot.id.clone(),
            name: p.name.clone(),
            mode: p.mode,
            agents: self.agents_of(&slot),
            goal_translator: p.goal_translator,
            settings: slot.settings.clone(),
            created_ms: slot.created_ms,
            goals: p.goals().to_vec(),
            templates: p
                .templates()
                .iter()
                .map(|t| TemplateView {
                    candidates: t
                        .params
                        .iter()
                        .map(|param| (param.name.clone(), t.candidates(&p.task, &param.name)))
                        .collect(),
                    template: t.clone(),
                })
                .collect(),
            steps: p
                .steps()
                .iter()
                .map(|s| StepView::new(&slot.id, s, &slot.settings, board.by_step.get(&s.id).cloned()))
                .collect(),
            best_utility: p.best_utility(),
            max_utility: p.demo().map(|d| d.max_utility),
        })
    }

    pub fn create_goal(&self, pid: &str, req: CreateGoal) -> Result<(GoalRecord, Option<String>), ApiError> {
        let slot = self.slot(pid)?;
        let mut p = slot.project.write().expect("project lock poisoned");
        let (goal, reverse) = match req {
            CreateGoal::Template {
                template,
                binding,
                utility,
            } => (p.instantiate_template(&template, &binding, utility)?.clone(), None),
            CreateGoal::Formula {
                id,
                short_name,
                formula,
                utility,
            } => (
                p.add_goal(GoalRecord::new(&id, &short_name, &formula, utility))?
                    .clone(),
                None,
            ),
            CreateGoal::Description { description, utility } => {
                let d = self.dispatcher(&slot)?;
                let mut conv = slot.conv.lock().expect("conversation lock poisoned");
                let out = d.add_goal_from_text(&mut p, &mut conv, &description, utility)?;
                self.store.put(
                    CONVERSATIONS,
                    pid,
                    &serde_json::to_value(&*conv).expect("conversation serializes"),
                )?;
                match out {
                    GoalOutcome::Registered {
                        goal,
                        reverse_translation,
                    } => (goal, reverse_translation),
                    GoalOutcome::NotExpressible { reason } => {
                        return Err(ApiError::new(
                            axum::http::StatusCode::UNPROCESSABLE_ENTITY,
                            "not-expressible",
                            reason,
                        ))
                    }
                }
            }
        };
        self.persist_project(&slot, &p)?;
        drop(p);
        self.audit("create-goal", pid, json!({ "goal": goal.id, "formula": goal.formula }));
        self.emit(Event::GoalAdded {
            project_id: pid.to_string(),
            goal: goal.clone(),
        });
        Ok((goal, reverse))
    }

    pub fn patch_goal(&self, pid: &str, gid: &str, req: PatchGoal) -> Result<GoalRecord, ApiError> {
        let slot = self.slot(pid)?;
        let mut p = slot.project.write().expect("project lock poisoned");
        let g = p.set_locked(gid, req.locked)?.clone();
        self.persist_project(&slot, &p)?;
        drop(p);
        self.audit("lock-goal", pid, json!({ "goal": gid, "locked": req.locked }));
        Ok(g)
    }

    // Steps.

    pub fn create_step(self: &Arc<Self>, pid: &str, req: CreateStep) -> Result<(StepView, Job), ApiError> {
        let slot = self.slot(pid)?;
        let (step, plan) = {
            let mut p = slot.project.write().expect("project lock poisoned");
            let name = req.name.as_deref();
            let step = match &req.fork {
                Some(parent) => {
                    if p.step(parent).is_none() {
                        return Err(ApiError::not_found("step", parent));
                    }
                    p.fork(parent, req.g_enf.clone(), req.g_ref.clone(), name)?.clone()
                }
                None => {
                    let enf = req.g_enf.clone().unwrap_or_default();
                    let reference = req
                        .g_ref
                        .clone()
                        .unwrap_or_else(|| p.goals().iter().map(|g| g.id.clone()).collect());
                    p.create_step(&enf, &reference, name)?.clone()
                }
            };
            self.persist_step(pid, &p, &step.id)?;
            let plan = p.plan_job(&step.id)?;
            (step, plan)
        };
        self.step_owner
            .write()
            .expect("step index poisoned")
            .insert(step.id.clone(), pid.to_string());
        self.audit(
            "create-step",
            pid,
            json!({ "step": step.id, "gEnf": step.g_enf, "gRef": step.g_ref }),
        );
        let job = self.enqueue(JobKind::Plan, pid, Some(&step.id), Work::Plan(plan))?;
        Ok((StepView::new(pid, &step, &slot.settings, Some(job.id.clone())), job))
    }

    pub fn step_view(&self, step_id: &str) -> Result<StepView, ApiError> {
        let slot = self.step_slot(step_id)?;
        let p = slot.project.read().expect("project lock poisoned");
        let s = p.step(step_id).ok_or_else(|| ApiError::not_found("step", step_id))?;
        let job = self
            .board
            .lock()
            .expect("job board poisoned")
            .by_step
            .get(step_id)
            .cloned();
        Ok(StepView::new(&slot.id, s, &slot.settings, job))
    }

    fn resolved<'a>(p: &'a Project, step_id: &str) -> Result<&'a IterationStep, ApiError> {
        let s = p.step(step_id).ok_or_else(|| ApiError::not_found("step", step_id))?;
        if s.is_pending() {
            return Err(ApiError::conflict(
                "step-pending",
                format!("step `{step_id}` is still pending"),
            ));
        }
        Ok(s)
    }

    pub fn menu(&self, step_id: &str) -> Result<Vec<MenuEntry>, ApiError> {
        let slot = self.step_slot(step_id)?;
        let p = slot.project.read().expect("project lock poisoned");
        let s = Self::resolved(&p, step_id)?;
        Ok(template::question_menu(&p, s)?)
    }

    pub fn suggestions(&self, step_id: &str) -> Result<Vec<String>, ApiError> {
        let slot = self.step_slot(step_id)?;
        let d = self.dispatcher(&slot)?;
        let p = slot.project.read().expect("project lock poisoned");
        Self::resolved(&p, step_id)?;
        let mut conv = slot.conv.lock().expect("conversation lock poisoned");
        Ok(d.suggest(&p, &mut conv, step_id)?)
    }

    pub fn conversation(&self, step_id: &str) -> Result<Vec<Turn>, ApiError> {
        let slot = self.step_slot(step_id)?;
        let conv = slot.conv.lock().expect("conversation lock poisoned");
        Ok(conv.turns_for(step_id).cloned().collect())
    }

    /// Answers a question. The project stays locked for the whole turn:
    /// one question at a time per project.
    pub fn ask(&self, step_id: &str, input: UserInput) -> Result<Turn, ApiError> {
        let slot = self.step_slot(step_id)?;
        let d = self.dispatcher(&slot)?;
        let mut p = slot.project.write().expect("project lock poisoned");
        Self::resolved(&p, step_id)?;
        let mut conv = slot.conv.lock().expect("conversation lock poisoned");
        let turn = d.dispatch(&mut p, &mut conv, step_id, input)?;
        self.store.put(
            CONVERSATIONS,
            &slot.id,
            &serde_json::to_value(&*conv).expect("conversation serializes"),
        )?;
        let added: Vec<GoalRecord> = turn
            .registered_goals
            .iter()
            .filter_map(|g| p.goal(g).cloned())
            .collect();
        if !added.is_empty() {
            self.persist_project(&slot, &p)?;
        }
        drop(conv);
        drop(p);
        self.audit(
            "question",
            &slot.id,
            json!({ "step": step_id, "question": turn.question, "route": turn.decision.route(), "degraded": turn.degraded }),
        );
        for goal in added {
            self.emit(Event::GoalAdded {
                project_id: slot.id.clone(),
                goal,
            });
        }
        Ok(turn)
    }

    // Demo artifacts.

    pub fn start_demo(self: &Arc<Self>, pid: &str) -> Result<Job, ApiError> {
        let slot = self.slot(pid)?;
        let p = slot.project.read().expect("project lock poisoned");
        if p.mode != Mode::Demo {
            return Err(ApiError::conflict(
                "not-demo",
                "demo artifacts need a demo-mode project",
            ));
        }
        {
            let board = self.board.lock().expect("job board poisoned");
            if let Some(job) = board.demo.get(pid).and_then(|j| board.jobs.get(j)) {
                let reusable = match job.status {
                    JobStatus::Queued | JobStatus::Running => true,
                    JobStatus::Done => p.demo().is_some(),
                    JobStatus::Failed => false,
                };
                if reusable {
                    return Ok(job.clone());
                }
            }
        }
        let work = Work::Demo(p.demo_job());
        drop(p);
        self.audit("demo-precompute", pid, json!({}));
        self.enqueue(JobKind::DemoPrecompute, pid, None, work)
    }

    pub fn demo_view(&self, pid: &str) -> Result<DemoView, ApiError> {
        let slot = self.slot(pid)?;
        let p = slot.project.read().expect("project lock poisoned");
        let board = self.board.lock().expect("job board poisoned");
        let job = board.demo.get(pid).and_then(|j| board.jobs.get(j));
        let data = p.demo();
        Ok(DemoView {
            status: match (data, job) {
                (Some(_), _) => Some(JobStatus::Done),
                (None, Some(j)) => Some(j.status),
                (None, None) => None,
            },
            job: job.map(|j| j.id.clone()),
            max_utility: data.map(|d| d.max_utility),
            conflicts: data.map(|d| d.conflicts.mus.len()),
            corrections: data.map(|d| d.conflicts.mcs.len()),
            error: job.and_then(|j| j.error.clone()),
        })
    }

    // Jobs.

    pub fn job(&self, id: &str) -> Result<Job, ApiError> {
        self.board
            .lock()
            .expect("job board poisoned")
            .jobs
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("job", id))
    }

    fn enqueue(self: &Arc<Self>, kind: JobKind, pid: &str, step: Option<&str>, work: Work) -> Result<Job, ApiError> {
        let n = self.job_seq.fetch_add(1, Ordering::SeqCst) + 1;
        let job = Job {
            id: format!("j{n}"),
            kind,
            project_id: pid.to_string(),
            step_id: step.map(str::to_string),
            status: JobStatus::Queued,
            error: None,
            created_ms: now_ms(),
            finished_ms: None,
        };
        {
            let mut board = self.board.lock().expect("job board poisoned");
            board.jobs.insert(job.id.clone(), job.clone());
            match kind {
                JobKind::Plan => {
                    board
                        .by_step
                        .insert(step.expect("plan jobs have a step").to_string(), job.id.clone());
                }
                JobKind::DemoPrecompute => {
                    board.demo.insert(pid.to_string(), job.id.clone());
                }
                JobKind::Conflicts => {}
            }
        }
        self.persist_job(&job);
        self.emit(Event::Job {
            project_id: pid.to_string(),
            job: job.clone(),
        });
        let app = self.clone();
        let id = job.id.clone();
        self.rt.spawn(async move {
            let permit = app.workers.clone().acquire_owned().await.expect("worker pool closed");
            app.transition(&id, JobStatus::Running, None);
            let runner = app.clone();
            let job_id = id.clone();
            let outcome = tokio::task::spawn_blocking(move || runner.execute(&job_id, work)).await;
            drop(permit);
            match outcome {
                Ok(Ok(())) => app.transition(&id, JobStatus::Done, None),
                Ok(Err(e)) => app.transition(&id, JobStatus::Failed, Some(e)),
                Err(e) => app.transition(&id, JobStatus::Failed, Some(format!("job aborted: {e}"))),
            }
        });
        Ok(job)
    }

    /// Moves a job forward; final states never change again.
    fn transition(&self, id: &str, status: JobStatus, error: Option<String>) {
        let job = {
            let mut board = self.board.lock().expect("job board poisoned");
            let Some(job) = board.jobs.get_mut(id) else {
                return;
            };
            if job.status.is_final() {
                return;
            }
            job.status = status;
            job.error = error;
            if status.is_final() {
                job.finished_ms = Some(now_ms());
            }
            job.clone()
        };
        self.persist_job(&job);
        self.emit(Event::Job {
            project_id: job.project_id.clone(),
            job,
        });
    }

    fn execute(self: &Arc<Self>, job_id: &str, work: Work) -> Result<(), String> {
        let pid = self.job(job_id).map_err(|e| e.message)?.project_id;
        let slot = self.slot(&pid).map_err(|e| e.message)?;
        match work {
            Work::Plan(job) => {
                let result = job.run();
                let (view, prefetch) = {
                    let mut p = slot.project.write().expect("project lock poisoned");
                    let step = match p.resolve_step(result) {
                        Ok(s) => s.clone(),
                        // Already resolved by an identical job.
                        Err(goalscope_core::session::SessionError::StepResolved(_)) => return Ok(()),
                        Err(e) => return Err(e.to_string()),
                    };
                    self.persist_step(&pid, &p, &step.id).map_err(|e| e.to_string())?;
                    let reference = p.set_of(&step.g_ref).map_err(|e| e.to_string())?;
                    let prefetch = p
                        .cached_conflicts(reference)
                        .is_none()
                        .then(|| p.conflict_job(reference));
                    (StepView::new(&pid, &step, &slot.settings, None), prefetch)
                };
                // Done before the resolution is announced; the runner's own
                // transition is then a no-op.
                self.transition(job_id, JobStatus::Done, None);
                self.audit("step-resolved", &pid, json!({ "step": view.id, "status": view.status }));
                self.emit(Event::StepResolved {
                    project_id: pid.clone(),
                    step: view,
                });
                if let Some(c) = prefetch {
                    self.enqueue(JobKind::Conflicts, &pid, None, Work::Conflicts(c))
                        .map_err(|e| e.message)?;
                }
                Ok(())
            }
            Work::Conflicts(job) => {
                let data = job.run().map_err(|e| e.to_string())?;
                let p = slot.project.read().expect("project lock poisoned");
                p.cache_conflicts(job.reference, Arc::new(data));
                Ok(())
            }
            Work::Demo(job) => {
                let data = job.run().map_err(|e| e.to_string())?;
                let max_utility = data.max_utility;
                {
                    let mut p = slot.project.write().expect("project lock poisoned");
                    self.store
                        .put(DEMO, &pid, &serde_json::to_value(&data).expect("demo serializes"))
                        .map_err(|e| e.to_string())?;
                    p.set_demo(data);
                }
                self.audit("demo-ready", &pid, json!({ "maxUtility": max_utility }));
                self.emit(Event::DemoReady {
                    project_id: pid,
                    max_utility,
                });
                Ok(())
            }
        }
    }

    /// Full persistent form of a project, as reloading would rebuild it.
    pub fn project_doc(&self, pid: &str) -> Result<ProjectDoc, ApiError> {
        Ok(self.slot(pid)?.project.read().expect("project lock poisoned").to_doc())
    }

    pub fn audit_log(&self) -> Result<Vec<Value>, ApiError> {
        Ok(self.store.audit_log()?)
    }
}
