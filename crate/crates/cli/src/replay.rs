//! Conversation scripts: scripted translator outputs, user inputs and exact
//! expectations on routing decisions, answers, bundles and the requests the
//! dispatcher sends to each agent.

use crate::task::{read_json, CliError, TaskSource};
use goalscope_agents::prompts::Role;
use goalscope_agents::{
    AgentError, Conversation, Dispatcher, MockProvider, ProviderRequest, Route, RoutingDecision, Turn, UserInput,
};
use goalscope_core::session::Mode;
use serde::Deserialize;
use serde_json::Value;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Llm,
    Template,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Script {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub fixture: String,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub goal_translator: Option<bool>,
    pub turns: Vec<ScriptTurn>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScriptTurn {
    /// Plans a new step that later turns ask about.
    #[serde(default)]
    pub step: Option<StepSpec>,
    /// Queued translator outputs, consumed in order per agent.
    #[serde(default)]
    pub responses: Vec<MockResponse>,
    pub input: UserInput,
    #[serde(default)]
    pub expect: Expect,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StepSpec {
    pub enforce: Vec<String>,
    /// Defaults to every goal.
    #[serde(default)]
    pub reference: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockResponse {
    pub role: Role,
    /// A string is sent verbatim; anything else as its JSON text.
    pub output: Value,
}

impl MockResponse {
    fn text(&self) -> String {
        match &self.output {
            Value::String(s) => s.clone(),
            v => v.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Expect {
    pub route: Option<Route>,
    pub decision: Option<RoutingDecision>,
    pub answer: Option<String>,
    #[serde(default)]
    pub answer_contains: Vec<String>,
    pub reverse_translation: Option<String>,
    pub degraded: Option<bool>,
    pub registered_goals: Option<Vec<String>>,
    /// Compared to the wire form of every bundle.
    pub bundles: Option<Vec<Value>>,
    /// Every request sent during the turn, in order.
    pub requests: Option<Vec<ExpectRequest>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExpectRequest {
    pub role: Role,
    pub input: Option<String>,
    #[serde(default)]
    pub input_contains: Vec<String>,
    /// Messages of earlier exchanges in the agent's step context.
    pub context_len: Option<usize>,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Cli(#[from] CliError),
    #[error("turn {turn}: {source}")]
    Agent { turn: usize, source: AgentError },
    #[error("turn {0} asks a question before any step exists")]
    NoStep(usize),
}

impl ReplayError {
    pub fn exit_code(&self) -> u8 {
        match self {
            ReplayError::Cli(e) => e.exit_code(),
            _ => crate::task::EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TurnReport {
    pub index: usize,
    pub turn: Turn,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub name: String,
    pub turns: Vec<TurnReport>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.turns.iter().all(|t| t.failures.is_empty())
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.turns {
            let status = if t.failures.is_empty() { "ok" } else { "FAIL" };
            out.push(format!(
                "{status:4} {} turn {}: {} {:?}",
                self.name,
                t.index,
                route_name(t.turn.decision.route()),
                t.turn.question
            ));
            out.extend(t.failures.iter().map(|f| format!("       {f}")));
        }
        out
    }
}

pub fn route_name(r: Route) -> String {
    serde_json::to_value(r)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn load(path: &Path) -> Result<Script, CliError> {
    read_json(path)
}

pub fn run(script: &Script) -> Result<Report, ReplayError> {
    let mut project = TaskSource::fixture(&script.fixture).load(script.mode.unwrap_or(Mode::Free))?;
    if let Some(gt) = script.goal_translator {
        project.goal_translator = gt;
    }
    let mock = Arc::new(MockProvider::new());
    let dispatcher = match script.backend {
        Backend::Llm => Dispatcher::llm(mock.clone()),
        Backend::Template => Dispatcher::template(),
    };
    let mut conv = Conversation::default();
    let mut current: Option<String> = None;
    let mut turns = Vec::new();
    for (i, t) in script.turns.iter().enumerate() {
        let index = i + 1;
        let agent = |source: AgentError| ReplayError::Agent { turn: index, source };
        if let Some(s) = &t.step {
            let reference = s
                .reference
                .clone()
                .unwrap_or_else(|| project.goals().iter().map(|g| g.id.clone()).collect());
            let id = project
                .create_step(&s.enforce, &reference, None)
                .map_err(|e| agent(e.into()))?
                .id
                .clone();
            project.run_step(&id).map_err(|e| agent(e.into()))?;
            current = Some(id);
        }
        let step = current.clone().ok_or(ReplayError::NoStep(index))?;
        let before = mock.requests().len();
        for r in &t.responses {
            mock.push(r.role, r.text());
        }
        let turn = dispatcher
            .dispatch(&mut project, &mut conv, &step, t.input.clone())
            .map_err(agent)?;
        let requests = mock.requests().split_off(before);
        let mut failures = check(&t.expect, &turn, &requests);
        for role in Role::ALL {
            let left = mock.pending(role);
            if left > 0 {
                failures.push(format!("{left} scripted {role} output(s) were never requested"));
            }
        }
        // Leftovers must not leak into the next turn.
        mock.clear();
        turns.push(TurnReport { index, turn, failures });
    }
    Ok(Report {
        name: script.name.clone(),
        turns,
    })
}

fn differ<T: std::fmt::Debug + PartialEq>(what: &str, expected: &T, got: &T, out: &mut Vec<String>) {
    if expected != got {
        out.push(format!("{what}: expected {expected:?}, got {got:?}"));
    }
}

fn check(e: &Expect, t: &Turn, requests: &[ProviderRequest]) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(r) = e.route {
        differ("route", &r, &t.decision.route(), &mut out);
    }
    if let Some(d) = &e.decision {
        differ("decision", d, &t.decision, &mut out);
    }
    if let Some(a) = &e.answer {
        differ("answer", a, &t.answer, &mut out);
    }
    for s in &e.answer_contains {
        if !t.answer.contains(s.as_str()) {
            out.push(format!("answer {:?} lacks {s:?}", t.answer));
        }
    }
    if let Some(r) = &e.reverse_translation {
        differ(
            "reverse translation",
            &Some(r.clone()),
            &t.reverse_translation,
            &mut out,
        );
    }
    if let Some(d) = e.degraded {
        differ("degraded", &d, &t.degraded, &mut out);
    }
    if let Some(g) = &e.registered_goals {
        differ("registered goals", g, &t.registered_goals, &mut out);
    }
    if let Some(b) = &e.bundles {
        let got: Vec<Value> = t
            .bundles
            .iter()
            .map(|b| serde_json::to_value(b).expect("bundles serialize"))
            .collect();
        differ("bundles", b, &got, &mut out);
    }
    if let Some(rs) = &e.requests {
        let roles: Vec<Role> = requests.iter().map(|r| r.agent).collect();
        let want: Vec<Role> = rs.iter().map(|r| r.role).collect();
        differ("requests", &want, &roles, &mut out);
        for (i, (x, r)) in rs.iter().zip(requests).enumerate() {
            if let Some(input) = &x.input {
                differ(&format!("request {} input", i + 1), input, &r.input, &mut out);
            }
            for s in &x.input_contains {
                if !r.input.contains(s.as_str()) {
                    out.push(format!("request {} input lacks {s:?}:\n{}", i + 1, r.input));
                }
            }
            if let Some(n) = x.context_len {
                differ(
                    &format!("request {} context length", i + 1),
                    &n,
                    &r.context.len(),
                    &mut out,
                );
            }
        }
    }
    out
}
