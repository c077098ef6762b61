//! The four-route dispatcher: translate the question, then answer directly,
//! hand a follow-up to the explanation translator, or query the explanation
//! framework on known or newly translated goals.

use crate::prompts::{family, list, Prompts, Role};
use crate::provider::{ChatMessage, Provider, ProviderError, ProviderRequest};
use crate::template::{self, question_text, Explanation};
use crate::translate::{
    route, ExplanationOutput, GoalTranslation, RoutingDecision, SchemaViolation, Suggestions, TranslatorOutputGT,
    TranslatorOutputQT,
};
use goalscope_core::efcc::{BundleJson, QuestionType, StepView};
use goalscope_core::goalset::GoalSet;
use goalscope_core::ltlf::GoalSource;
use goalscope_core::session::{GoalRecord, Project, SessionError};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Shown whenever a translator fails.
pub const APOLOGY: &str = "Sorry, I could not process that question. I can explain why the task is unsolvable and \
how to make it solvable. On a solvable step I can tell you why a goal is not satisfied, what happens if you enforce \
it, whether it can be satisfied and how.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum UserInput {
    Text {
        text: String,
    },
    Menu {
        question_type: QuestionType,
        args: Vec<String>,
    },
}

/// One question and its answer as the user sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Turn {
    pub step_id: String,
    pub question: String,
    pub decision: RoutingDecision,
    /// How the question was understood, shown before the answer.
    pub reverse_translation: Option<String>,
    pub answer: String,
    pub bundles: Vec<BundleJson>,
    /// Goals created by the goal translator while answering.
    pub registered_goals: Vec<String>,
    pub degraded: bool,
}

/// Per-step transcripts of every agent. A context never spans two steps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentContext {
    pub step_id: String,
    pub transcripts: BTreeMap<Role, Vec<ChatMessage>>,
}

impl AgentContext {
    pub fn transcript(&self, role: Role) -> &[ChatMessage] {
        self.transcripts.get(&role).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    contexts: BTreeMap<String, AgentContext>,
    turns: Vec<Turn>,
}

impl Conversation {
    pub fn context(&self, step_id: &str) -> Option<&AgentContext> {
        self.contexts.get(step_id)
    }

    fn context_mut(&mut self, step_id: &str) -> &mut AgentContext {
        self.contexts
            .entry(step_id.to_string())
            .or_insert_with(|| AgentContext {
                step_id: step_id.to_string(),
                transcripts: BTreeMap::new(),
            })
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn turns_for<'a>(&'a self, step_id: &'a str) -> impl Iterator<Item = &'a Turn> + 'a {
        self.turns.iter().filter(move |t| t.step_id == step_id)
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("{0}")]
    Unavailable(&'static str),
}

#[derive(Debug)]
enum CallFailure {
    Provider(ProviderError),
    Schema(SchemaViolation),
}

impl fmt::Display for CallFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallFailure::Provider(e) => write!(f, "{e}"),
            CallFailure::Schema(e) => write!(f, "schema violation: {e}"),
        }
    }
}

pub enum Backend {
    Template,
    Llm(Arc<dyn Provider>),
}

pub struct Dispatcher {
    backend: Backend,
    prompts: Prompts,
}

fn names(project: &Project, set: GoalSet) -> Vec<String> {
    set.iter().map(|i| project.short_name(i)).collect()
}

fn family_names(project: &Project, f: &[GoalSet]) -> Vec<Vec<String>> {
    f.iter().map(|s| names(project, *s)).collect()
}

fn turn(step_id: &str, question: &str, decision: RoutingDecision, answer: String) -> Turn {
    Turn {
        step_id: step_id.to_string(),
        question: question.to_string(),
        decision,
        reverse_translation: None,
        answer,
        bundles: Vec::new(),
        registered_goals: Vec::new(),
        degraded: false,
    }
}

fn degraded(step_id: &str, question: &str) -> Turn {
    let mut t = turn(
        step_id,
        question,
        RoutingDecision::Direct {
            response: APOLOGY.to_string(),
        },
        APOLOGY.to_string(),
    );
    t.degraded = true;
    t
}

/// Context key for goal creation outside any step.
pub const GOAL_CONTEXT: &str = "goal-creation";

/// Result of turning a goal description into a registered goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case", rename_all_fields = "camelCase")]
pub enum GoalOutcome {
    Registered {
        goal: GoalRecord,
        reverse_translation: Option<String>,
    },
    NotExpressible {
        reason: String,
    },
}

fn register(project: &mut Project, tr: GoalTranslation, utility: u64) -> GoalOutcome {
    match tr {
        GoalTranslation::Goal {
            text,
            short_name,
            reverse_translation,
            ..
        } => {
            let id = fresh_goal_id(project, &short_name);
            let mut g = GoalRecord::new(&id, &short_name, &text, utility);
            g.source = GoalSource::Translated;
            match project.add_goal(g) {
                Ok(goal) => GoalOutcome::Registered {
                    goal: goal.clone(),
                    reverse_translation,
                },
                Err(e) => GoalOutcome::NotExpressible { reason: e.to_string() },
            }
        }
        GoalTranslation::Unsupported { reason } => GoalOutcome::NotExpressible { reason },
        GoalTranslation::Rejected { error, .. } => GoalOutcome::NotExpressible { reason: error },
    }
}

/// Lowercase dash-separated id, made unique against the registry.
fn fresh_goal_id(project: &Project, short_name: &str) -> String {
    let base: String = short_name
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join("-");
    let base = if base.is_empty() { "goal".to_string() } else { base };
    let mut id = base.clone();
    let mut n = 2;
    while project.goal(&id).is_some() {
        id = format!("{base}-{n}");
        n += 1;
    }
    id
}

impl Dispatcher {
    pub fn template() -> Self {
        Dispatcher {
            backend: Backend::Template,
            prompts: Prompts::default(),
        }
    }

    pub fn llm(provider: Arc<dyn Provider>) -> Self {
        Dispatcher {
            backend: Backend::Llm(provider),
            prompts: Prompts::default(),
        }
    }

    pub fn with_prompts(mut self, prompts: Prompts) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn is_template(&self) -> bool {
        matches!(self.backend, Backend::Template)
    }

    /// Answers one user input on a resolved step. Only unknown or pending
    /// steps and invalid menu choices are errors; translator failures
    /// become a direct apology.
    pub fn dispatch(
        &self,
        project: &mut Project,
        conv: &mut Conversation,
        step_id: &str,
        input: UserInput,
    ) -> Result<Turn, AgentError> {
        let step = project
            .step(step_id)
            .ok_or_else(|| SessionError::UnknownStep(step_id.to_string()))?;
        project.step_view(step)?;
        let turn = match (input, &self.backend) {
            (UserInput::Menu { question_type, args }, _) => {
                self.answer_menu(project, conv, step_id, question_type, &args)?
            }
            (UserInput::Text { text }, Backend::Template) => self.template_text(project, step_id, &text)?,
            (UserInput::Text { text }, Backend::Llm(p)) => {
                self.answer_text(p.as_ref(), project, conv, step_id, &text)?
            }
        };
        conv.turns.push(turn.clone());
        Ok(turn)
    }

    /// Translates a goal description and registers the result. Needs the
    /// language-model backend and a project with goal translation enabled.
    pub fn add_goal_from_text(
        &self,
        project: &mut Project,
        conv: &mut Conversation,
        description: &str,
        utility: u64,
    ) -> Result<GoalOutcome, AgentError> {
        let Backend::Llm(provider) = &self.backend else {
            return Err(AgentError::Unavailable("goal translation needs a language model"));
        };
        if !project.goal_translator {
            return Err(AgentError::Unavailable("goal translation is disabled for this project"));
        }
        match self.translate_goal(provider.as_ref(), project, conv, GOAL_CONTEXT, description) {
            Ok(tr) => Ok(register(project, tr, utility)),
            Err(e) => Ok(GoalOutcome::NotExpressible { reason: e.to_string() }),
        }
    }

    /// One to three suggested questions for the step.
    pub fn suggest(
        &self,
        project: &Project,
        conv: &mut Conversation,
        step_id: &str,
    ) -> Result<Vec<String>, AgentError> {
        let step = project
            .step(step_id)
            .ok_or_else(|| SessionError::UnknownStep(step_id.to_string()))?;
        let fallback = template::suggestions(project, step)?;
        let Backend::Llm(provider) = &self.backend else {
            return Ok(fallback);
        };
        let view = project.step_view(step)?;
        let previous: Vec<String> = conv
            .turns_for(step_id)
            .map(|t| format!("  User: {:?}\n\n  Assistant: {:?}", t.question, t.answer))
            .collect();
        let previous = if previous.is_empty() {
            "  (none)".to_string()
        } else {
            previous.join("\n\n")
        };
        let input = self.prompts.input_for(
            Role::QuestionSuggester,
            &[
                ("NAME", &step.name),
                ("ENFORCED_GOALS", &list(&names(project, view.g_enf))),
                ("SATISFIED_GOALS", &list(&names(project, view.g_true))),
                ("UNSATISFIED_GOALS", &list(&names(project, view.g_false()))),
                ("SOLVABLE", if view.solvable { "true" } else { "false" }),
                ("PREVIOUS_QUESTIONS", &previous),
            ],
        );
        let ctx = conv.context_mut(step_id);
        Ok(self
            .call(
                provider.as_ref(),
                ctx,
                Role::QuestionSuggester,
                input,
                Suggestions::schema(),
                Suggestions::parse,
            )
            .unwrap_or(fallback))
    }

    fn call<T>(
        &self,
        provider: &dyn Provider,
        ctx: &mut AgentContext,
        role: Role,
        input: String,
        schema: Value,
        parse: impl Fn(&str) -> Result<T, SchemaViolation>,
    ) -> Result<T, CallFailure> {
        let request = ProviderRequest {
            agent: role,
            step_id: ctx.step_id.clone(),
            system: self.prompts.system_for(role),
            context: ctx.transcript(role).to_vec(),
            input,
            schema,
        };
        let mut last = None;
        // One retry on a contract violation; transport errors are final.
        for _ in 0..2 {
            let raw = provider.send(&request).map_err(CallFailure::Provider)?;
            match parse(&raw) {
                Ok(v) => {
                    let t = ctx.transcripts.entry(role).or_default();
                    t.push(ChatMessage::user(request.input.clone()));
                    t.push(ChatMessage::assistant(raw));
                    return Ok(v);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(CallFailure::Schema(last.expect("two attempts")))
    }

    fn template_text(&self, project: &Project, step_id: &str, text: &str) -> Result<Turn, AgentError> {
        let step = project.step(step_id).expect("checked by dispatch");
        let menu = template::question_menu(project, step)?;
        let answer = if menu.is_empty() {
            "Free-text questions need a language model. This step has no open questions.".to_string()
        } else {
            let labels: Vec<String> = menu.into_iter().map(|e| e.label).collect();
            format!(
                "Free-text questions need a language model. You can ask one of these: {}",
                labels.join(" ")
            )
        };
        Ok(turn(
            step_id,
            text,
            RoutingDecision::Direct {
                response: answer.clone(),
            },
            answer,
        ))
    }

    fn answer_menu(
        &self,
        project: &Project,
        conv: &mut Conversation,
        step_id: &str,
        qtype: QuestionType,
        args: &[String],
    ) -> Result<Turn, AgentError> {
        let set = project.set_of(args)?;
        let e = Explanation::compute(project, step_id, qtype, set)?;
        let question = question_text(qtype, &names(project, set));
        let mut t = turn(
            step_id,
            &question,
            RoutingDecision::EfqueryNoGt {
                question_type: qtype,
                args: project.ids_of(set),
            },
            String::new(),
        );
        t.reverse_translation = Some(question.clone());
        t.bundles = e.to_wire(project);
        t.answer = match &self.backend {
            Backend::Template => template::explain(project, &e),
            Backend::Llm(p) => {
                let input = self.explanation_input(project, &question, &e);
                let ctx = conv.context_mut(step_id);
                match self.call(
                    p.as_ref(),
                    ctx,
                    Role::ExplanationTranslator,
                    input,
                    ExplanationOutput::schema(),
                    ExplanationOutput::parse,
                ) {
                    Ok(text) => text,
                    Err(_) => {
                        t.degraded = true;
                        template::explain(project, &e)
                    }
                }
            }
        };
        Ok(t)
    }

    fn explanation_input(&self, project: &Project, question: &str, e: &Explanation) -> String {
        let v: &StepView = &e.view;
        self.prompts.input_for(
            Role::ExplanationTranslator,
            &[
                ("QUESTION", question),
                ("QUESTION_TYPE", e.question_type.label()),
                ("QUESTION_ARGUMENTS", &list(&names(project, e.args))),
                ("CONFLICTS", &family(&family_names(project, &e.conflicts()))),
                ("RESOLUTIONS", &family(&family_names(project, &e.resolutions()))),
                ("ENFORCED_GOALS", &list(&names(project, v.g_enf))),
                ("SATISFIED_GOALS", &list(&names(project, v.g_true))),
                ("UNSATISFIED_GOALS", &list(&names(project, v.g_false()))),
            ],
        )
    }

    fn answer_text(
        &self,
        provider: &dyn Provider,
        project: &mut Project,
        conv: &mut Conversation,
        step_id: &str,
        text: &str,
    ) -> Result<Turn, AgentError> {
        let step = project.step(step_id).expect("checked by dispatch");
        let view = project.step_view(step)?;
        let input = self.prompts.input_for(
            Role::QuestionTranslator,
            &[
                ("QUESTION", text),
                ("ENFORCED_GOALS", &list(&names(project, view.g_enf))),
                ("SATISFIED_GOALS", &list(&names(project, view.g_true))),
                ("UNSATISFIED_GOALS", &list(&names(project, view.g_false()))),
                ("SOLVABLE", if view.solvable { "True" } else { "False" }),
            ],
        );
        let parsed = self.call(
            provider,
            conv.context_mut(step_id),
            Role::QuestionTranslator,
            input,
            TranslatorOutputQT::schema(),
            |raw| {
                let out = TranslatorOutputQT::parse(raw)?;
                let label = out.validate(view.solvable)?;
                Ok((out, label))
            },
        );
        let Ok((out, label)) = parsed else {
            return Ok(degraded(step_id, text));
        };
        let decision = route(&out, label, text, project);
        let reverse = Some(out.reverse_translation.trim().to_string()).filter(|r| !r.is_empty());

        let mut t = turn(step_id, text, decision.clone(), String::new());
        t.reverse_translation = reverse;
        let (qtype, args) = match decision {
            RoutingDecision::Direct { response } => {
                t.answer = response;
                return Ok(t);
            }
            RoutingDecision::FollowUp { question } => {
                let ctx = conv.context_mut(step_id);
                return Ok(
                    match self.call(
                        provider,
                        ctx,
                        Role::ExplanationTranslator,
                        question,
                        ExplanationOutput::schema(),
                        ExplanationOutput::parse,
                    ) {
                        Ok(answer) => {
                            t.answer = answer;
                            t
                        }
                        Err(_) => degraded(step_id, text),
                    },
                );
            }
            RoutingDecision::EfqueryNoGt { question_type, args } => (question_type, project.set_of(&args)?),
            RoutingDecision::EfqueryGt {
                question_type,
                known,
                descriptions,
            } => {
                if !project.goal_translator {
                    let known_goals: Vec<String> = project.goals().iter().map(|g| g.short_name.clone()).collect();
                    t.answer = format!(
                        "I can only answer questions about the goals of this task ({}). I could not match: {}.",
                        known_goals.join(", "),
                        descriptions.join(", ")
                    );
                    return Ok(t);
                }
                let mut set = project.set_of(&known)?;
                let mut failures = Vec::new();
                for d in &descriptions {
                    match self.translate_goal(provider, project, conv, step_id, d) {
                        Ok(tr) => match register(project, tr, 0) {
                            GoalOutcome::Registered { goal, .. } => {
                                set = set.with(project.goal_index(&goal.id).expect("just added"));
                                t.registered_goals.push(goal.id);
                            }
                            GoalOutcome::NotExpressible { reason } => failures.push(format!("\"{d}\" ({reason})")),
                        },
                        Err(_) => return Ok(degraded(step_id, text)),
                    }
                }
                if !failures.is_empty() {
                    t.answer = format!("I could not express {} as a goal of this task.", failures.join(", "));
                    return Ok(t);
                }
                (question_type, set)
            }
        };

        let e = match Explanation::compute(project, step_id, qtype, args) {
            Ok(e) => e,
            Err(SessionError::Exhausted(_)) | Err(SessionError::Conflicts(_)) | Err(SessionError::Efcc(_)) => {
                return Ok(degraded(step_id, text))
            }
            Err(other) => return Err(other.into()),
        };
        t.bundles = e.to_wire(project);
        let input = self.explanation_input(project, text, &e);
        let ctx = conv.context_mut(step_id);
        match self.call(
            provider,
            ctx,
            Role::ExplanationTranslator,
            input,
            ExplanationOutput::schema(),
            ExplanationOutput::parse,
        ) {
            Ok(answer) => t.answer = answer,
            Err(_) => return Ok(degraded(step_id, text)),
        }
        Ok(t)
    }

    fn translate_goal(
        &self,
        provider: &dyn Provider,
        project: &Project,
        conv: &mut Conversation,
        step_id: &str,
        description: &str,
    ) -> Result<GoalTranslation, CallFailure> {
        let predicates: Vec<String> = project.task.predicates.iter().map(ToString::to_string).collect();
        let objects: Vec<String> = project.task.objects.iter().map(|o| o.name.clone()).collect();
        let input = self.prompts.input_for(
            Role::GoalTranslator,
            &[
                ("GOAL_DESCRIPTION", description),
                ("PREDICATES", &list(&predicates)),
                ("OBJECTS", &list(&objects)),
            ],
        );
        let ctx = conv.context_mut(step_id);
        let out = self.call(
            provider,
            ctx,
            Role::GoalTranslator,
            input,
            TranslatorOutputGT::schema(),
            TranslatorOutputGT::parse,
        )?;
        Ok(out.interpret(project))
    }
}
