//! Structured agent outputs, their schemas and the checks applied before use.

use goalscope_core::efcc::QuestionType;
use goalscope_core::ltlf::Ltl;
use goalscope_core::session::{compile_goal, Project};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt;

/// Whether the question names an existing goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Used {
    #[serde(rename = "ALREADY-USED")]
    AlreadyUsed,
    #[serde(rename = "NO-ARGUMENT-REQUIRED")]
    NoArgumentRequired,
    #[serde(rename = "NEW")]
    New,
}

/// Question translator answer, field for field as the prompt asks for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslatorOutputQT {
    pub question_type: String,
    pub question_argument: Vec<String>,
    pub used: Used,
    #[serde(default)]
    pub reverse_translation: String,
    #[serde(default)]
    pub direct_response: Option<String>,
}

/// The question type labels the translator may answer with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QtLabel {
    DirectUser,
    DirectEt,
    Query(QuestionType),
}

impl QtLabel {
    pub fn parse(label: &str) -> Option<QtLabel> {
        match label.trim().to_ascii_uppercase().replace('_', "-").as_str() {
            "DIRECT-USER" => Some(QtLabel::DirectUser),
            "DIRECT-ET" => Some(QtLabel::DirectEt),
            other => QuestionType::from_label(other)
                .filter(|q| q.is_solvable_type() || q.is_unsolvable_type())
                .map(QtLabel::Query),
        }
    }
}

/// A structurally valid answer that breaks the prompt's contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation(pub String);

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn violation<T>(msg: impl Into<String>) -> Result<T, SchemaViolation> {
    Err(SchemaViolation(msg.into()))
}

fn decode<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, SchemaViolation> {
    serde_json::from_str(text.trim()).map_err(|e| SchemaViolation(format!("not the expected JSON: {e}")))
}

impl TranslatorOutputQT {
    pub fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {
                "questionType": {"type": "string", "enum": [
                    "DIRECT-USER", "DIRECT-ET", "US-WHY", "US-HOW",
                    "S-WHY-NOT", "S-WHAT-IF", "S-CAN", "S-HOW"]},
                "questionArgument": {"type": "array", "items": {"type": "string"}},
                "used": {"type": "string", "enum": ["ALREADY-USED", "NO-ARGUMENT-REQUIRED", "NEW"]},
                "reverseTranslation": {"type": "string"},
                "directResponse": {"type": ["string", "null"]},
            },
            "required": ["questionType", "questionArgument", "used", "reverseTranslation", "directResponse"],
            "additionalProperties": false,
        })
    }

    pub fn parse(text: &str) -> Result<TranslatorOutputQT, SchemaViolation> {
        decode(text)
    }

    /// Arguments with the `[""]` placeholder removed.
    pub fn arguments(&self) -> Vec<String> {
        self.question_argument
            .iter()
            .map(|a| a.trim().to_string())
            .filter(|a| !a.is_empty())
            .collect()
    }

    /// Checks the co-occurrence rules: direct answers carry a response and
    /// no argument; `US-*` only on unsolvable steps, without argument;
    /// `S-*` only on solvable steps, with at least one argument.
    pub fn validate(&self, solvable: bool) -> Result<QtLabel, SchemaViolation> {
        let Some(label) = QtLabel::parse(&self.question_type) else {
            return violation(format!("unknown question type `{}`", self.question_type));
        };
        let args = self.arguments();
        let response = self.direct_response.as_deref().map(str::trim).unwrap_or("");
        let no_argument = |what: &str| -> Result<(), SchemaViolation> {
            if !args.is_empty() {
                return violation(format!("{what} takes no argument"));
            }
            if self.used != Used::NoArgumentRequired {
                return violation(format!("{what} requires used = NO-ARGUMENT-REQUIRED"));
            }
            Ok(())
        };
        match label {
            QtLabel::DirectUser | QtLabel::DirectEt => {
                no_argument(&self.question_type)?;
                if response.is_empty() {
                    return violation(format!("{} requires directResponse", self.question_type));
                }
            }
            QtLabel::Query(q) if q.is_unsolvable_type() => {
                no_argument(q.label())?;
                if solvable {
                    return violation(format!("{q} asked on a solvable step"));
                }
            }
            QtLabel::Query(q) => {
                if args.is_empty() {
                    return violation(format!("{q} needs an argument"));
                }
                if self.used == Used::NoArgumentRequired {
                    return violation(format!("{q} cannot have used = NO-ARGUMENT-REQUIRED"));
                }
                if !solvable {
                    return violation(format!("{q} asked on an unsolvable step"));
                }
            }
        }
        Ok(label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Route {
    #[serde(rename = "DIRECT")]
    Direct,
    #[serde(rename = "FOLLOW_UP")]
    FollowUp,
    #[serde(rename = "EFQUERY_NOGT")]
    EfqueryNoGt,
    #[serde(rename = "EFQUERY_GT")]
    EfqueryGt,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Direct => "DIRECT",
            Route::FollowUp => "FOLLOW_UP",
            Route::EfqueryNoGt => "EFQUERY_NOGT",
            Route::EfqueryGt => "EFQUERY_GT",
        })
    }
}

/// One of the four routes with exactly its payload. Goal arguments are
/// registry ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all_fields = "camelCase")]
pub enum RoutingDecision {
    #[serde(rename = "DIRECT")]
    Direct { response: String },
    #[serde(rename = "FOLLOW_UP")]
    FollowUp { question: String },
    #[serde(rename = "EFQUERY_NOGT")]
    EfqueryNoGt {
        question_type: QuestionType,
        args: Vec<String>,
    },
    #[serde(rename = "EFQUERY_GT")]
    EfqueryGt {
        question_type: QuestionType,
        known: Vec<String>,
        descriptions: Vec<String>,
    },
}

impl RoutingDecision {
    pub fn route(&self) -> Route {
        match self {
            RoutingDecision::Direct { .. } => Route::Direct,
            RoutingDecision::FollowUp { .. } => Route::FollowUp,
            RoutingDecision::EfqueryNoGt { .. } => Route::EfqueryNoGt,
            RoutingDecision::EfqueryGt { .. } => Route::EfqueryGt,
        }
    }
}

/// Maps a validated translation to its route. `S-*` arguments that resolve
/// to registered goals stay queries on known goals; the rest become goal
/// descriptions for the goal translator.
pub fn route(out: &TranslatorOutputQT, label: QtLabel, question: &str, project: &Project) -> RoutingDecision {
    match label {
        QtLabel::DirectUser => RoutingDecision::Direct {
            response: out.direct_response.clone().unwrap_or_default(),
        },
        QtLabel::DirectEt => RoutingDecision::FollowUp {
            question: question.to_string(),
        },
        QtLabel::Query(q) if q.is_unsolvable_type() => RoutingDecision::EfqueryNoGt {
            question_type: q,
            args: Vec::new(),
        },
        QtLabel::Query(q) => {
            let mut known: Vec<usize> = Vec::new();
            let mut descriptions = Vec::new();
            for a in out.arguments() {
                match project.resolve_goal_name(&a).and_then(|g| project.goal_index(&g.id)) {
                    Some(i) => known.push(i),
                    None => descriptions.push(a),
                }
            }
            known.sort_unstable();
            known.dedup();
            let known: Vec<String> = known.into_iter().map(|i| project.goals()[i].id.clone()).collect();
            if descriptions.is_empty() {
                RoutingDecision::EfqueryNoGt {
                    question_type: q,
                    args: known,
                }
            } else {
                RoutingDecision::EfqueryGt {
                    question_type: q,
                    known,
                    descriptions,
                }
            }
        }
    }
}

/// Goal translator answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslatorOutputGT {
    pub formula: String,
    #[serde(default)]
    pub short_name: Option<String>,
    #[serde(default)]
    pub reverse_translation: Option<String>,
    #[serde(default)]
    pub feedback: Option<String>,
}

/// What a goal description turned into. `Unsupported` and `Rejected` are
/// both the empty translation; they differ only in who gave up.
#[derive(Debug, Clone, PartialEq)]
pub enum GoalTranslation {
    Goal {
        formula: Ltl,
        text: String,
        short_name: String,
        reverse_translation: Option<String>,
    },
    /// The translator declined.
    Unsupported { reason: String },
    /// The translator produced a formula that does not parse on the task.
    Rejected { formula: String, error: String },
}

impl TranslatorOutputGT {
    pub fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {
                "formula": {"type": "string"},
                "shortName": {"type": ["string", "null"]},
                "reverseTranslation": {"type": ["string", "null"]},
                "feedback": {"type": ["string", "null"]},
            },
            "required": ["formula", "shortName", "reverseTranslation", "feedback"],
            "additionalProperties": false,
        })
    }

    pub fn parse(text: &str) -> Result<TranslatorOutputGT, SchemaViolation> {
        let out: TranslatorOutputGT = decode(text)?;
        if out.formula.trim().is_empty() {
            return violation("empty formula");
        }
        let supported = !out.is_unsupported();
        if supported && out.short_name.as_deref().is_none_or(|s| s.trim().is_empty()) {
            return violation("a supported goal needs a shortName");
        }
        Ok(out)
    }

    fn is_unsupported(&self) -> bool {
        self.formula
            .trim_start()
            .to_ascii_uppercase()
            .starts_with("UNSUPPORTED")
    }

    /// Parses the formula against the task. Nothing is repaired.
    pub fn interpret(&self, project: &Project) -> GoalTranslation {
        if self.is_unsupported() {
            let tail = self.formula.split_once(';').map(|(_, r)| r.trim().to_string());
            let reason = self
                .feedback
                .clone()
                .or(tail)
                .filter(|r| !r.is_empty())
                .unwrap_or_else(|| "Unsupported property".to_string());
            return GoalTranslation::Unsupported { reason };
        }
        match compile_goal(&self.formula, &project.task) {
            Ok(formula) => GoalTranslation::Goal {
                formula,
                text: self.formula.trim().to_string(),
                short_name: self.short_name.clone().unwrap_or_default().trim().to_string(),
                reverse_translation: self.reverse_translation.clone(),
            },
            Err(e) => GoalTranslation::Rejected {
                formula: self.formula.clone(),
                error: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationOutput {
    pub output: String,
}

impl ExplanationOutput {
    pub fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {"output": {"type": "string"}},
            "required": ["output"],
            "additionalProperties": false,
        })
    }

    pub fn parse(text: &str) -> Result<String, SchemaViolation> {
        let out: ExplanationOutput = decode(text)?;
        if out.output.trim().is_empty() {
            return violation("empty explanation");
        }
        Ok(out.output)
    }
}

/// Suggester answer. The prompt asks for a bare array; structured-output
/// endpoints need an object root, so `{"questions": [...]}` is accepted too.
pub struct Suggestions;

impl Suggestions {
    pub fn schema() -> Value {
        json!({
            "type": "object",
            "properties": {
                "questions": {"type": "array", "items": {"type": "string"}, "minItems": 1, "maxItems": 3},
            },
            "required": ["questions"],
            "additionalProperties": false,
        })
    }

    pub fn parse(text: &str) -> Result<Vec<String>, SchemaViolation> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Shape {
            Bare(Vec<String>),
            Wrapped { questions: Vec<String> },
        }
        let qs = match decode::<Shape>(text)? {
            Shape::Bare(v) | Shape::Wrapped { questions: v } => v,
        };
        if qs.is_empty() || qs.len() > 3 {
            return violation(format!("expected 1 to 3 questions, got {}", qs.len()));
        }
        if qs.iter().any(|q| q.trim().is_empty()) {
            return violation("empty question");
        }
        Ok(qs.into_iter().map(|q| q.trim().to_string()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use goalscope_core::fixtures;

    fn qt(json: &str) -> TranslatorOutputQT {
        TranslatorOutputQT::parse(json).unwrap()
    }

    #[test]
    fn worked_example_outputs_validate() {
        let direct = qt(
            r#"{"questionType": "DIRECT-USER", "questionArgument": [""], "used": "NO-ARGUMENT-REQUIRED",
            "reverseTranslation": "What do I have to do?", "directResponse": "You have to find a combination"}"#,
        );
        assert_eq!(direct.validate(false), Ok(QtLabel::DirectUser));
        let why = qt(
            r#"{"questionType": "US-WHY", "questionArgument": [""], "used": "NO-ARGUMENT-REQUIRED",
            "reverseTranslation": "Why is the planning task unsolvable?", "directResponse": null}"#,
        );
        assert_eq!(why.validate(false), Ok(QtLabel::Query(QuestionType::UsWhy)));
        let music = qt(
            r#"{"questionType": "S-WHY-NOT", "questionArgument": ["do music lesson"], "used": "ALREADY-USED",
            "reverseTranslation": "Why is the goal **do music lesson** not satisfied?", "directResponse": null}"#,
        );
        assert_eq!(music.validate(true), Ok(QtLabel::Query(QuestionType::SWhyNot)));
        let et = qt(
            r#"{"questionType": "DIRECT-ET", "questionArgument": [""], "used": "NO-ARGUMENT-REQUIRED",
            "reverseTranslation": "", "directResponse": "yes enumerate the conflicts"}"#,
        );
        assert_eq!(et.validate(true), Ok(QtLabel::DirectEt));
    }

    #[test]
    fn co_occurrence_rules() {
        let base = qt(
            r#"{"questionType": "DIRECT-USER", "questionArgument": [""], "used": "NO-ARGUMENT-REQUIRED",
            "reverseTranslation": "", "directResponse": null}"#,
        );
        assert!(base.validate(true).is_err());
        let mut us = base.clone();
        us.question_type = "US-HOW".into();
        assert!(us.validate(false).is_ok());
        assert!(us.validate(true).is_err());
        us.question_argument = vec!["x".into()];
        assert!(us.validate(false).is_err());
        let mut s = base.clone();
        s.question_type = "S-CAN".into();
        assert!(s.validate(true).is_err(), "no argument");
        s.question_argument = vec!["x".into()];
        assert!(s.validate(true).is_err(), "NO-ARGUMENT-REQUIRED with an argument");
        s.used = Used::New;
        assert!(s.validate(true).is_ok());
        assert!(s.validate(false).is_err());
        s.question_type = "DIRECT".into();
        assert!(s.validate(true).is_err());
        assert!(TranslatorOutputQT::parse(r#"{"questionType": "S-CAN"}"#).is_err());
    }

    #[test]
    fn arguments_split_into_known_goals_and_descriptions() {
        let p = fixtures::running_example();
        let out = qt(
            r#"{"questionType": "S-CAN", "questionArgument": ["Cook Dinner", "buy shoes", "M"],
            "used": "NEW", "reverseTranslation": "", "directResponse": null}"#,
        );
        let d = route(&out, QtLabel::Query(QuestionType::SCan), "q", &p);
        assert_eq!(
            d,
            RoutingDecision::EfqueryGt {
                question_type: QuestionType::SCan,
                known: vec!["C".into(), "M".into()],
                descriptions: vec!["buy shoes".into()],
            }
        );
        let known = qt(r#"{"questionType": "S-CAN", "questionArgument": ["shopping"],
            "used": "ALREADY-USED", "reverseTranslation": "", "directResponse": null}"#);
        assert_eq!(
            route(&known, QtLabel::Query(QuestionType::SCan), "q", &p),
            RoutingDecision::EfqueryNoGt {
                question_type: QuestionType::SCan,
                args: vec!["S".into()],
            }
        );
        let wire = serde_json::to_value(&d).unwrap();
        assert_eq!(wire["route"], "EFQUERY_GT");
        assert_eq!(wire["questionType"], "S-CAN");
    }

    #[test]
    fn goal_translations() {
        let p = fixtures::transport();
        let ok = TranslatorOutputGT::parse(
            r#"{"formula": "F at(p1,packingstation)", "shortName": "p1 visits packingstation",
            "reverseTranslation": "p1 must be at the packingstation at some point during the plan", "feedback": null}"#,
        )
        .unwrap();
        match ok.interpret(&p) {
            GoalTranslation::Goal {
                formula, short_name, ..
            } => {
                assert_eq!(short_name, "p1 visits packingstation");
                assert!(matches!(formula, Ltl::Eventually(_)));
            }
            other => panic!("{other:?}"),
        }
        let unsupported = TranslatorOutputGT::parse(
            r#"{"formula": "UNSUPPORTED ; Unsupported property", "shortName": null, "reverseTranslation": null, "feedback": null}"#,
        )
        .unwrap();
        assert_eq!(
            unsupported.interpret(&p),
            GoalTranslation::Unsupported {
                reason: "Unsupported property".into()
            }
        );
        let unknown = TranslatorOutputGT::parse(
            r#"{"formula": "F at(p9,harbor)", "shortName": "p9", "reverseTranslation": null, "feedback": null}"#,
        )
        .unwrap();
        assert!(matches!(unknown.interpret(&p), GoalTranslation::Rejected { .. }));
        assert!(TranslatorOutputGT::parse(r#"{"formula": "F at(p1,harbor)", "shortName": " "}"#).is_err());
    }

    #[test]
    fn explanation_and_suggestion_shapes() {
        assert_eq!(ExplanationOutput::parse(r#"{"output": "fine"}"#).unwrap(), "fine");
        assert!(ExplanationOutput::parse(r#"{"output": ""}"#).is_err());
        assert!(ExplanationOutput::parse("fine").is_err());
        assert_eq!(Suggestions::parse(r#"["a", "b"]"#).unwrap(), ["a", "b"]);
        assert_eq!(Suggestions::parse(r#"{"questions": ["a"]}"#).unwrap(), ["a"]);
        assert!(Suggestions::parse("[]").is_err());
        assert!(Suggestions::parse(r#"["a","b","c","d"]"#).is_err());
    }
}
