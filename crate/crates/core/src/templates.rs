//! Goal templates: a sentence and a formula over typed parameters. A goal is
//! instantiated by choosing one object per parameter.

use crate::ltlf::{parse_ltlf, Ltl, LtlError};
use crate::model::GroundTask;
use crate::session::compile_goal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateParam {
    /// Referenced as `$name` in the description, formula and constraints.
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoalTemplate {
    pub id: String,
    pub description: String,
    pub formula: String,
    pub params: Vec<TemplateParam>,
    /// Atoms that must hold in the initial state.
    #[serde(default)]
    pub init_true: Vec<String>,
    /// Atoms that must not hold in the initial state.
    #[serde(default)]
    pub init_false: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` has no parameter `{param}`")]
    UnknownParam { template: String, param: String },
    #[error("parameter `{0}` is not bound")]
    Unbound(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("object `{object}` is not a {ty}")]
    WrongType { object: String, ty: String },
    #[error("`{atom}` must {} hold initially", if *.expected { "" } else { "not" })]
    InitialState { atom: String, expected: bool },
    #[error("constraint `{0}` is not an atom")]
    NotAnAtom(String),
    #[error(transparent)]
    Formula(#[from] LtlError),
}

/// A template filled with objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub short_name: String,
    pub formula_text: String,
    pub formula: Ltl,
}

/// Parses a templates file: a JSON array of templates.
pub fn parse_templates(text: &str) -> Result<Vec<GoalTemplate>, serde_json::Error> {
    serde_json::from_str(text)
}

impl GoalTemplate {
    /// Objects allowed for `param` by type alone.
    pub fn candidates(&self, task: &GroundTask, param: &str) -> Vec<String> {
        let Some(p) = self.params.iter().find(|p| p.name == param) else {
            return Vec::new();
        };
        task.objects
            .iter()
            .filter(|o| task.types.is_subtype(&o.ty, &p.ty))
            .map(|o| o.name.clone())
            .collect()
    }

    /// Replaces `$name` slots, longest names first so `$P` never eats `$Pi`.
    fn substitute(&self, text: &str, binding: &BTreeMap<String, String>) -> String {
        let mut names: Vec<&TemplateParam> = self.params.iter().collect();
        names.sort_by_key(|p| std::cmp::Reverse(p.name.len()));
        names.iter().fold(text.to_string(), |acc, p| {
            acc.replace(&format!("${}", p.name), &binding[&p.name])
        })
    }

    pub fn instantiate(
        &self,
        task: &GroundTask,
        binding: &BTreeMap<String, String>,
    ) -> Result<Instance, TemplateError> {
        if let Some(extra) = binding.keys().find(|k| !self.params.iter().any(|p| &p.name == *k)) {
            return Err(TemplateError::UnknownParam {
                template: self.id.clone(),
                param: extra.clone(),
            });
        }
        for p in &self.params {
            let object = binding
                .get(&p.name)
                .ok_or_else(|| TemplateError::Unbound(p.name.clone()))?;
            let o = task
                .objects
                .iter()
                .find(|o| &o.name == object)
                .ok_or_else(|| TemplateError::UnknownObject(object.clone()))?;
            if !task.types.is_subtype(&o.ty, &p.ty) {
                return Err(TemplateError::WrongType {
                    object: object.clone(),
                    ty: p.ty.clone(),
                });
            }
        }
        for (atoms, expected) in [(&self.init_true, true), (&self.init_false, false)] {
            for a in atoms {
                let text = self.substitute(a, binding);
                let Ltl::Atom(id) = parse_ltlf(&text, task)? else {
                    return Err(TemplateError::NotAnAtom(text));
                };
                if task.init.contains(id) != expected {
                    return Err(TemplateError::InitialState { atom: text, expected });
                }
            }
        }
        let formula_text = self.substitute(&self.formula, binding);
        let formula = compile_goal(&formula_text, task)?;
        let objects: Vec<&str> = self.params.iter().map(|p| binding[&p.name].as_str()).collect();
        Ok(Instance {
            id: format!("{}-{}", self.id, objects.join("-")),
            short_name: self.substitute(&self.description, binding),
            formula_text,
            formula,
        })
    }
}
