//! STRIPS task representation: lifted PDDL-subset input, grounding, states and
//! plan execution.

mod ground;
mod pddl;
pub mod sexpr;
mod state;

pub use ground::{ground, ActionId, AtomId, GroundAction, GroundTask};
pub use pddl::{parse_domain, parse_problem, PddlError, PddlErrorKind};
pub use state::{Plan, RunError, State, Trace};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Root of every type hierarchy.
pub const ROOT_TYPE: &str = "object";

/// A ground predicate: all arguments are object names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        Atom {
            predicate: predicate.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// PDDL rendering, e.g. `(at p0 postoffice)`.
    pub fn to_pddl(&self) -> String {
        if self.args.is_empty() {
            format!("({})", self.predicate)
        } else {
            format!("({} {})", self.predicate, self.args.join(" "))
        }
    }
}

/// Renders in the LTLf surface syntax, e.g. `at(p0,postoffice)`.
impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedParam {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
}

impl PredicateSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// `(at ?o - object ?l - location)`
impl fmt::Display for PredicateSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for p in &self.params {
            write!(f, " {} - {}", p.name, p.ty)?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectConst {
    pub name: String,
    pub ty: String,
}

/// Single-inheritance type tree rooted at `object`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeTree {
    parent: BTreeMap<String, String>,
}

impl TypeTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.parent.contains_key(ty)
    }

    pub(crate) fn declare(&mut self, ty: &str, parent: &str) {
        if ty != ROOT_TYPE {
            self.parent.insert(ty.to_string(), parent.to_string());
        }
    }

    /// True iff `ty` equals `ancestor` or descends from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut cur = ty;
        // Bounded walk guards against cycles in malformed declarations.
        for _ in 0..=self.parent.len() {
            if cur == ancestor {
                return true;
            }
            match self.parent.get(cur) {
                Some(p) => cur = p,
                None => return ancestor == ROOT_TYPE,
            }
        }
        false
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        std::iter::once(ROOT_TYPE).chain(self.parent.keys().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedAtom {
    pub predicate: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
    pub pre: Vec<LiftedAtom>,
    pub add: Vec<LiftedAtom>,
    pub del: Vec<LiftedAtom>,
}

/// Parsed domain file: the task fragment without objects or initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDef {
    pub name: String,
    pub types: TypeTree,
    pub constants: Vec<ObjectConst>,
    pub predicates: Vec<PredicateSchema>,
    pub schemas: Vec<ActionSchema>,
}

impl DomainDef {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }
}

/// A lifted task. Problem-file goals are kept for reference only and never
/// enforced by the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedTask {
    pub domain: DomainDef,
    pub problem_name: String,
    /// Domain constants followed by problem objects.
    pub objects: Vec<ObjectConst>,
    pub init: Vec<Atom>,
    pub advisory_goals: Vec<Atom>,
}
