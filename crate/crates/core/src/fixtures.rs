//! Bundled planning tasks: the family afternoon instances and a small
//! transport task.

use crate::session::{parse_goals, Mode, Project, SessionError};
use crate::templates::parse_templates;

pub const AFTERNOON_DOMAIN: &str = include_str!("../fixtures/afternoon/domain.pddl");
pub const RUNNING_PROBLEM: &str = include_str!("../fixtures/afternoon/running.pddl");
pub const RUNNING_GOALS: &str = include_str!("../fixtures/afternoon/running-goals.json");
pub const INTRODUCTION_PROBLEM: &str = include_str!("../fixtures/afternoon/introduction.pddl");
pub const INTRODUCTION_GOALS: &str = include_str!("../fixtures/afternoon/introduction-goals.json");
pub const EVALUATION_PROBLEM: &str = include_str!("../fixtures/afternoon/evaluation.pddl");
pub const EVALUATION_GOALS: &str = include_str!("../fixtures/afternoon/evaluation-goals.json");
pub const TRANSPORT_DOMAIN: &str = include_str!("../fixtures/transport/domain.pddl");
pub const TRANSPORT_PROBLEM: &str = include_str!("../fixtures/transport/problem.pddl");
pub const TRANSPORT_GOALS: &str = include_str!("../fixtures/transport/goals.json");
pub const TRANSPORT_TEMPLATES: &str = include_str!("../fixtures/transport/templates.json");

/// A bundled task: domain, problem and goals file contents.
#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub domain: &'static str,
    pub problem: &'static str,
    pub goals: &'static str,
    /// Goal templates file; `[]` when the domain has none.
    pub templates: &'static str,
}

pub const RUNNING: Fixture = Fixture {
    name: "running",
    domain: AFTERNOON_DOMAIN,
    problem: RUNNING_PROBLEM,
    goals: RUNNING_GOALS,
    templates: "[]",
};

pub const INTRODUCTION: Fixture = Fixture {
    name: "introduction",
    domain: AFTERNOON_DOMAIN,
    problem: INTRODUCTION_PROBLEM,
    goals: INTRODUCTION_GOALS,
    templates: "[]",
};

pub const EVALUATION: Fixture = Fixture {
    name: "evaluation",
    domain: AFTERNOON_DOMAIN,
    problem: EVALUATION_PROBLEM,
    goals: EVALUATION_GOALS,
    templates: "[]",
};

pub const TRANSPORT: Fixture = Fixture {
    name: "transport",
    domain: TRANSPORT_DOMAIN,
    problem: TRANSPORT_PROBLEM,
    goals: TRANSPORT_GOALS,
    templates: TRANSPORT_TEMPLATES,
};

pub const ALL: [Fixture; 4] = [RUNNING, INTRODUCTION, EVALUATION, TRANSPORT];

pub fn by_name(name: &str) -> Option<Fixture> {
    ALL.into_iter().find(|f| f.name == name)
}

impl Fixture {
    pub fn project(&self, mode: Mode) -> Result<Project, SessionError> {
        let mut p = Project::new(
            self.name,
            self.name,
            self.domain,
            self.problem,
            parse_goals(self.goals)?,
            mode,
        )?;
        p.set_templates(parse_templates(self.templates).map_err(|e| SessionError::GoalsFile(e.to_string()))?);
        Ok(p)
    }
}

/// Shopping (S), cooking dinner (C) and a sports match (M); C and M share
/// the evening slot.
pub fn running_example() -> Project {
    RUNNING.project(Mode::Demo).expect("bundled fixture")
}

/// Eight goals, car for two.
pub fn intro_instance() -> Project {
    INTRODUCTION.project(Mode::Demo).expect("bundled fixture")
}

/// Nineteen goals, car for three.
pub fn eval_instance() -> Project {
    EVALUATION.project(Mode::Demo).expect("bundled fixture")
}

pub fn transport() -> Project {
    TRANSPORT.project(Mode::Free).expect("bundled fixture")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_loads() {
        for f in ALL {
            let p = f.project(Mode::Free).unwrap();
            assert!(!p.goals().is_empty(), "{}", f.name);
        }
        assert!(by_name("introduction").is_some());
        assert!(by_name("nope").is_none());
    }
}
