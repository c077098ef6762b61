//! Agent prompts. The texts ship as data files; a project can swap in its own
//! files, typically to replace the domain-specific example blocks.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    QuestionTranslator,
    GoalTranslator,
    ExplanationTranslator,
    QuestionSuggester,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::QuestionTranslator,
        Role::GoalTranslator,
        Role::ExplanationTranslator,
        Role::QuestionSuggester,
    ];

    pub fn stem(self) -> &'static str {
        match self {
            Role::QuestionTranslator => "question_translator",
            Role::GoalTranslator => "goal_translator",
            Role::ExplanationTranslator => "explanation_translator",
            Role::QuestionSuggester => "question_suggester",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.stem())
    }
}

/// Instruction text (with an `${EXAMPLES}` slot), example block and input
/// template of one agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolePrompt {
    pub instructions: String,
    pub examples: String,
    pub input: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompts {
    pub system: String,
    roles: [RolePrompt; 4],
}

macro_rules! bundled {
    ($stem:literal) => {
        RolePrompt {
            instructions: include_str!(concat!("../prompts/", $stem, ".txt")).to_string(),
            examples: include_str!(concat!("../prompts/", $stem, ".examples.txt")).to_string(),
            input: include_str!(concat!("../prompts/", $stem, ".input.txt")).to_string(),
        }
    };
}

impl Default for Prompts {
    fn default() -> Self {
        Prompts {
            system: include_str!("../prompts/system.txt").to_string(),
            roles: [
                bundled!("question_translator"),
                bundled!("goal_translator"),
                bundled!("explanation_translator"),
                bundled!("question_suggester"),
            ],
        }
    }
}

impl Prompts {
    /// Bundled prompts with any file present in `dir` taking precedence.
    /// File names follow the bundled layout: `system.txt`, `<role>.txt`,
    /// `<role>.examples.txt`, `<role>.input.txt`.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Prompts> {
        let mut p = Prompts::default();
        let read = |name: String, slot: &mut String| -> std::io::Result<()> {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
            Ok(())
        };
        read("system.txt".into(), &mut p.system)?;
        for role in Role::ALL {
            let r = &mut p.roles[role.index()];
            read(format!("{}.txt", role.stem()), &mut r.instructions)?;
            read(format!("{}.examples.txt", role.stem()), &mut r.examples)?;
            read(format!("{}.input.txt", role.stem()), &mut r.input)?;
        }
        Ok(p)
    }

    pub fn role(&self, role: Role) -> &RolePrompt {
        &self.roles[role.index()]
    }

    /// System prefix followed by the agent's instructions with its examples.
    pub fn system_for(&self, role: Role) -> String {
        let r = self.role(role);
        let body = fill(&r.instructions, &[("EXAMPLES", r.examples.trim_end())]);
        format!("{}\n\n{}", self.system.trim_end(), body.trim_end())
    }

    pub fn input_for(&self, role: Role, values: &[(&str, &str)]) -> String {
        fill(&self.role(role).input, values).trim_end().to_string()
    }
}

/// Replaces every `${KEY}` by its value; unknown slots stay as they are.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    values
        .iter()
        .fold(template.to_string(), |acc, (k, v)| acc.replace(&format!("${{{k}}}"), v))
}

/// `[a, b]`
pub fn list(names: &[String]) -> String {
    format!("[{}]", names.join(", "))
}

/// `[[a, b], [c]]`
pub fn family(sets: &[Vec<String>]) -> String {
    format!("[{}]", sets.iter().map(|s| list(s)).collect::<Vec<_>>().join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_slot_is_filled_by_the_default_layout() {
        let p = Prompts::default();
        for role in Role::ALL {
            let s = p.system_for(role);
            assert!(s.starts_with("You are helping a user to solve a planning task."));
            assert!(!s.contains("${"), "{role}");
        }
        assert!(p
            .system_for(Role::QuestionSuggester)
            .ends_with("use conversational language"));
        assert!(p
            .system_for(Role::QuestionTranslator)
            .contains("\"questionArgument\": [\"do music lesson\"]"));
    }

    #[test]
    fn input_templates_keep_their_field_order() {
        let p = Prompts::default();
        let s = p.input_for(
            Role::QuestionTranslator,
            &[
                ("QUESTION", "Why?"),
                ("ENFORCED_GOALS", "[a]"),
                ("SATISFIED_GOALS", "[a]"),
                ("UNSATISFIED_GOALS", "[]"),
                ("SOLVABLE", "True"),
            ],
        );
        assert_eq!(
            s,
            "Question: Why?\n\nEnforced Goals: [a]\n\nSatisfied Goals: [a]\n\nUnsatisfied Goals: []\n\nSolvable: True\n\nReturn:"
        );
        assert_eq!(family(&[vec!["a".into(), "b".into()], vec![]]), "[[a, b], []]");
    }

    #[test]
    fn overrides_replace_single_files() {
        let dir = std::env::temp_dir().join(format!("prompts-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("goal_translator.examples.txt"), "Examples : none").unwrap();
        let p = Prompts::with_overrides(&dir).unwrap();
        assert!(p
            .system_for(Role::GoalTranslator)
            .contains("Examples : none\n\nEnd of the examples."));
        assert_eq!(
            p.role(Role::QuestionTranslator),
            Prompts::default().role(Role::QuestionTranslator)
        );
        std::fs::remove_dir_all(dir).unwrap();
    }
}
