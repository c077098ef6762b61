//! Loading planning tasks and mapping failures to exit codes.

use goalscope_core::conflicts::ConflictError;
use goalscope_core::fixtures;
use goalscope_core::planner::Limits;
use goalscope_core::session::{parse_goals, Mode, Project, SessionError};
use goalscope_core::templates::parse_templates;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_UNSOLVABLE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_BUDGET: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use SessionError::*;
        match self {
            CliError::Json { .. } => EXIT_PARSE,
            CliError::Session(Domain(_) | Problem(_) | Goal { .. } | GoalsFile(_) | Template(_)) => EXIT_PARSE,
            CliError::Session(Exhausted(_) | Conflicts(ConflictError::Exhausted(_))) => EXIT_BUDGET,
            _ => EXIT_FAILURE,
        }
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// A bundled fixture or domain, problem and goals files, plus an optional
/// templates file.
#[derive(Debug, Clone, Default)]
pub struct TaskSource {
    pub fixture: Option<String>,
    pub domain: Option<PathBuf>,
    pub problem: Option<PathBuf>,
    pub goals: Option<PathBuf>,
    pub templates: Option<PathBuf>,
}

impl TaskSource {
    pub fn fixture(name: &str) -> Self {
        TaskSource {
            fixture: Some(name.to_string()),
            ..Self::default()
        }
    }

    pub fn load(&self, mode: Mode) -> Result<Project, CliError> {
        if let Some(name) = &self.fixture {
            let f = fixtures::by_name(name).ok_or_else(|| CliError::UnknownFixture(name.clone()))?;
            return Ok(f.project(mode)?);
        }
        let (Some(d), Some(p), Some(g)) = (&self.domain, &self.problem, &self.goals) else {
            return Err(CliError::Usage(
                "give either --fixture or the domain, problem and goals files".into(),
            ));
        };
        let name = p
            .file_stem()
            .map_or("task".into(), |s| s.to_string_lossy().into_owned());
        let goals = parse_goals(&read(g)?)?;
        let mut project = Project::new(&name, &name, &read(d)?, &read(p)?, goals, mode)?;
        if let Some(t) = &self.templates {
            let templates = parse_templates(&read(t)?).map_err(|e| CliError::Json {
                path: t.clone(),
                message: e.to_string(),
            })?;
            project.set_templates(templates);
        }
        Ok(project)
    }
}

/// Search budget from optional flags; unset fields keep the defaults.
pub fn limits(max_expanded: Option<u64>, timeout_secs: Option<f64>) -> Limits {
    let mut l = Limits::default();
    if let Some(m) = max_expanded {
        l.max_expanded = m;
    }
    l.timeout = timeout_secs.map(Duration::from_secs_f64);
    l
}
