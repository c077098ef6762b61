//! Service configuration from the environment.

use crate::wire::Agents;
use std::net::SocketAddr;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub addr: SocketAddr,
    pub workers: usize,
    /// Store directory; `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// Backend for projects that do not choose one.
    pub agents: Agents,
    /// Required as `Authorization: Bearer <token>` when set.
    pub token: Option<String>,
    pub prompts_dir: Option<PathBuf>,
    /// JSON-lines log of every language-model call.
    pub llm_log: Option<PathBuf>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{var}: {message}")]
pub struct ConfigError {
    pub var: &'static str,
    pub message: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            workers: std::thread::available_parallelism().map_or(2, |n| n.get()),
            data_dir: None,
            agents: Agents::Template,
            token: None,
            prompts_dir: None,
            llm_log: None,
        }
    }
}

impl Config {
    /// Reads `GOALSCOPE_ADDR`, `GOALSCOPE_PORT`, `GOALSCOPE_WORKERS`,
    /// `GOALSCOPE_DATA_DIR`, `GOALSCOPE_AGENTS`, `GOALSCOPE_TOKEN`,
    /// `GOALSCOPE_PROMPTS_DIR` and `GOALSCOPE_LLM_LOG`. Provider settings are
    /// read by the provider itself.
    pub fn from_env() -> Result<Config, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let mut c = Config::default();
        if let Some(a) = get("GOALSCOPE_ADDR") {
            c.addr = a.parse().map_err(|e| ConfigError {
                var: "GOALSCOPE_ADDR",
                message: format!("{e}"),
            })?;
        }
        if let Some(p) = get("GOALSCOPE_PORT") {
            c.addr.set_port(p.parse().map_err(|e| ConfigError {
                var: "GOALSCOPE_PORT",
                message: format!("{e}"),
            })?);
        }
        if let Some(w) = get("GOALSCOPE_WORKERS") {
            c.workers = match w.parse::<usize>() {
                Ok(n) if n > 0 => n,
                _ => {
                    return Err(ConfigError {
                        var: "GOALSCOPE_WORKERS",
                        message: format!("expected a positive integer, got `{w}`"),
                    })
                }
            };
        }
        c.data_dir = get("GOALSCOPE_DATA_DIR").filter(|d| !d.is_empty()).map(PathBuf::from);
        if let Some(a) = get("GOALSCOPE_AGENTS") {
            c.agents = match a.as_str() {
                "template" => Agents::Template,
                "llm" => Agents::Llm,
                other => {
                    return Err(ConfigError {
                        var: "GOALSCOPE_AGENTS",
                        message: format!("expected `template` or `llm`, got `{other}`"),
                    })
                }
            };
        }
        c.token = get("GOALSCOPE_TOKEN").filter(|t| !t.is_empty());
        c.prompts_dir = get("GOALSCOPE_PROMPTS_DIR").map(PathBuf::from);
        c.llm_log = get("GOALSCOPE_LLM_LOG").map(PathBuf::from);
        Ok(c)
    }
}
