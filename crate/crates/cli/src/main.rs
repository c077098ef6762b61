use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use goalscope_agents::prompts::Prompts;
use goalscope_agents::{Conversation, Dispatcher, HttpProvider, LoggedProvider, Provider, UserInput};
use goalscope_cli::replay;
use goalscope_cli::report::{step_table, ConflictReport};
use goalscope_cli::task::{self, read_json, CliError, TaskSource, EXIT_BUDGET, EXIT_FAILURE, EXIT_UNSOLVABLE};
use goalscope_core::efcc::QuestionType;
use goalscope_core::session::{Mode, Project, StepStatus};
use goalscope_service::wire::Agents;
use goalscope_service::{App, Config, DocumentStore, FileStore, MemoryStore, Options};
use serde::Deserialize;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "goalscope",
    version,
    about = "Goal-conflict explanations for iterative planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerates minimal conflicts and corrections over the goals.
    Analyze {
        #[command(flatten)]
        task: TaskArgs,
        /// Restricts the analysis to these goal ids.
        #[arg(long, value_delimiter = ',')]
        reference: Vec<String>,
        /// Prints only the JSON document.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        budget: Budget,
    },
    /// Plans for a set of enforced goals.
    Plan {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        enforce: Vec<String>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Answers a question about a step described by a JSON file.
    Ask {
        step: PathBuf,
        /// Question type such as S-how or US-WHY.
        #[arg(long = "type")]
        qtype: String,
        /// Argument goals, by id or short name.
        #[arg(long, value_delimiter = ',')]
        args: Vec<String>,
    },
    /// Computes the demo artifacts: all conflicts and the best utility.
    DemoPrecompute {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the HTTP service.
    Serve {
        /// Overrides GOALSCOPE_ADDR.
        #[arg(long)]
        addr: Option<SocketAddr>,
        /// Overrides GOALSCOPE_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Overrides GOALSCOPE_WORKERS.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Replays conversation scripts against scripted translators.
    Replay {
        #[arg(required = true)]
        scripts: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct TaskArgs {
    /// A bundled task instead of the three files.
    #[arg(long, conflicts_with_all = ["domain", "problem", "goals"])]
    fixture: Option<String>,
    domain: Option<PathBuf>,
    problem: Option<PathBuf>,
    goals: Option<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
}

impl TaskArgs {
    fn source(&self) -> TaskSource {
        TaskSource {
            fixture: self.fixture.clone(),
            domain: self.domain.clone(),
            problem: self.problem.clone(),
            goals: self.goals.clone(),
            templates: self.templates.clone(),
        }
    }
}

#[derive(Args)]
struct Budget {
    /// Maximum search nodes per planner call.
    #[arg(long)]
    max_expanded: Option<u64>,
    /// Wall-clock limit per planner call, in seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

/// A step to ask about. Task file paths are relative to the bundle.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct StepBundle {
    fixture: Option<String>,
    domain: Option<PathBuf>,
    problem: Option<PathBuf>,
    goals: Option<PathBuf>,
    templates: Option<PathBuf>,
    enforce: Vec<String>,
    /// Defaults to every goal.
    reference: Option<Vec<String>>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn,goalscope=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<CliError>()
                .map(CliError::exit_code)
                .or_else(|| e.downcast_ref::<replay::ReplayError>().map(|r| r.exit_code()))
                .unwrap_or(EXIT_FAILURE);
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analyze {
            task,
            reference,
            json,
            budget,
        } => analyze(&task, &reference, json, &budget),
        Command::Plan { task, enforce, budget } => plan(&task, &enforce, &budget),
        Command::Ask { step, qtype, args } => ask(&step, &qtype, &args),
        Command::DemoPrecompute { task, out } => demo_precompute(&task, out.as_deref()),
        Command::Serve {
            addr,
            data_dir,
            workers,
        } => serve(addr, data_dir, workers),
        Command::Replay { scripts } => replay_all(&scripts),
    }
}

fn load(task: &TaskArgs, budget: &Budget) -> Result<Project, CliError> {
    let mut p = task.source().load(Mode::Free)?;
    p.set_limits(task::limits(budget.max_expanded, budget.timeout));
    Ok(p)
}

fn analyze(task: &TaskArgs, reference: &[String], json: bool, budget: &Budget) -> Result<u8> {
    let p = load(task, budget)?;
    let set = if reference.is_empty() {
        p.set_of(&p.goals().iter().map(|g| g.id.clone()).collect::<Vec<_>>())
    } else {
        p.set_of(reference)
    }
    .map_err(CliError::from)?;
    let data = p.conflicts_for(set).map_err(CliError::from)?;
    let report = ConflictReport::new(&p, &data);
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !json {
        println!("\n{}", report.table());
    }
    Ok(if report.incomplete { EXIT_BUDGET } else { 0 })
}

fn plan(task: &TaskArgs, enforce: &[String], budget: &Budget) -> Result<u8> {
    let mut p = load(task, budget)?;
    let ids = resolve(&p, enforce)?;
    let reference: Vec<String> = p.goals().iter().map(|g| g.id.clone()).collect();
    let id = p
        .create_step(&ids, &reference, None)
        .map_err(CliError::from)?
        .id
        .clone();
    let step = p.run_step(&id).map_err(CliError::from)?;
    println!("{}", step_table(step));
    Ok(match step.status {
        StepStatus::Solvable => 0,
        StepStatus::Unsolvable => EXIT_UNSOLVABLE,
        StepStatus::Failed => EXIT_BUDGET,
        StepStatus::Pending => EXIT_FAILURE,
    })
}

fn resolve(p: &Project, names: &[String]) -> Result<Vec<String>, CliError> {
    names
        .iter()
        .map(|n| {
            p.resolve_goal_name(n)
                .map(|g| g.id.clone())
                .ok_or_else(|| CliError::Usage(format!("unknown goal `{n}`")))
        })
        .collect()
}

fn ask(path: &Path, qtype: &str, args: &[String]) -> Result<u8> {
    let bundle: StepBundle = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Option<PathBuf>| p.as_ref().map(|p| base.join(p));
    let source = TaskSource {
        fixture: bundle.fixture.clone(),
        domain: rel(&bundle.domain),
        problem: rel(&bundle.problem),
        goals: rel(&bundle.goals),
        templates: rel(&bundle.templates),
    };
    let mut p = source.load(Mode::Free)?;
    let question_type = QuestionType::from_label(qtype)
        .filter(|q| q.is_solvable_type() || q.is_unsolvable_type())
        .ok_or_else(|| CliError::Usage(format!("unknown question type `{qtype}`")))?;
    let enforce = resolve(&p, &bundle.enforce)?;
    let reference = match &bundle.reference {
        Some(r) => resolve(&p, r)?,
        None => p.goals().iter().map(|g| g.id.clone()).collect(),
    };
    let args = resolve(&p, args)?;
    let id = p
        .create_step(&enforce, &reference, None)
        .map_err(CliError::from)?
        .id
        .clone();
    p.run_step(&id).map_err(CliError::from)?;
    let turn = Dispatcher::template().dispatch(
        &mut p,
        &mut Conversation::default(),
        &id,
        UserInput::Menu { question_type, args },
    )?;
    println!("{}", serde_json::to_string_pretty(&turn.bundles)?);
    println!("\n{}", turn.answer);
    Ok(if turn.degraded { EXIT_FAILURE } else { 0 })
}

fn demo_precompute(task: &TaskArgs, out: Option<&Path>) -> Result<u8> {
    let p = task.source().load(Mode::Demo)?;
    let demo = p.precompute_demo().map_err(CliError::from)?;
    let text = serde_json::to_string_pretty(&demo)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    eprintln!("{}", ConflictReport::new(&p, &demo.conflicts).headline());
    Ok(if demo.conflicts.incomplete { EXIT_BUDGET } else { 0 })
}

fn serve(addr: Option<SocketAddr>, data_dir: Option<PathBuf>, workers: Option<usize>) -> Result<u8> {
    let mut config = Config::from_env()?;
    config.addr = addr.unwrap_or(config.addr);
    config.data_dir = data_dir.or(config.data_dir);
    config.workers = workers.unwrap_or(config.workers);
    let store: Arc<dyn DocumentStore> = match &config.data_dir {
        Some(dir) => Arc::new(FileStore::open(dir)?),
        None => Arc::new(MemoryStore::new()),
    };
    let mut opts = Options::new(store);
    opts.workers = config.workers;
    opts.agents = config.agents;
    if let Some(dir) = &config.prompts_dir {
        opts.prompts =
            Prompts::with_overrides(dir).with_context(|| format!("reading prompts from {}", dir.display()))?;
    }
    match HttpProvider::from_env() {
        Ok(http) => {
            let provider: Arc<dyn Provider> = match &config.llm_log {
                Some(log) => Arc::new(LoggedProvider::new(http, log)?),
                None => Arc::new(http),
            };
            opts.provider = Some(provider);
        }
        Err(e) if config.agents == Agents::Llm => bail!("language-model agents need a provider: {e}"),
        Err(e) => tracing::info!("language-model agents unavailable: {e}"),
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let app = App::open(opts)?;
        let listener = tokio::net::TcpListener::bind(config.addr).await?;
        tracing::info!("listening on {}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        goalscope_service::serve(listener, app, config.token, shutdown).await?;
        anyhow::Ok(0)
    })
}

fn replay_all(paths: &[PathBuf]) -> Result<u8> {
    let mut failed = 0;
    for path in paths {
        let script = replay::load(path)?;
        let report = replay::run(&script)?;
        for line in report.lines() {
            println!("{line}");
        }
        if !report.passed() {
            failed += 1;
        }
    }
    println!("{} script(s), {failed} failed", paths.len());
    Ok(if failed == 0 { 0 } else { EXIT_FAILURE })
}
