//! The `topotext` command line.

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::action::AngleThreshold;
use crate::canonical::NodeName;
use crate::envsim::{sample_dataset_with, EnvironmentGenerator, GeoEnvironment, PathDataset};
use crate::evaluator::{evaluate, render_table, Method, Task};
use crate::instruction::{
    generate_instruction, split_instructions, ExtractionError, ExtractionReader, GrammarReader,
    PathReader, ReadError, RetryBudget,
};
use crate::llm::{
    ChatTransport, HttpTransport, LlmClient, LlmConfig, PromptSet, RecordingTransport,
    ReplayTransport,
};
use crate::router::{find_route, RouteFailure, RouteQuery};
use crate::topo_map::{MapError, TopoMap};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const CONFLICT: i32 = 4;
    pub const UNKNOWN_NODE: i32 = 5;
    pub const NO_PATH: i32 = 6;
    pub const INSUFFICIENT: i32 = 7;
    pub const CONFIG: i32 = 8;
    pub const BACKEND: i32 = 9;
}

#[derive(Debug, Parser)]
#[command(name = "topotext", version, about = "Build topological maps from route instructions and query them")]
pub struct Cli {
    #[command(flatten)]
    pub config: CliConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    /// Deterministic parser for the instruction grammar.
    Grammar,
    /// Chat-completion service, configured by OPENAI_API_KEY, OPENAI_BASE_URL, OPENAI_MODEL.
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Reverse,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct CliConfig {
    /// How instructions are read.
    #[arg(long, global = true, value_enum, default_value_t = Backend::Grammar)]
    pub backend: Backend,
    /// Half-width of the forward sector in radians, in (0, pi/2).
    #[arg(long, global = true, value_parser = parse_theta)]
    pub theta: Option<AngleThreshold>,
    /// Paired extractor attempts per instruction (llm backend).
    #[arg(long = "max-retries", global = true, default_value_t = 3, value_parser = parse_budget)]
    pub max_retries: u32,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Record every service exchange to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub capture_transcript: Option<PathBuf>,
    /// Answer service calls from this transcript instead of the network.
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "capture_transcript")]
    pub replay_transcript: Option<PathBuf>,
    /// JSON file overriding the default prompts.
    #[arg(long, global = true, value_name = "FILE")]
    pub prompts: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print each instruction in FILE as a canonical path, one JSON object per line.
    Parse { file: PathBuf },
    /// Compile the instructions in FILE into a map file.
    Build {
        file: PathBuf,
        #[arg(long, value_name = "MAP")]
        out: PathBuf,
        /// Add to the map already at --out instead of starting empty.
        #[arg(long)]
        extend: bool,
    },
    /// Find a route on a map and describe it.
    Query {
        map: PathBuf,
        start: String,
        goal: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generate a synthetic environment.
    GenEnv {
        #[arg(long, default_value_t = 15)]
        nodes: usize,
        #[arg(long, default_value_t = 8)]
        designated: usize,
        /// Write here instead of standard output.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Sample a ten-path dataset from an environment.
    Sample {
        env: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Evaluate a method on one or more datasets.
    Eval {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = TaskArg::Combined)]
        task: TaskArg,
        #[arg(long, value_enum, default_value_t = MethodArg::Explicit)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn parse_theta(s: &str) -> Result<AngleThreshold, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    AngleThreshold::new(v).map_err(|e| e.to_string())
}

fn parse_budget(s: &str) -> Result<u32, String> {
    let v: u32 = s.parse().map_err(|e| format!("{e}"))?;
    RetryBudget::new(v).map(RetryBudget::get).map_err(|e| e.to_string())
}

/// An error with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Display) -> Self {
        Failure { code, message: message.to_string() }
    }
}

fn read_code(e: &ReadError) -> i32 {
    match e {
        ReadError::Extraction(ExtractionError::Backend { .. }) => exit::BACKEND,
        _ => exit::PARSE,
    }
}

fn route_code(f: &RouteFailure) -> i32 {
    match f {
        RouteFailure::UnknownNode(_) => exit::UNKNOWN_NODE,
        RouteFailure::NoPath { .. } => exit::NO_PATH,
        RouteFailure::InsufficientInformation { .. } => exit::INSUFFICIENT,
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the same directory, so readers never
/// see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::new(exit::IO, format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: &mut dyn Write, path: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => out
            .write_all(contents.as_bytes())
            .map_err(|e| Failure::new(exit::IO, e)),
    }
}

/// The service connection, if one is needed, plus the recorder to flush.
struct Session {
    config: CliConfig,
    client: Option<Arc<LlmClient>>,
    recorder: Option<Arc<RecordingTransport<HttpTransport>>>,
}

impl Session {
    fn new(config: CliConfig) -> Self {
        Session { config, client: None, recorder: None }
    }

    fn theta(&self) -> AngleThreshold {
        self.config.theta.unwrap_or_default()
    }

    fn client(&mut self) -> Result<Arc<LlmClient>, Failure> {
        if let Some(c) = &self.client {
            return Ok(c.clone());
        }
        let config_err = |e: crate::llm::LlmError| Failure::new(exit::CONFIG, e);
        let prompts = match &self.config.prompts {
            Some(p) => PromptSet::from_file(p).map_err(config_err)?,
            None => PromptSet::default(),
        };
        let client = if let Some(path) = &self.config.replay_transcript {
            let replay = ReplayTransport::from_file(path).map_err(config_err)?;
            LlmClient::new(&LlmConfig::offline(), prompts, Box::new(replay))
        } else {
            let config = LlmConfig::from_env().map_err(|e| {
                Failure::new(
                    exit::CONFIG,
                    format!("{e}; set the service credentials or pass --replay-transcript"),
                )
            })?;
            let http = HttpTransport::new(&config.base_url, &config.api_key, config.timeout)
                .map_err(config_err)?;
            let transport: Box<dyn ChatTransport> = if self.config.capture_transcript.is_some() {
                let recorder = Arc::new(RecordingTransport::new(http));
                self.recorder = Some(recorder.clone());
                Box::new(recorder)
            } else {
                Box::new(http)
            };
            LlmClient::new(&config, prompts, transport)
        };
        let client = Arc::new(client);
        self.client = Some(client.clone());
        Ok(client)
    }

    fn reader(&mut self) -> Result<Box<dyn PathReader>, Failure> {
        match self.config.backend {
            Backend::Grammar => Ok(Box::new(GrammarReader)),
            Backend::Llm => {
                let backend = self.client()?;
                let budget = RetryBudget::new(self.config.max_retries).expect("validated by clap");
                Ok(Box::new(ExtractionReader { backend, budget, label: "llm".into() }))
            }
        }
    }

    fn finish(&self) -> Result<(), Failure> {
        if let (Some(rec), Some(path)) = (&self.recorder, &self.config.capture_transcript) {
            rec.save(path).map_err(|e| Failure::new(exit::IO, e))?;
        }
        Ok(())
    }
}

/// Runs the command line and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut session = Session::new(cli.config);
    let result = dispatch(&mut session, cli.command, out, err);
    let saved = session.finish();
    match saved.and(result) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(session: &mut Session, command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Parse { file } => cmd_parse(session, &file, out, err),
        Command::Build { file, out: map, extend } => cmd_build(session, &file, &map, extend, err),
        Command::Query { map, start, goal, format } => cmd_query(&map, &start, &goal, format, out),
        Command::GenEnv { nodes, designated, out: path } => {
            let generator = EnvironmentGenerator { theta: session.theta(), ..Default::default() };
            let env = generator
                .generate(session.config.seed, nodes, designated)
                .map_err(|e| Failure::new(exit::USAGE, e))?;
            emit(out, path.as_deref(), &env.to_json())?;
            Ok(exit::OK)
        }
        Command::Sample { env, out: path } => {
            let env = GeoEnvironment::from_json(&read_file(&env)?)
                .map_err(|e| Failure::new(exit::PARSE, format!("{}: {e}", env.display())))?;
            let dataset = sample_dataset_with(&env, session.config.seed, session.theta())
                .map_err(|e| Failure::new(exit::USAGE, e))?;
            emit(out, path.as_deref(), &dataset.to_json())?;
            Ok(exit::OK)
        }
        Command::Eval { datasets, task, method, format } => cmd_eval(session, &datasets, task, method, format, out),
    }
}

fn cmd_parse(session: &mut Session, file: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let text = read_file(file)?;
    let entries = split_instructions(&text);
    if entries.is_empty() {
        return Ok(exit::OK);
    }
    let reader = session.reader()?;
    let mut code = exit::OK;
    for entry in entries {
        match reader.read(&entry.text) {
            Ok(path) => {
                writeln!(out, "{}", path.to_json()).map_err(|e| Failure::new(exit::IO, e))?;
            }
            Err(e) => {
                let _ = writeln!(err, "{}:{}: {e}", file.display(), entry.line);
                if code == exit::OK {
                    code = read_code(&e);
                }
            }
        }
    }
    Ok(code)
}

fn cmd_build(session: &mut Session, file: &Path, map_path: &Path, extend: bool, err: &mut dyn Write) -> Result<i32, Failure> {
    let text = read_file(file)?;
    let mut map = if extend && map_path.exists() {
        TopoMap::from_json(&read_file(map_path)?)
            .map_err(|e| Failure::new(exit::PARSE, format!("{}: {e}", map_path.display())))?
    } else {
        TopoMap::new()
    };
    let entries = split_instructions(&text);
    let reader = if entries.is_empty() { None } else { Some(session.reader()?) };
    for entry in &entries {
        let at = format!("{}:{}", file.display(), entry.line);
        let path = reader
            .as_ref()
            .expect("entries exist")
            .read(&entry.text)
            .map_err(|e| Failure::new(read_code(&e), format!("{at}: {e}")))?;
        map.add_path(&path).map_err(|e| match e {
            MapError::Conflict(c) => Failure::new(exit::CONFLICT, format!("{at}: {c}; map not written")),
            other => Failure::new(exit::PARSE, format!("{at}: {other}")),
        })?;
    }
    write_atomic(map_path, &map.to_json())?;
    let _ = writeln!(
        err,
        "{}: {} nodes, {} edges, {} stored actions",
        map_path.display(),
        map.node_count(),
        map.edge_count(),
        map.stored_action_count()
    );
    Ok(exit::OK)
}

fn cmd_query(map_path: &Path, start: &str, goal: &str, format: Format, out: &mut dyn Write) -> Result<i32, Failure> {
    let map = TopoMap::from_json(&read_file(map_path)?)
        .map_err(|e| Failure::new(exit::PARSE, format!("{}: {e}", map_path.display())))?;
    let name = |s: &str| NodeName::new(s).map_err(|e| Failure::new(exit::USAGE, format!("{s:?}: {e}")));
    let query = RouteQuery::new(name(start)?, name(goal)?).map_err(|e| Failure::new(exit::USAGE, e))?;
    let route = find_route(&map, &query)
        .map_err(|f| Failure::new(route_code(&f), format!("{}: {f}", f.kind())))?;
    let text = match format {
        Format::Text => generate_instruction(&route).expect("routes are valid paths"),
        Format::Json => route.to_json(),
    };
    writeln!(out, "{text}").map_err(|e| Failure::new(exit::IO, e))?;
    Ok(exit::OK)
}

fn cmd_eval(
    session: &mut Session,
    files: &[PathBuf],
    task: TaskArg,
    method: MethodArg,
    format: Format,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut datasets = Vec::new();
    for f in files {
        let d = PathDataset::from_json(&read_file(f)?)
            .map_err(|e| Failure::new(exit::PARSE, format!("{}: {e}", f.display())))?;
        datasets.push(d);
    }
    let task = match task {
        TaskArg::Reverse => Task::Reverse,
        TaskArg::Combined => Task::Combined,
    };
    let report = match method {
        MethodArg::Explicit => {
            let reader = session.reader()?;
            evaluate(&datasets, task, &Method::Explicit(reader.as_ref()))
        }
        MethodArg::Implicit => {
            let client = session.client()?;
            evaluate(&datasets, task, &Method::Implicit { model: client.as_ref(), label: "llm".into() })
        }
    };
    let text = match format {
        Format::Text => render_table(std::slice::from_ref(&report)),
        Format::Json => report.to_json(),
    };
    out.write_all(text.as_bytes()).map_err(|e| Failure::new(exit::IO, e))?;
    Ok(exit::OK)
}
