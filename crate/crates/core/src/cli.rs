//! Command-line surface: `validate`, `plan`, `deploy` and `convert`.
//!
//! Every command returns an [`ExitStatus`]; diagnostics go to standard
//! output prefixed with `error:`. Output files are written to a temporary
//! file next to the destination and renamed into place only on success.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::backends::{Deployer, MockRuntime, RuntimeKind};
use crate::engine::{self, EngineConfig, Outcome};
use crate::frontends::{emit_native, parse_adl_from, parse_native_from, ParseDiagnostic};
use crate::model::Configuration;
use crate::planner::{
    compile, graph_to_dot, DependencyEdge, InterfaceKind, PlanError, TaskGraph, TaskId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitStatus {
    Success = 0,
    ParseError = 1,
    ValidationError = 2,
    CompileError = 3,
    CycleDetected = 4,
    TaskFailure = 5,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Native,
    Adl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetFormat {
    Native,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Flat,
    Hier,
}

impl From<Backend> for RuntimeKind {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Flat => RuntimeKind::Flat,
            Backend::Hier => RuntimeKind::Hierarchical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanOutput {
    Dot,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "polydeploy",
    version,
    about = "Configure and deploy component-based applications"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a configuration.
    Validate {
        file: PathBuf,
        /// Input format; inferred from the extension when omitted (.xml/.adl = adl).
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Print the deployment task graph.
    Plan {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, value_enum, default_value = "hier")]
        backend: Backend,
        #[arg(long, value_enum, default_value = "dot")]
        out: PlanOutput,
    },
    /// Deploy against a simulated runtime.
    Deploy {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, value_enum, default_value = "hier")]
        backend: Backend,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        workers: u32,
        /// Write the execution trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the final runtime snapshot here.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Make the named task fail (test hook).
        #[arg(long, value_name = "TASK_ID")]
        fail_task: Option<String>,
        /// Add a dependency edge FROM -> TO before running (test hook).
        #[arg(long, num_args = 2, value_names = ["FROM", "TO"], hide = true)]
        inject_edge: Vec<String>,
    },
    /// Translate a configuration into another description language.
    Convert {
        file: PathBuf,
        #[arg(long, value_enum)]
        from: Option<Format>,
        #[arg(long, value_enum, default_value = "native")]
        to: TargetFormat,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(out, "{e}");
            return if e.use_stderr() {
                ExitStatus::ParseError
            } else {
                ExitStatus::Success
            };
        }
    };
    let result = match cli.command {
        Command::Validate { file, format } => cmd_validate(&file, format, out),
        Command::Plan {
            file,
            format,
            backend,
            out: output,
        } => cmd_plan(&file, format, backend, output, out),
        Command::Deploy {
            file,
            format,
            backend,
            workers,
            trace,
            snapshot,
            fail_task,
            inject_edge,
        } => {
            let opts = DeployOptions {
                format,
                backend,
                workers: workers as usize,
                trace,
                snapshot,
                fail_task: fail_task.map(TaskId::new),
                inject_edges: inject_edge
                    .chunks(2)
                    .map(|pair| (TaskId::new(pair[0].as_str()), TaskId::new(pair[1].as_str())))
                    .collect(),
            };
            cmd_deploy(&file, &opts, out)
        }
        Command::Convert { file, from, to } => cmd_convert(&file, from, to, out),
    };
    result.unwrap_or_else(|e| {
        let _ = writeln!(out, "error: {e}");
        ExitStatus::ParseError
    })
}

fn infer_format(file: &Path, format: Option<Format>) -> Format {
    format.unwrap_or_else(|| match file.extension().and_then(|e| e.to_str()) {
        Some("xml") | Some("adl") | Some("fractal") => Format::Adl,
        _ => Format::Native,
    })
}

fn report(out: &mut dyn Write, diagnostics: &[ParseDiagnostic]) -> io::Result<ExitStatus> {
    for d in diagnostics {
        writeln!(out, "error: {d}")?;
    }
    Ok(if diagnostics.iter().any(|d| d.code.is_syntactic()) {
        ExitStatus::ParseError
    } else {
        ExitStatus::ValidationError
    })
}

/// Reads and parses `file`; on failure the diagnostics are already printed.
fn load(
    file: &Path,
    format: Option<Format>,
    out: &mut dyn Write,
) -> io::Result<Result<Configuration, ExitStatus>> {
    let text = match std::fs::read_to_string(file) {
        Ok(text) => text,
        Err(e) => {
            writeln!(out, "error: cannot read {}: {e}", file.display())?;
            return Ok(Err(ExitStatus::ParseError));
        }
    };
    let parsed = match infer_format(file, format) {
        Format::Native => parse_native_from(file, &text),
        Format::Adl => parse_adl_from(file, &text),
    };
    match parsed {
        Ok(config) => Ok(Ok(config)),
        Err(diags) => Ok(Err(report(out, &diags)?)),
    }
}

macro_rules! try_load {
    ($file:expr, $format:expr, $out:expr) => {
        match load($file, $format, $out)? {
            Ok(config) => config,
            Err(status) => return Ok(status),
        }
    };
}

pub fn cmd_validate(
    file: &Path,
    format: Option<Format>,
    out: &mut dyn Write,
) -> io::Result<ExitStatus> {
    try_load!(file, format, out);
    writeln!(out, "OK")?;
    Ok(ExitStatus::Success)
}

fn plan(
    config: &Configuration,
    backend: Backend,
    out: &mut dyn Write,
) -> io::Result<Result<TaskGraph, ExitStatus>> {
    match compile(config, &RuntimeKind::from(backend).capabilities()) {
        Ok(graph) => Ok(Ok(graph)),
        Err(e) => {
            writeln!(out, "error: {}: {e}", e.code())?;
            if let PlanError::InvalidConfig(violations) = &e {
                for v in violations {
                    writeln!(out, "error: {v}")?;
                }
                return Ok(Err(ExitStatus::ValidationError));
            }
            Ok(Err(ExitStatus::CompileError))
        }
    }
}

pub fn cmd_plan(
    file: &Path,
    format: Option<Format>,
    backend: Backend,
    output: PlanOutput,
    out: &mut dyn Write,
) -> io::Result<ExitStatus> {
    let config = try_load!(file, format, out);
    let graph = match plan(&config, backend, out)? {
        Ok(graph) => graph,
        Err(status) => return Ok(status),
    };
    match output {
        PlanOutput::Dot => out.write_all(graph_to_dot(&graph).as_bytes())?,
        PlanOutput::Text => out.write_all(graph.to_text().as_bytes())?,
    }
    Ok(ExitStatus::Success)
}

#[derive(Debug, Clone)]
pub struct DeployOptions {
    pub format: Option<Format>,
    pub backend: Backend,
    pub workers: usize,
    pub trace: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub fail_task: Option<TaskId>,
    /// Extra edges added to the compiled graph before execution.
    pub inject_edges: Vec<(TaskId, TaskId)>,
}

impl Default for DeployOptions {
    fn default() -> Self {
        DeployOptions {
            format: None,
            backend: Backend::Hier,
            workers: 1,
            trace: None,
            snapshot: None,
            fail_task: None,
            inject_edges: Vec::new(),
        }
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, renamed into place once complete.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn cmd_deploy(
    file: &Path,
    opts: &DeployOptions,
    out: &mut dyn Write,
) -> io::Result<ExitStatus> {
    let config = try_load!(file, opts.format, out);
    let mut graph = match plan(&config, opts.backend, out)? {
        Ok(graph) => graph,
        Err(status) => return Ok(status),
    };
    for (from, to) in &opts.inject_edges {
        let edge = DependencyEdge::new(from, to, InterfaceKind::InstanceConfiguration);
        if let Err(e) = graph.add_edge(edge) {
            writeln!(out, "error: cannot inject edge: {e}")?;
            return Ok(ExitStatus::CompileError);
        }
    }

    let runtime = MockRuntime::for_config(opts.backend.into(), &config);
    let deployer = Deployer::new(&runtime).failing_on(opts.fail_task.clone());
    let trace = engine::execute(&graph, &deployer, &EngineConfig::new(opts.workers.max(1)));

    match &trace.outcome {
        Outcome::Completed => {}
        Outcome::CycleDetected { remaining } => {
            writeln!(
                out,
                "error: dependency cycle; {} task(s) never became ready:",
                remaining.len()
            )?;
            for id in remaining {
                writeln!(out, "error:   {id}")?;
            }
            return Ok(ExitStatus::CycleDetected);
        }
        Outcome::TaskFailed { task, reason } => {
            writeln!(out, "error: task {task} failed: {reason}")?;
            return Ok(ExitStatus::TaskFailure);
        }
    }

    if let Some(path) = &opts.trace {
        write_atomic(path, &trace.to_text())?;
    }
    if let Some(path) = &opts.snapshot {
        write_atomic(path, &runtime.snapshot().to_text())?;
    }
    writeln!(
        out,
        "deployed {} task(s) on the {} runtime",
        graph.node_count(),
        runtime.kind().name()
    )?;
    Ok(ExitStatus::Success)
}

pub fn cmd_convert(
    file: &Path,
    from: Option<Format>,
    to: TargetFormat,
    out: &mut dyn Write,
) -> io::Result<ExitStatus> {
    let config = try_load!(file, from, out);
    match to {
        TargetFormat::Native => out.write_all(emit_native(&config).as_bytes())?,
    }
    Ok(ExitStatus::Success)
}
