//! Experiment harness behind the `fracorn` binary: configuration, dispatch to
//! the subcommands, reports and exit codes.

mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use crate::acceptance::{self, SuiteOptions};
use crate::error::Error;
pub use config::ExperimentConfig;
pub use report::{Cell, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

/// Environment variable overriding the configured thread count.
pub const THREADS_ENV: &str = "FRACORN_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Seminorm,
    Extend,
    KornConstant,
    Hardy,
    Cover,
    Convergence,
    Perisolve,
    ProbePsLt1,
    Acceptance,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Seminorm => "seminorm",
            Command::Extend => "extend",
            Command::KornConstant => "korn-constant",
            Command::Hardy => "hardy",
            Command::Cover => "cover",
            Command::Convergence => "convergence",
            Command::Perisolve => "perisolve",
            Command::ProbePsLt1 => "probe-ps-lt-1",
            Command::Acceptance => "acceptance",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(m: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: m.into() }
    }

    pub fn numeric(m: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERIC, message: m.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::config(m),
            e => CliError::numeric(e.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.code {
            EXIT_CONFIG => "config error",
            EXIT_NUMERIC => "numeric error",
            _ => "error",
        };
        write!(f, "{kind}: {}", self.message)
    }
}

/// Run a subcommand (not the acceptance suite) on the current thread pool.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<Report, CliError> {
    let prep = config.prepare()?;
    match command {
        Command::Seminorm => commands::seminorm(&prep),
        Command::Extend => commands::extend(&prep),
        Command::KornConstant => commands::korn_constant(&prep),
        Command::Hardy => commands::hardy(&prep),
        Command::Cover => commands::cover(&prep),
        Command::Convergence => commands::convergence(&prep),
        Command::Perisolve => commands::perisolve(&prep),
        Command::ProbePsLt1 => commands::probe(&prep),
        Command::Acceptance => Err(CliError::config("the acceptance suite is run through `execute`")),
    }
}

/// Thread count by precedence: flag, then environment, then config.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>, config: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(t) = flag {
        if t == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        return Ok(Some(t));
    }
    if let Some(v) = env {
        return match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        };
    }
    Ok(config)
}

/// Parsed command line.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub command: Option<Command>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Acceptance only: restrict to these criteria.
    pub only: Vec<usize>,
    /// Acceptance only: corrupt a coefficient (the suite must then fail).
    pub sabotage: bool,
}

fn install<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        Some(t) => acceptance::with_threads(t, f).map_err(|e| CliError::config(e.to_string())),
        None => Ok(f()),
    }
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let json = report
                .write(path)
                .map_err(|e| CliError::numeric(format!("writing {}: {e}", path.display())))?;
            eprintln!("wrote {} and {}", path.display(), json.display());
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

/// Execute an invocation and return the process exit code.
pub fn execute(inv: &Invocation) -> i32 {
    match try_execute(inv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fracorn: {e}");
            e.code
        }
    }
}

fn try_execute(inv: &Invocation) -> Result<i32, CliError> {
    let command = inv.command.ok_or_else(|| CliError::config("no subcommand given"))?;
    let env = std::env::var(THREADS_ENV).ok();
    if command == Command::Acceptance {
        let cfg_threads = match &inv.config {
            Some(p) => ExperimentConfig::load(p)?.threads,
            None => None,
        };
        let first = resolve_threads(inv.threads, env.as_deref(), cfg_threads)?.unwrap_or(8);
        let second = if first == 1 { 8 } else { 1 };
        return run_acceptance(inv, SuiteOptions { sabotage: inv.sabotage, threads: [first, second] });
    }
    let path = inv
        .config
        .as_ref()
        .ok_or_else(|| CliError::config(format!("{} needs --config <path>", command.name())))?;
    let config = ExperimentConfig::load(path)?;
    let threads = resolve_threads(inv.threads, env.as_deref(), config.threads)?;
    let report = install(threads, || run(command, &config))??;
    let out = inv.out.clone().or_else(|| config.output.clone());
    emit(&report, out.as_ref())?;
    Ok(EXIT_OK)
}

fn run_acceptance(inv: &Invocation, opts: SuiteOptions) -> Result<i32, CliError> {
    let ids = if inv.only.is_empty() { acceptance::all_ids() } else { inv.only.clone() };
    if ids.iter().any(|&i| i == 0 || i > acceptance::CRITERIA) {
        return Err(CliError::config(format!("criteria are numbered 1..={}", acceptance::CRITERIA)));
    }
    let outcomes = acceptance::run_suite(&ids, &opts, |o| println!("{}", o.line()))?;
    let failed: Vec<&acceptance::Outcome> = outcomes.iter().filter(|o| !o.passed).collect();
    let total: f64 = outcomes.iter().map(|o| o.runtime_s).sum();
    println!(
        "{} of {} criteria passed in {total:.1}s",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    for o in &failed {
        eprintln!("FAILED {}: {}: measured {}, required {}", o.id, o.title, o.measured, o.required);
    }
    if let Some(path) = &inv.out {
        let mut r = Report::new("acceptance", &["id", "title", "passed", "measured", "required", "runtime_s"]);
        for o in &outcomes {
            r.push(vec![
                o.id.into(),
                o.title.into(),
                o.passed.into(),
                o.measured.clone().into(),
                o.required.clone().into(),
                o.runtime_s.into(),
            ]);
        }
        emit(&r, Some(path))?;
    }
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_ACCEPTANCE })
}
