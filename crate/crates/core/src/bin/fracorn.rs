use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracorn::cli::{execute, Command, Invocation};

#[derive(Parser)]
#[command(name = "fracorn", version, about = "Projected fractional seminorms, extensions and Korn constants")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// CSV report path; a `.json` mirror is written next to it. Defaults to the
    /// config's `output`, else CSV on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides FRACORN_THREADS and the config).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gagliardo and projected seminorms of the configured fields.
    Seminorm(Common),
    /// Evaluate the extension operator or its norm ratio.
    Extend(Common),
    /// Estimate Korn, Korn–Poincaré constants from Gram eigenproblems.
    KornConstant(Common),
    /// Hardy-type boundary ratio.
    Hardy(Common),
    /// Build and check a Whitney cover.
    Cover(Common),
    /// Convergence table with Richardson extrapolation.
    Convergence(Common),
    /// Galerkin solve of the linear peridynamic problem.
    Perisolve(Common),
    /// Ratio |u|_W / [u]_X for cut-off rotations as the ramp width shrinks.
    #[command(name = "probe-ps-lt-1")]
    ProbePsLt1(Common),
    /// Run the acceptance suite.
    Acceptance {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Run only these criteria (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        /// Corrupt an extension coefficient; the constraint criterion must fail.
        #[arg(long, hide = true)]
        sabotage: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, c) = match cli.command {
        Cmd::Seminorm(c) => (Command::Seminorm, c),
        Cmd::Extend(c) => (Command::Extend, c),
        Cmd::KornConstant(c) => (Command::KornConstant, c),
        Cmd::Hardy(c) => (Command::Hardy, c),
        Cmd::Cover(c) => (Command::Cover, c),
        Cmd::Convergence(c) => (Command::Convergence, c),
        Cmd::Perisolve(c) => (Command::Perisolve, c),
        Cmd::ProbePsLt1(c) => (Command::ProbePsLt1, c),
        Cmd::Acceptance { config, out, threads, only, sabotage } => {
            let inv = Invocation { command: Some(Command::Acceptance), config, out, threads, only, sabotage };
            return ExitCode::from(execute(&inv) as u8);
        }
    };
    let inv = Invocation {
        command: Some(command),
        config: Some(c.config),
        out: c.out,
        threads: c.threads,
        ..Default::default()
    };
    ExitCode::from(execute(&inv) as u8)
}
