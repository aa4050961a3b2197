//! `memwall`: fit, evaluate and study the variable-delay speedup model from the shell.
//!
//! Exit status is 0 on success, 1 for usage errors, 2 for unreadable or invalid data
//! and 3 when a fit fails. Failures print one line on stderr:
//! `error kind=<kind> exit=<code> message="<json string>"`.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use memwall::io::Format;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "memwall", version, about = "Speedup modeling under the memory wall")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit Amdahl's law and the variable-delay model to measured run times.
    Fit(commands::FitArgs),
    /// Evaluate fitted or hand-written parameters over a (cores, frequency ratio) grid.
    Predict(commands::PredictArgs),
    /// Sweep the model over parameter grids and emit curves.
    Sweep(commands::SweepArgs),
    /// Run the accuracy-versus-training-size study.
    Study(commands::StudyArgs),
    /// Generate a synthetic measurement table from known parameters.
    Gen(commands::GenArgs),
    /// Summarize a study or comparison report.
    Report(commands::ReportArgs),
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Base seed for every random choice.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io { path: PathBuf, message: String },
    Core(memwall::Error),
}

impl From<memwall::Error> for Failure {
    fn from(e: memwall::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        use memwall::Error as E;
        match self {
            Failure::Usage(_) | Failure::Core(E::InvalidConfig(_)) => 1,
            Failure::Io { .. } => 2,
            Failure::Core(E::NonFiniteObjective | E::SingularSystem | E::DivisionByZero(_)) => 3,
            Failure::Core(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Io { .. } => "io",
            Failure::Core(e) => e.kind(),
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Io { path, message } => format!("{}: {message}", path.display()),
            Failure::Core(e) => e.to_string(),
        }
    }

    fn report(&self) -> String {
        let message = serde_json::to_string(&self.message()).unwrap_or_else(|_| "\"\"".into());
        format!("error kind={} exit={} message={message}", self.kind(), self.exit_code())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MEMWALL_LOG")).format_timestamp(None).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", Failure::Usage(first.to_string()).report());
            return ExitCode::from(1);
        }
    };

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.report());
            ExitCode::from(failure.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let common = match &command {
        Command::Fit(a) => &a.common,
        Command::Predict(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Study(a) => &a.common,
        Command::Gen(a) => &a.common,
        Command::Report(a) => &a.common,
    };
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    }
    match command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Study(a) => commands::study(a),
        Command::Gen(a) => commands::gen(a),
        Command::Report(a) => commands::report(a),
    }
}
