//! Command-line front end. Every subcommand prints a single JSON report
//! envelope to stdout. Exit codes follow a fixed contract: 0 when every
//! requested check passes, 1 when a numerical identity fails (the failing
//! identity and the point of largest residual go to stderr), and 2 when
//! the request itself is malformed.

mod commands;
mod context;
mod scenario;
mod suites;

use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use context::{CliError, Outcome};

#[derive(Parser)]
#[command(
    name = "geocalc",
    version,
    about = "Chart-local calculus generated by a non-degenerate (0,2)-tensor field",
    disable_help_subcommand = true
)]
struct Cli {
    /// Omit the timestamp so reports are byte-identical across runs.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an expression and its jet at a point.
    Eval(commands::EvalArgs),
    /// Left and right gradients of a function at a point.
    Grad(commands::GradArgs),
    /// Bracket of two functions with its symmetric and skew parts.
    Bracket(commands::BracketArgs),
    /// Left and right Laplace operators applied at a point.
    Laplace(commands::LaplaceArgs),
    /// Left and right adjoints of a matrix field.
    Adjoint(commands::AdjointArgs),
    /// Integrate a gradient flow and report the endpoint.
    Flow(commands::FlowArgs),
    /// Compare transported volume against the divergence rate.
    Transport(commands::TransportArgs),
    /// Check a Green identity on a coordinate box.
    Green(commands::GreenArgs),
    /// Dirichlet energy of a function on a coordinate box.
    Dirichlet(commands::DirichletArgs),
    /// Naturality checks for the chart maps of a catalog entry.
    Morphcheck(commands::MorphArgs),
    /// Run invariant suites against a catalog entry.
    Verify(suites::VerifyArgs),
    /// List the catalog, or describe one entry in full.
    Catalog(commands::CatalogArgs),
    /// Execute a scenario file of tasks.
    Run(scenario::RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval(_) => "eval",
            Command::Grad(_) => "grad",
            Command::Bracket(_) => "bracket",
            Command::Laplace(_) => "laplace",
            Command::Adjoint(_) => "adjoint",
            Command::Flow(_) => "flow",
            Command::Transport(_) => "transport",
            Command::Green(_) => "green",
            Command::Dirichlet(_) => "dirichlet",
            Command::Morphcheck(_) => "morphcheck",
            Command::Verify(_) => "verify",
            Command::Catalog(_) => "catalog",
            Command::Run(_) => "run",
        }
    }
}

fn dispatch(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Eval(args) => commands::eval(args),
        Command::Grad(args) => commands::grad(args),
        Command::Bracket(args) => commands::bracket(args),
        Command::Laplace(args) => commands::laplace(args),
        Command::Adjoint(args) => commands::adjoint(args),
        Command::Flow(args) => commands::flow(args),
        Command::Transport(args) => commands::transport(args),
        Command::Green(args) => commands::green(args),
        Command::Dirichlet(args) => commands::dirichlet(args),
        Command::Morphcheck(args) => commands::morphcheck(args),
        Command::Verify(args) => suites::verify(args),
        Command::Catalog(args) => commands::catalog(args),
        Command::Run(args) => scenario::run(args),
    }
}

/// Prints the report envelope to stdout. `serde_json` maps are ordered,
/// so the output is deterministic; the timestamp is the only field that
/// varies between runs, and `--no-timestamp` drops it.
fn emit(command: &str, no_timestamp: bool, report: Value) {
    let mut envelope = Map::new();
    envelope.insert("tool".into(), json!("geocalc"));
    envelope.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    envelope.insert("command".into(), json!(command));
    if !no_timestamp {
        let seconds = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        envelope.insert("timestamp".into(), json!(seconds));
    }
    envelope.insert("report".into(), report);
    let text = serde_json::to_string_pretty(&Value::Object(envelope))
        .expect("report envelopes contain only finite JSON values");
    println!("{text}");
}

/// Honors `GEO_THREADS` as a cap on rayon workers. A malformed value is
/// reported and ignored rather than failing the run.
fn init_thread_pool() {
    let Ok(text) = std::env::var("GEO_THREADS") else {
        return;
    };
    match text.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("geocalc: ignoring GEO_THREADS={text:?}; expected a positive integer"),
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let name = cli.command.name();
    match dispatch(&cli.command) {
        Ok(outcome) => {
            emit(name, cli.no_timestamp, outcome.report);
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for failure in &outcome.failures {
                    eprintln!("geocalc: FAIL {failure}");
                }
                ExitCode::from(1)
            }
        }
        Err(CliError::Numerical { message, worst }) => {
            match worst {
                Some(point) => {
                    eprintln!("geocalc: numerical failure: {message} (worst point {point:?})")
                }
                None => eprintln!("geocalc: numerical failure: {message}"),
            }
            ExitCode::from(1)
        }
        Err(CliError::Schema(message)) => {
            eprintln!("geocalc: schema error: {message}");
            ExitCode::from(2)
        }
    }
}
