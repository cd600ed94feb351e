//! `glsl`: deficits, flows, certificates and stability checks for the
//! Gaussian log-Sobolev inequality.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 config error, 3 numerical
//! error.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use commands::Failure;
use config::{NamedProblem, ProblemSpec, RunConfig, Subcommand};
use glsl_core::search::SearchProblem;
use glsl_core::FunctionSpec;

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "glsl", version, about = "Gaussian log-Sobolev deficits, Ornstein-Uhlenbeck flows and stability checks")]
struct Cli {
    /// Run a saved config instead of the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the resolved config to this file before running.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Entropy, Fisher information and deficit of one function.
    Report(Common),
    /// Verification suite over the built-in corpus, or over --family.
    Verify(VerifyArgs),
    /// Diagnostics along the Ornstein-Uhlenbeck flow, as CSV.
    Flow(Common),
    /// Closed-form constants.
    Constants(Common),
    /// Log-concavity certificate, optionally along the flow.
    Logcc(Common),
    /// Constrained search, or `--problem expansion`.
    Search(SearchArgs),
}

#[derive(Args)]
struct Common {
    /// Function spec: inline JSON or a path to a JSON file.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = config::DEFAULT_GRID_ORDER)]
    grid_order: usize,
    /// Dimension (overrides `d` of --family; restricts the corpus for verify).
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated flow times.
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Replace every native tolerance.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Skip the flow checks.
    #[arg(long)]
    no_flows: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    common: Common,
    /// `expansion`, inline problem JSON or a path to one.
    #[arg(long)]
    problem: String,
    /// Objective evaluations per restart.
    #[arg(long, default_value_t = config::DEFAULT_BUDGET)]
    budget: usize,
}

fn read_json_arg(arg: &str) -> Result<String, String> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))
    }
}

fn parse_family(arg: &str) -> Result<FunctionSpec, String> {
    FunctionSpec::from_json(&read_json_arg(arg)?).map_err(|e| format!("--family: {e}"))
}

fn parse_problem(arg: &str) -> Result<ProblemSpec, String> {
    if arg == "expansion" {
        return Ok(ProblemSpec::Named(NamedProblem::Expansion));
    }
    let p = SearchProblem::from_json(&read_json_arg(arg)?).map_err(|e| format!("--problem: {e}"))?;
    Ok(ProblemSpec::Search(p))
}

fn from_common(sub: Subcommand, c: Common) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::new(sub);
    cfg.family = c.family.as_deref().map(parse_family).transpose()?;
    cfg.grid_order = c.grid_order;
    cfg.d = c.d;
    cfg.times = c.times;
    cfg.tol = c.tol;
    cfg.out = c.out;
    cfg.seed = c.seed;
    Ok(cfg)
}

fn resolve(cli: Cli) -> Result<RunConfig, String> {
    if let Some(path) = &cli.config {
        return RunConfig::load(path);
    }
    match cli.command.ok_or("a subcommand or --config is required")? {
        Command::Report(c) => from_common(Subcommand::Report, c),
        Command::Verify(v) => {
            let mut cfg = from_common(Subcommand::Verify, v.common)?;
            cfg.flows = !v.no_flows;
            Ok(cfg)
        }
        Command::Flow(c) => from_common(Subcommand::Flow, c),
        Command::Constants(c) => from_common(Subcommand::Constants, c),
        Command::Logcc(c) => from_common(Subcommand::Logcc, c),
        Command::Search(s) => {
            let mut cfg = from_common(Subcommand::Search, s.common)?;
            cfg.problem = Some(parse_problem(&s.problem)?);
            cfg.budget = s.budget;
            Ok(cfg)
        }
    }
}

/// Sizes the global rayon pool from `GLSL_THREADS`.
fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("GLSL_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("GLSL_THREADS = {v:?} is not a positive integer"))?;
    if n == 0 {
        return Err("GLSL_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    output::write_atomic(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let save = cli.save_config.clone();
    let cfg = match init_threads().and_then(|_| resolve(cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(p) = save {
        if let Err(e) = write(&p, &cfg.to_json()) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let artifacts = match commands::run(&cfg) {
        Ok(a) => a,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical error: {e}");
            return ExitCode::from(EXIT_NUMERIC);
        }
    };
    match &cfg.out {
        Some(path) => {
            let files = std::iter::once((path.clone(), &artifacts.primary))
                .chain(artifacts.extra.iter().map(|(suffix, text)| (output::sibling(path, suffix), text)));
            for (p, text) in files {
                if let Err(e) = write(&p, text) {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
        }
        None => print!("{}", artifacts.primary),
    }
    if let Some(line) = &artifacts.summary {
        eprintln!("{line}");
    }
    if artifacts.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}
