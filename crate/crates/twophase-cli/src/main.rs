//! `twophase`: solves, evolutions, sweeps and verification runs.
//!
//! Exit codes: 0 pass, 1 usage or configuration error, 2 point outside the
//! admissible region (or another mathematical precondition), 3 verification failure.

mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twophase::C64;

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "twophase", version, about = "Two-phase resolvent solver and verification suite")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; `TWOPHASE_*` variables override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: `output_dir` from the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Pass threshold of the command being run.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form solution of one Fourier mode: profiles and residual report.
    SolveMode {
        /// Resolvent parameter as `re,im`.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Option<C64>,
        /// Tangential frequency, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xi: Option<Vec<f64>>,
        /// JSON file with interface data `{"h": [[re, im], ...], "k": [...]}`.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Resolvent field on the periodic tangential grid for a random interface stress.
    SolveField {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Option<C64>,
    },
    /// Time evolution of a random data bundle, with norms and residuals.
    Evolve,
    /// Runs one module check and exits 0 iff it passes.
    Verify {
        #[arg(value_enum)]
        check: verify::Check,
    },
    /// Determinant bound, residual and uniqueness over a tensor grid of region points.
    Sweep,
    /// Prints the JSON schema of the run configuration.
    Schema,
}

fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("bad number '{t}': {e}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected 're' or 're,im', got '{s}'")),
    }
}

fn configure(g: &Global) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(g.config.as_deref(), std::env::vars())?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if g.threads.is_some() {
        cfg.threads = g.threads;
    }
    if g.tol.is_some() {
        cfg.tol = g.tol;
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(String, commands::Outcome), CliError> {
    if let Command::Schema = cli.command {
        print!("{}", config::SCHEMA);
        return Ok((String::new(), commands::Outcome { pass: true, summary: String::new() }));
    }
    let cfg = configure(&cli.global)?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::SolveMode { lambda, xi, data } => Ok(("solve-mode".into(), commands::solve_mode(&cfg, &out, lambda, xi, data.as_deref())?)),
        Command::SolveField { lambda } => Ok(("solve-field".into(), commands::solve_field(&cfg, &out, lambda)?)),
        Command::Evolve => Ok(("evolve".into(), commands::evolve(&cfg, &out)?)),
        Command::Verify { check } => Ok((format!("verify {}", check.name()), verify::run(check, &cfg, &out)?)),
        Command::Sweep => Ok(("sweep".into(), commands::sweep(&cfg, &out)?)),
        Command::Schema => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok((name, outcome)) => {
            if name.is_empty() {
                return ExitCode::SUCCESS;
            }
            println!("{name}: {} ({})", if outcome.pass { "PASS" } else { "FAIL" }, outcome.summary);
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
