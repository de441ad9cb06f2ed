//! `dfmc`: simulate trajectories, estimate gradients by two routes, and run
//! the verification harness from a TOML configuration.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration error,
//! 3 runtime or numeric error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfmc_core::config::ExperimentConfig;
use dfmc_core::experiment::{run_gradient, run_simulate, run_verify, VerifyOptions};
use dfmc_core::model::TestProblem;
use dfmc_core::report::fmt_num;
use dfmc_core::Error;

#[derive(Debug, Parser)]
#[command(name = "dfmc", version, about = "Monte-Carlo gradient estimates and a priori bounds for divergence-form diffusions")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML configuration; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Test problem tag (OU1D, ROT2D, VARH2D, DW1D), overriding the configuration.
    #[arg(long, global = true)]
    problem: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate paths from x0 and write one CSV per trajectory.
    Simulate,
    /// Estimate grad P_t0 f at a point by the Fréchet and Malliavin routes.
    Gradient {
        /// Test function id, e.g. `bump`, `x1`, `x2^2`, `const`, `battery:3`.
        #[arg(long = "f")]
        f: String,
        /// Evaluation point as comma-separated coordinates (defaults to x0).
        #[arg(long = "x", value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
    },
    /// Run every check and write the consolidated report.
    Verify {
        /// Use the negated control; the identity checks must then fail.
        #[arg(long)]
        debug_negate_control: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_config() { 2 } else { 3 };
        Failure { code, message: e.to_string() }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let problem: TestProblem = common.problem.as_deref().unwrap_or("OU1D").parse()?;
            ExperimentConfig::for_problem(problem)
        }
    };
    if let Some(tag) = &common.problem {
        cfg.problem.tag = tag.clone();
    }
    if let Some(seed) = common.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(threads) = cli.common.threads {
        if threads == 0 {
            return Err(config_failure("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure { code: 3, message: e.to_string() })?;
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate => {
            let out = run_simulate(&cfg)?;
            println!("wrote {} trajectories to {}", out.paths, cfg.output.dir.display());
            if let Some(&(path, step)) = out.guard_exits.first() {
                return Err(Failure {
                    code: 3,
                    message: format!(
                        "{} of {} paths left the guard ball |x| < {}; first: path {path} at step {step}",
                        out.guard_exits.len(),
                        out.paths,
                        cfg.simulation.r_guard
                    ),
                });
            }
            Ok(0)
        }
        Command::Gradient { f, x } => {
            let out = run_gradient(&cfg, &f, x)?;
            let r = &out.report;
            println!("f = {}, x = {:?}, t0 = {}", r.f_id, r.x, fmt_num(out.t0));
            println!("component,frechet,frechet_se,malliavin,malliavin_se,residual,residual_se");
            for j in 0..r.residual.len() {
                let (fr, ml, res) = (r.frechet.component(j), r.malliavin.component(j), r.residual[j]);
                println!(
                    "{},{},{},{},{},{},{}",
                    j + 1,
                    fmt_num(fr.value),
                    fmt_num(fr.se),
                    fmt_num(ml.value),
                    fmt_num(ml.se),
                    fmt_num(res.value),
                    fmt_num(res.se)
                );
            }
            Ok(0)
        }
        Command::Verify { debug_negate_control } => {
            let out = run_verify(&cfg, VerifyOptions { negate_control: debug_negate_control })?;
            for c in &out.checks {
                println!("{:<20} {:<4} {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
            }
            if out.passed() {
                println!("all checks passed; report in {}", cfg.output.dir.display());
                Ok(0)
            } else {
                eprintln!("failed checks: {}", out.failures().join(", "));
                Ok(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
