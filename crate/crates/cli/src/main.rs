use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use iapg::experiments::bench::BenchConfig;
use iapg::experiments::config::{RecoverConfig, SolveConfig, RECOVER_KEYS, SOLVER_KEYS, SOLVE_KEYS};
use iapg::experiments::{self, mse};
use iapg::{Error, OuterStatus};

const EXIT_CONFIG: u8 = 2;
const EXIT_LINE_SEARCH: u8 = 3;
const EXIT_MAX_ITERS: u8 = 4;

#[derive(Parser)]
#[command(name = "iapg", version, about = "Inexact accelerated proximal gradient experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inner-loop complexity sweep on random sparse l1 proximal problems.
    ///
    /// Writes one summary row per tolerance eps_i = 2^(-32 + i/4), i = 0..=imax.
    InnerBench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 64)]
        imax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Robust TV-l2 recovery of a blurred, noisy piecewise-constant signal.
    ///
    /// Writes trace.csv and signals.csv into the output directory.
    #[command(after_long_help = format!("Config keys (key = value, one per line):\n{RECOVER_KEYS}\n{SOLVER_KEYS}"))]
    Recover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generic problem: min 1/2 dist^2(Cx - b | box) + eta |Ax|_1.
    ///
    /// Writes trace.csv and solution.csv into the output directory.
    #[command(after_long_help = format!("Config keys (key = value, one per line):\n{SOLVE_KEYS}\n{SOLVER_KEYS}"))]
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn status_code(status: OuterStatus) -> ExitCode {
    match status {
        OuterStatus::Converged => ExitCode::SUCCESS,
        OuterStatus::LineSearchError => ExitCode::from(EXIT_LINE_SEARCH),
        OuterStatus::MaxIters | OuterStatus::InnerMaxIters => ExitCode::from(EXIT_MAX_ITERS),
    }
}

fn run(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::InnerBench { seed, trials, imax, out } => {
            let cfg = BenchConfig { seed, trials, ..Default::default() };
            let rows = experiments::run_inner_bench(&cfg, imax)?;
            experiments::write_inner_bench(&rows, &cfg, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            let censored: usize = rows.iter().map(|r| r.censored_count).sum();
            eprintln!("wrote {} rows to {} ({censored} censored entries)", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Recover { config, out } => {
            let cfg = RecoverConfig::from_file(&config)?;
            let res = experiments::run_recover(&cfg)?;
            experiments::write_recover(&res, &out).with_context(|| format!("writing {}", out.display()))?;
            let x_tilde = &res.instance.problem.x_tilde;
            eprintln!(
                "status {:?} after {} iterations, residual {:e}, {:.2}s; mse recovered {:.4e}, observed {:.4e}",
                res.status(),
                res.output.trace.records.len(),
                res.final_residual(),
                res.wall_time.as_secs_f64(),
                mse(&res.output.x, &res.instance.x_bar),
                mse(x_tilde, &res.instance.x_bar),
            );
            Ok(status_code(res.status()))
        }
        Command::Solve { config, out } => {
            let cfg = SolveConfig::from_file(&config)?;
            let res = experiments::run_solve(&cfg)?;
            experiments::write_solve(&res, &out).with_context(|| format!("writing {}", out.display()))?;
            let last = res.output.trace.records.last();
            eprintln!(
                "status {:?} after {} iterations, residual {:e}, F {}",
                res.output.status,
                res.output.trace.records.len(),
                last.map_or(f64::NAN, |r| r.residual),
                last.map_or(f64::NAN, |r| r.objective),
            );
            Ok(status_code(res.output.status))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
