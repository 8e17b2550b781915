//! Experiment orchestration behind the command-line front end.

pub mod bench;
pub mod config;
pub mod io;
pub mod stats;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linops::LinearOperator;
use crate::outer::{iapg_solve, IapgOutput, OuterStatus};
use crate::problems::{build_tv_problem, ground_truth, observe, RobustTvL2, TvInstance};
use crate::prox::RegularizerSpec;

use self::bench::{run_bench, summarize, tolerance_grid, BenchConfig, SummaryRow};
use self::config::{OperatorKind, RecoverConfig, RegularizerChoice, SolveConfig};
use self::io::TraceRow;

#[derive(Debug)]
pub struct RecoverOutcome {
    pub instance: TvInstance,
    pub output: IapgOutput,
    pub x_init: Vec<f64>,
    pub wall_time: Duration,
}

impl RecoverOutcome {
    pub fn status(&self) -> OuterStatus {
        self.output.status
    }

    pub fn final_residual(&self) -> f64 {
        self.output.trace.records.last().map_or(f64::INFINITY, |r| r.residual)
    }
}

/// Mean squared difference.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64
}

pub fn run_recover(cfg: &RecoverConfig) -> Result<RecoverOutcome> {
    cfg.validate()?;
    let instance = build_tv_problem(&cfg.tv)?;
    let mut solver = cfg.solver.clone();
    solver.b0 = cfg.b0.unwrap_or_else(|| instance.problem.c.norm_sq_estimate().min(solver.b_cap));
    let x_init = vec![0.0; cfg.tv.n];
    let start = Instant::now();
    let output = iapg_solve(&instance.problem, &instance.spec, instance.a(), &x_init, &solver)?;
    Ok(RecoverOutcome { instance, output, x_init, wall_time: start.elapsed() })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn trace_rows(out: &IapgOutput) -> Vec<TraceRow> {
    out.trace.records.iter().map(TraceRow::from).collect()
}

fn run_meta(out: &IapgOutput, wall: Duration) -> Vec<String> {
    vec![
        format!("status = {:?}", out.status),
        format!("wall_time_s = {:.3}", wall.as_secs_f64()),
        "x_init = 0".to_string(),
    ]
}

/// Writes `trace.csv` and `signals.csv` into `dir`.
pub fn write_recover(outcome: &RecoverOutcome, dir: &Path) -> Result<()> {
    let meta = run_meta(&outcome.output, outcome.wall_time);
    io::write_trace(create(dir, "trace.csv")?, &trace_rows(&outcome.output), &meta)?;
    io::write_signals(
        create(dir, "signals.csv")?,
        &outcome.instance.x_bar,
        &outcome.instance.problem.x_tilde,
        &outcome.output.x,
        &[],
    )
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub output: IapgOutput,
    pub wall_time: Duration,
}

fn build_operator(kind: &OperatorKind, n: usize, rng: &mut ChaCha8Rng) -> Result<LinearOperator> {
    match kind {
        OperatorKind::Identity => Ok(LinearOperator::identity(n)),
        OperatorKind::Blur(l) => LinearOperator::box_blur(n, *l),
        OperatorKind::Diff => LinearOperator::forward_difference(n),
        OperatorKind::Sparse => {
            LinearOperator::sum(LinearOperator::random_sparse_with(n, n, rng)?, LinearOperator::identity(n))
        }
    }
}

fn read_vector(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let v = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("bad number {t:?} in {}", path.display()))))
        .collect::<Result<Vec<f64>>>()?;
    if v.len() != n {
        return Err(Error::Config(format!("{} holds {} values, expected {n}", path.display(), v.len())));
    }
    Ok(v)
}

pub fn run_solve(cfg: &SolveConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = build_operator(&cfg.c, cfg.n, &mut rng)?;
    let a = build_operator(&cfg.a, cfg.n, &mut rng)?;
    let b = match &cfg.data {
        Some(p) => read_vector(p, cfg.n)?,
        None => observe(&c, &ground_truth(cfg.n)?, cfg.sigma, cfg.seed)?,
    };
    let f = RobustTvL2::new(c, b, cfg.lam_box, cfg.eta)?;
    let spec = match cfg.regularizer {
        RegularizerChoice::L1 => RegularizerSpec::scaled_l1(a.rows(), cfg.eta)?,
        RegularizerChoice::Zero => RegularizerSpec::zero(a.rows()),
    };
    let mut solver = cfg.solver.clone();
    solver.b0 = cfg.b0.unwrap_or_else(|| f.c.norm_sq_estimate().min(solver.b_cap));
    let start = Instant::now();
    let output = iapg_solve(&f, &spec, &a, &vec![0.0; cfg.n], &solver)?;
    Ok(SolveOutcome { output, wall_time: start.elapsed() })
}

/// Writes `trace.csv` and `solution.csv` into `dir`.
pub fn write_solve(outcome: &SolveOutcome, dir: &Path) -> Result<()> {
    let meta = run_meta(&outcome.output, outcome.wall_time);
    io::write_trace(create(dir, "trace.csv")?, &trace_rows(&outcome.output), &meta)?;
    io::write_vector(create(dir, "solution.csv")?, &outcome.output.x, &[])
}

/// Runs the inner-loop sweep over `ε_i = 2^{-32 + i/4}`, `i = 0..=i_max`.
pub fn run_inner_bench(cfg: &BenchConfig, i_max: usize) -> Result<Vec<SummaryRow>> {
    let grid = tolerance_grid(i_max);
    let trials = run_bench(cfg, &grid)?;
    summarize(&grid, &trials)
}

pub fn write_inner_bench(rows: &[SummaryRow], cfg: &BenchConfig, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let meta = vec![
        format!("seed = {}, trials = {}, m = {}, n = {}", cfg.seed, cfg.trials, cfg.m, cfg.n),
        format!("eta = {}, lambda = {}, rho = 0, s_inner = {}", cfg.eta, cfg.lambda, cfg.s_inner),
    ];
    io::write_summary(BufWriter::new(File::create(path)?), rows, &meta)
}
