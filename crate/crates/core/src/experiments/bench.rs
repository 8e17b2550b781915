//! Inner-loop complexity sweep on random sparse ℓ₁ proximal problems.
//!
//! Each trial runs the inner loop once at the tightest tolerance and records
//! the first iteration `j` whose duality gap is at or below each threshold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::experiments::stats::{five_number_summary, FiveNumber};
use crate::inner::{pppgd_observed, InnerConfig, InnerStatus, DEFAULT_INNER_MAX_ITERS};
use crate::par;
use crate::problems::sparse_l1_instance;
use crate::prox::gap_certificate;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    pub trials: usize,
    pub m: usize,
    pub n: usize,
    pub eta: f64,
    pub lambda: f64,
    pub s_inner: u32,
    pub max_iters: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            m: 128,
            n: 128,
            eta: 2.0,
            lambda: 1.0,
            s_inner: 4096,
            max_iters: DEFAULT_INNER_MAX_ITERS,
        }
    }
}

/// `ε_i = 2^{-32 + i/4}` for `i = 0..=i_max`.
pub fn tolerance_grid(i_max: usize) -> Vec<f64> {
    (0..=i_max).map(|i| 2f64.powf(-32.0 + i as f64 / 4.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// First-passage iteration per threshold; `max_iters` when censored.
    pub first_passage: Vec<usize>,
    pub censored: Vec<bool>,
    pub iters: usize,
    pub status: InnerStatus,
    /// `min_j gap_j / (1 + |Φ_j| + |Ψ_j|)` over the whole run.
    pub min_relative_gap: f64,
    /// The exit certificate re-evaluated on the returned point.
    pub certificate_holds: bool,
}

/// Runs one trial. `thresholds` may be in any order; the run stops at the
/// smallest one.
pub fn run_trial(cfg: &BenchConfig, thresholds: &[f64], trial: usize) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let inst = sparse_l1_instance(cfg.m, cfg.n, cfg.eta, cfg.lambda, &mut rng)?;
    let eps = thresholds.iter().copied().fold(f64::INFINITY, f64::min);
    let mut icfg = InnerConfig::for_operator(&inst.a, inst.lambda, eps, 0.0, cfg.s_inner);
    icfg.max_iters = cfg.max_iters;

    let mut first: Vec<Option<usize>> = vec![None; thresholds.len()];
    let mut min_rel = f64::INFINITY;
    let z0 = vec![0.0; cfg.n];
    let rep = pppgd_observed(&inst.a, &inst.spec, &inst.y, &inst.y, &z0, &icfg, |st| {
        min_rel = min_rel.min(st.gap / (1.0 + st.primal.abs() + st.dual.abs()));
        for (f, &t) in first.iter_mut().zip(thresholds) {
            if f.is_none() && st.gap <= t {
                *f = Some(st.j);
            }
        }
    })?;
    let certificate_holds = match rep.status {
        InnerStatus::Converged => gap_certificate(rep.gap, eps, 0.0, &rep.z, &inst.y),
        _ => true,
    };
    Ok(TrialResult {
        trial,
        first_passage: first.iter().map(|f| f.unwrap_or(cfg.max_iters)).collect(),
        censored: first.iter().map(Option::is_none).collect(),
        iters: rep.iters,
        status: rep.status,
        min_relative_gap: min_rel,
        certificate_holds,
    })
}

/// Runs all trials, in parallel with the `parallel` feature.
pub fn run_bench(cfg: &BenchConfig, thresholds: &[f64]) -> Result<Vec<TrialResult>> {
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    par::map_trials(cfg.trials, |t| run_trial(cfg, thresholds, t)).into_iter().collect()
}

/// Sequential reference implementation of [`run_bench`].
pub fn run_bench_sequential(cfg: &BenchConfig, thresholds: &[f64]) -> Result<Vec<TrialResult>> {
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    par::map_trials_sequential(cfg.trials, |t| run_trial(cfg, thresholds, t)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub i: usize,
    pub eps: f64,
    pub stats: FiveNumber,
    pub censored_count: usize,
}

pub fn summarize(thresholds: &[f64], trials: &[TrialResult]) -> Result<Vec<SummaryRow>> {
    thresholds
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let js: Vec<f64> = trials.iter().map(|t| t.first_passage[i] as f64).collect();
            Ok(SummaryRow {
                i,
                eps,
                stats: five_number_summary(&js)?,
                censored_count: trials.iter().filter(|t| t.censored[i]).count(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        BenchConfig { trials: 4, m: 16, n: 16, ..Default::default() }
    }

    #[test]
    fn grid_endpoints() {
        let g = tolerance_grid(64);
        assert_eq!(g.len(), 65);
        assert_eq!(g[0], 2f64.powi(-32));
        assert_eq!(g[64], 2f64.powi(-16));
    }

    #[test]
    fn first_passage_is_monotone_in_tolerance() {
        let grid = tolerance_grid(16);
        for t in run_bench(&small(), &grid).unwrap() {
            assert_eq!(t.status, InnerStatus::Converged);
            assert!(t.censored.iter().all(|c| !c));
            // grid is increasing in ε, so passages are nonincreasing
            assert!(t.first_passage.windows(2).all(|w| w[0] >= w[1]));
            assert!(t.certificate_holds);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let grid = tolerance_grid(8);
        assert_eq!(run_bench(&small(), &grid).unwrap(), run_bench_sequential(&small(), &grid).unwrap());
    }

    #[test]
    fn censoring_on_max_iters() {
        let cfg = BenchConfig { max_iters: 2, ..small() };
        let grid = tolerance_grid(4);
        let trials = run_bench(&cfg, &grid).unwrap();
        let rows = summarize(&grid, &trials).unwrap();
        assert_eq!(rows.len(), 5);
        for t in &trials {
            assert_eq!(t.status, InnerStatus::MaxIters);
        }
        assert!(rows.iter().all(|r| r.censored_count == cfg.trials));
        assert!(rows.iter().all(|r| r.stats.max == 2.0));
    }

    #[test]
    fn zero_trials_is_config_error() {
        let cfg = BenchConfig { trials: 0, ..small() };
        assert!(matches!(run_bench(&cfg, &[1e-3]), Err(Error::Config(_))));
    }
}
