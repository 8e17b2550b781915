//! Outer loop: inexact accelerated proximal gradient with line search.
//!
//! Each iteration forms the momentum point `y_k`, takes a gradient step to
//! `y⁺ = y_k - ∇f(y_k)/L_k`, and asks the inner loop for a point `x_k` whose
//! duality gap is below `ε°_k + (ρ_k/2)‖x_k - y_k‖²`. An Armijo test on the
//! Bregman divergence of `f` doubles `B_k` (and `L_k = (1+ρ)B_k`) until it
//! passes. The run stops once `‖x_k - y_k‖ ≤ ε`.

use crate::error::{check_len, Error, Result};
use crate::inner::{pppgd, tau_cap_default, InnerConfig, InnerStatus, DEFAULT_INNER_MAX_ITERS};
use crate::linops::LinearOperator;
use crate::prox::RegularizerSpec;
use crate::vecops::{dist, dist_sq, dot};

/// A convex, Lipschitz-smooth function.
pub trait SmoothFunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Global Lipschitz constant of the gradient, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// Bregman divergence `f(x) - f(y) - ⟨∇f(y), x - y⟩`. Implementors may
    /// override this with a cancellation-free formula.
    fn bregman(&self, x: &[f64], y: &[f64], f_y: f64, grad_y: &[f64]) -> f64 {
        let step: f64 = x.iter().zip(y).zip(grad_y).map(|((a, b), g)| g * (a - b)).sum();
        self.value(x) - f_y - step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterConfig {
    /// Error schedule scale `𝓔₀`.
    pub e0: f64,
    /// Error schedule exponent, `p > 1`.
    pub p: f64,
    /// Over-relaxation ratio: `ρ_k = ρB_k`, `L_k = (1+ρ)B_k`.
    pub rho: f64,
    /// Floor ratio for backtracking: `L_{k+1} ≥ r L_max`.
    pub r: f64,
    /// Half-life of the outer backtracking `L_{k+1} = 2^{-1/s} L_k`.
    pub s: u32,
    /// Half-life of the inner line-search relaxation.
    pub s_inner: u32,
    pub b0: f64,
    /// Stationarity tolerance on `‖x_k - y_k‖`.
    pub eps_stat: f64,
    pub max_iters: usize,
    pub b_cap: f64,
    pub inner_max_iters: usize,
    /// Keep `(x_k, y_k, x°_k)` for every iteration in the trace.
    pub record_iterates: bool,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            e0: 64.0,
            p: 2.0,
            rho: 1.0,
            r: 1.0 / 16.0,
            s: 1024,
            s_inner: 4096,
            b0: 1.0,
            eps_stat: 1e-8,
            max_iters: 100_000,
            b_cap: tau_cap_default(),
            inner_max_iters: DEFAULT_INNER_MAX_ITERS,
            record_iterates: false,
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.e0 > 0.0 && self.e0.is_finite()) {
            return bad(format!("E0 must be positive, got {}", self.e0));
        }
        if !(self.p > 1.0) {
            return bad(format!("p must exceed 1, got {}", self.p));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return bad(format!("r must lie in (0, 1], got {}", self.r));
        }
        if self.s == 0 || self.s_inner == 0 {
            return bad("half-lives s and s_inner must be >= 1".into());
        }
        if !(self.b0 > 0.0 && self.b0 <= self.b_cap) {
            return bad(format!("B0 must lie in (0, B_cap], got {}", self.b0));
        }
        if !(self.eps_stat > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps_stat));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterStatus {
    Converged,
    MaxIters,
    LineSearchError,
    /// An inner solve hit its iteration budget without certifying the gap.
    InnerMaxIters,
}

/// One completed outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub k: usize,
    /// Inner iterations spent at this `k`, summed over Armijo retries.
    pub inner_iters: usize,
    /// Number of inner solves at this `k` (1 + number of `B_k` doublings).
    pub inner_calls: usize,
    /// `‖x_k - y_k‖`.
    pub residual: f64,
    pub eps_abs: f64,
    /// `(ρ_k/2)‖x_k - y_k‖²`.
    pub eps_rel: f64,
    /// `F(x_k) = f(x_k) + ω(Ax_k)`, diagnostic only.
    pub objective: f64,
    pub alpha: f64,
    pub b: f64,
    pub l: f64,
    /// Final duality gap reported by the inner loop.
    pub gap: f64,
    /// `(L + L_k)‖x_k - y_k‖`, an upper bound on `dist(0 | ∂_{ε_k}F(x_k))`.
    pub stationarity_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterIterates {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_circ: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OuterTrace {
    pub records: Vec<OuterRecord>,
    /// Populated only with [`OuterConfig::record_iterates`].
    pub iterates: Vec<OuterIterates>,
    /// `x_{-1} = x°_{-1}`.
    pub x_init: Vec<f64>,
}

impl OuterTrace {
    pub fn total_inner_iters(&self) -> usize {
        self.records.iter().map(|r| r.inner_iters).sum()
    }

    pub fn l_max(&self) -> f64 {
        self.records.iter().map(|r| r.l).fold(0.0, f64::max)
    }

    pub fn l_min(&self) -> f64 {
        self.records.iter().map(|r| r.l).fold(f64::INFINITY, f64::min)
    }
}

/// Derived sequences used by the convergence bounds, rebuilt from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryLedger {
    pub e0: f64,
    pub p: f64,
    pub l0: f64,
    /// Largest `L_k` seen by the run (including rejected line-search trials).
    pub l_max: f64,
    /// `β_k = α_k² L_k / (α_0² L_0)`.
    pub beta: Vec<f64>,
    /// `𝓡_k(p) = 𝓔₀(1 + Σ_{l=1}^k l^{-p})`.
    pub r: Vec<f64>,
    /// `Σ_{i=1}^k L_i^{-1/2}`.
    pub inv_sqrt_l_sum: Vec<f64>,
    alpha: Vec<f64>,
    l: Vec<f64>,
}

impl TheoryLedger {
    pub fn from_trace(trace: &OuterTrace, e0: f64, p: f64, l_max: f64) -> Self {
        let alpha: Vec<f64> = trace.records.iter().map(|r| r.alpha).collect();
        let l: Vec<f64> = trace.records.iter().map(|r| r.l).collect();
        let l0 = l.first().copied().unwrap_or(f64::NAN);
        let a0 = alpha.first().copied().unwrap_or(1.0);
        let beta = alpha.iter().zip(&l).map(|(a, lk)| a * a * lk / (a0 * a0 * l0)).collect();

        let mut r = Vec::with_capacity(l.len());
        let mut inv_sqrt_l_sum = Vec::with_capacity(l.len());
        let mut acc_r = 1.0;
        let mut acc_l = 0.0;
        for (k, lk) in l.iter().enumerate() {
            if k > 0 {
                acc_r += (k as f64).powf(-p);
                acc_l += lk.powf(-0.5);
            }
            r.push(e0 * acc_r);
            inv_sqrt_l_sum.push(acc_l);
        }
        Self { e0, p, l0, l_max: l_max.max(l.iter().copied().fold(0.0, f64::max)), beta, r, inv_sqrt_l_sum, alpha, l }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// `(1 + α₀√L₀ Σ L_i^{-1/2})^{-2}`.
    pub fn beta_lower(&self, k: usize) -> f64 {
        (1.0 + self.alpha[0] * self.l0.sqrt() * self.inv_sqrt_l_sum[k]).powi(-2)
    }

    /// `(1 + (α₀√L₀/2) Σ L_i^{-1/2})^{-2}`.
    pub fn beta_upper(&self, k: usize) -> f64 {
        (1.0 + 0.5 * self.alpha[0] * self.l0.sqrt() * self.inv_sqrt_l_sum[k]).powi(-2)
    }

    /// `(1 - α_k)α_{k-1}²L_{k-1} - α_k²L_k` for `k ≥ 1`.
    pub fn recursion_residual(&self, k: usize) -> f64 {
        let (a, ap) = (self.alpha[k], self.alpha[k - 1]);
        (1.0 - a) * ap * ap * self.l[k - 1] - a * a * self.l[k]
    }

    /// `𝓔₀ / (4 k^{2+p})`, the floor of the absolute error schedule.
    pub fn eps_floor(&self, k: usize) -> f64 {
        self.e0 / (4.0 * (k as f64).powf(2.0 + self.p))
    }

    /// `β_k ((L₀/2) d² + 𝓡_k(p))` with `d = ‖x̄ - x°_{-1}‖`.
    pub fn value_bound(&self, k: usize, dist0: f64) -> f64 {
        self.beta[k] * (0.5 * self.l0 * dist0 * dist0 + self.r[k])
    }

    /// `(1 + k√L₀/(2√L_max))^{-2} ((L₀/2) d² + 𝓡_k(p))`.
    pub fn value_bound_uniform(&self, k: usize, dist0: f64) -> f64 {
        let q = 1.0 + k as f64 * self.l0.sqrt() / (2.0 * self.l_max.sqrt());
        (0.5 * self.l0 * dist0 * dist0 + self.r[k]) / (q * q)
    }

    /// `2√(L₀/L_max) (1 + k√L₀/(2√L_max))^{-1} (d + √(2𝓡_k(p)/L₀))`.
    pub fn residual_bound(&self, k: usize, dist0: f64) -> f64 {
        let ratio = (self.l0 / self.l_max).sqrt();
        let q = 1.0 + 0.5 * k as f64 * ratio;
        2.0 * ratio / q * (dist0 + (2.0 * self.r[k] / self.l0).sqrt())
    }

    /// `𝓡_∞(p) ≈ 𝓔₀(1 + ζ(p))`, summed to `terms` plus the integral tail bound.
    pub fn r_infinity(e0: f64, p: f64, terms: usize) -> f64 {
        let partial: f64 = (1..=terms).map(|l| (l as f64).powf(-p)).sum();
        e0 * (1.0 + partial + (terms as f64).powf(1.0 - p) / (p - 1.0))
    }
}

#[derive(Debug, Clone)]
pub struct IapgOutput {
    pub x: Vec<f64>,
    pub status: OuterStatus,
    pub trace: OuterTrace,
    pub ledger: TheoryLedger,
}

/// `α x°_{k-1} + (1 - α) x_{k-1}`.
pub fn momentum_point(x_circ_prev: &[f64], x_prev: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_len(x_prev.len(), x_circ_prev.len())?;
    Ok(x_circ_prev.iter().zip(x_prev).map(|(c, x)| alpha * c + (1.0 - alpha) * x).collect())
}

/// Absolute inner tolerance: `𝓔₀` at `k = 0`, else `(L_k/L₀) α_k² 𝓔₀ k^{-p}`.
pub fn eps_abs_schedule(k: usize, l_k: f64, l0: f64, alpha_k: f64, e0: f64, p: f64) -> f64 {
    if k == 0 {
        e0
    } else {
        l_k / l0 * alpha_k * alpha_k * e0 * (k as f64).powf(-p)
    }
}

/// Positive root of `(1 - α) = α² L_next / (α_k² L_k)`.
pub fn update_alpha(alpha_k: f64, l_k: f64, l_next: f64) -> Result<f64> {
    if !(alpha_k > 0.0 && alpha_k <= 1.0 && l_k > 0.0 && l_next > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "update_alpha needs alpha in (0, 1] and positive L, got ({alpha_k}, {l_k}, {l_next})"
        )));
    }
    // L_next α² + cα - c = 0 with c = α_k² L_k, in cancellation-free form
    let c = alpha_k * alpha_k * l_k;
    Ok(2.0 * c / (c + (c * c + 4.0 * l_next * c).sqrt()))
}

/// `f(x) - f(y) - ⟨∇f(y), x - y⟩ ≤ (B/2)‖x - y‖²`.
pub fn armijo_check(f_x: f64, f_y: f64, grad_y: &[f64], x: &[f64], y: &[f64], b: f64) -> bool {
    let step: f64 = x.iter().zip(y).zip(grad_y).map(|((a, c), g)| g * (a - c)).sum();
    f_x - f_y - step <= 0.5 * b * dist_sq(x, y)
}

/// `max(2^{-1/s} L_k, r L_max)`.
#[allow(non_snake_case)]
pub fn backtrack_L(l_k: f64, l_max: f64, r: f64, s: u32) -> f64 {
    (2f64.powf(-1.0 / f64::from(s)) * l_k).max(r * l_max)
}

/// `x_{k-1} + α^{-1}(x_k - x_{k-1})`.
pub fn extrapolate(x_prev: &[f64], x_k: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_len(x_prev.len(), x_k.len())?;
    if alpha == 0.0 {
        return Err(Error::InvalidArgument("extrapolation with alpha = 0".into()));
    }
    Ok(x_prev.iter().zip(x_k).map(|(p, x)| p + (x - p) / alpha).collect())
}

/// Runs the outer loop from `x_{-1} = x°_{-1} = x_init`.
pub fn iapg_solve<F: SmoothFunction + ?Sized>(
    f: &F,
    spec: &RegularizerSpec,
    a: &LinearOperator,
    x_init: &[f64],
    cfg: &OuterConfig,
) -> Result<IapgOutput> {
    cfg.validate()?;
    let (m, n) = a.shape();
    check_len(n, f.dim())?;
    check_len(n, x_init.len())?;
    check_len(m, spec.dim())?;

    let norm_a = a.norm_sq_estimate();
    let norm_a = if norm_a > 0.0 { norm_a } else { 1.0 };
    let lip_f = f.lipschitz();
    let omega_of = |x: &[f64]| -> f64 {
        let mut ax = vec![0.0; m];
        a.apply_into(x, &mut ax);
        spec.omega_unchecked(&ax)
    };

    let mut b = cfg.b0;
    let mut l = (1.0 + cfg.rho) * b;
    let mut l0 = l;
    let mut l_max = l;
    let mut alpha = 1.0;
    let mut alpha_prev = f64::NAN;
    let mut l_prev = f64::NAN;
    let mut x_prev = x_init.to_vec();
    let mut x_circ_prev = x_init.to_vec();
    let mut trace = OuterTrace { x_init: x_init.to_vec(), ..Default::default() };

    let finish = |x: Vec<f64>, status: OuterStatus, trace: OuterTrace, l_max: f64| {
        let ledger = TheoryLedger::from_trace(&trace, cfg.e0, cfg.p, l_max);
        Ok(IapgOutput { x, status, trace, ledger })
    };

    for k in 0..cfg.max_iters {
        let mut y = momentum_point(&x_circ_prev, &x_prev, alpha)?;
        let mut f_y = f.value(&y);
        let mut grad_y = f.gradient(&y);
        let mut inner_iters = 0;
        let mut inner_calls = 0;
        let mut overflow = false;

        let (x, eps_abs, rho_k, gap) = loop {
            let eps_abs = eps_abs_schedule(k, l, l0, alpha, cfg.e0, cfg.p);
            let rho_k = cfg.rho * b;
            let lambda = 1.0 / l;
            let y_plus: Vec<f64> = y.iter().zip(&grad_y).map(|(yi, g)| yi - g / l).collect();
            let inner_cfg = InnerConfig {
                eps_abs,
                rho: rho_k,
                lambda,
                tau0: lambda * norm_a,
                s: cfg.s_inner,
                max_iters: cfg.inner_max_iters,
                tau_cap: tau_cap_default(),
            };
            let rep = pppgd(a, spec, &y, &y_plus, &y, &inner_cfg)?;
            inner_iters += rep.iters;
            inner_calls += 1;
            match rep.status {
                InnerStatus::Converged => {}
                InnerStatus::LineSearchError | InnerStatus::MaxIters => {
                    let status = if rep.status == InnerStatus::MaxIters {
                        OuterStatus::InnerMaxIters
                    } else {
                        OuterStatus::LineSearchError
                    };
                    return finish(x_prev, status, trace, l_max);
                }
            }
            let x = rep.z;
            if f.bregman(&x, &y, f_y, &grad_y) <= 0.5 * b * dist_sq(&x, &y) {
                break (x, eps_abs, rho_k, rep.gap);
            }
            b *= 2.0;
            l = (1.0 + cfg.rho) * b;
            l_max = l_max.max(l);
            if b > cfg.b_cap {
                overflow = true;
                break (x, eps_abs, rho_k, rep.gap);
            }
            if k == 0 {
                l0 = l;
            } else {
                // keep (1 - α_k) α_{k-1}² L_{k-1} = α_k² L_k with the enlarged L_k
                alpha = update_alpha(alpha_prev, l_prev, l)?;
                y = momentum_point(&x_circ_prev, &x_prev, alpha)?;
                f_y = f.value(&y);
                grad_y = f.gradient(&y);
            }
        };

        let residual = dist(&x, &y);
        let x_circ = extrapolate(&x_prev, &x, alpha)?;
        trace.records.push(OuterRecord {
            k,
            inner_iters,
            inner_calls,
            residual,
            eps_abs,
            eps_rel: 0.5 * rho_k * residual * residual,
            objective: f.value(&x) + omega_of(&x),
            alpha,
            b,
            l,
            gap,
            stationarity_bound: lip_f.map(|lf| (lf + l) * residual),
        });
        if cfg.record_iterates {
            trace.iterates.push(OuterIterates { x: x.clone(), y: y.clone(), x_circ: x_circ.clone() });
        }

        if residual <= cfg.eps_stat {
            return finish(x, OuterStatus::Converged, trace, l_max);
        }
        if overflow {
            return finish(x, OuterStatus::LineSearchError, trace, l_max);
        }

        let l_next = backtrack_L(l, l_max, cfg.r, cfg.s);
        let alpha_next = update_alpha(alpha, l, l_next)?;
        alpha_prev = alpha;
        l_prev = l;
        alpha = alpha_next;
        l = l_next;
        b = l / (1.0 + cfg.rho);
        x_prev = x;
        x_circ_prev = x_circ;
    }
    finish(x_prev, OuterStatus::MaxIters, trace, l_max)
}

/// `f(x) = ½‖x - c‖²`, handy for degenerate checks.
#[derive(Debug, Clone)]
pub struct ShiftedQuadratic {
    pub center: Vec<f64>,
}

impl SmoothFunction for ShiftedQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dist_sq(x, &self.center)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| a - c).collect()
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
    fn bregman(&self, x: &[f64], y: &[f64], _f_y: f64, _grad_y: &[f64]) -> f64 {
        0.5 * dist_sq(x, y)
    }
}

/// `f(x) = ½‖Cx‖²` for a dense `C`; its Bregman divergence is `½‖C(x - y)‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquaresNorm {
    pub op: LinearOperator,
}

impl SmoothFunction for LeastSquaresNorm {
    fn dim(&self) -> usize {
        self.op.cols()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let cx = self.op.apply(x).expect("dimension checked by caller");
        0.5 * dot(&cx, &cx)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let cx = self.op.apply(x).expect("dimension checked by caller");
        self.op.apply_adjoint(&cx).expect("dimension checked by caller")
    }
}
