//! Inner loop: proximal gradient descent on the dual of the proximal point problem.
//!
//! For a fixed `y⁺` and `λ > 0` the primal and dual objectives are
//!
//! ```text
//! Φ(z) = ω(Az) + ‖z - y⁺‖² / (2λ)
//! Ψ(v) = (λ/2)‖Aᵀv‖² - ⟨Aᵀv, y⁺⟩ + ω*(v)
//! ```
//!
//! and `Φ(z) + Ψ(v) ≥ 0` for every pair, with equality at the optimum. The loop
//! iterates on `v`, maps back through `z = y⁺ - λAᵀv`, and stops at the first
//! `j` where the gap drops below `ε° + (ρ/2)‖z_j - y_k‖²`.

use crate::error::{check_len, Error, Result};
use crate::linops::LinearOperator;
use crate::prox::RegularizerSpec;
use crate::vecops::{dist_sq, dot, norm_sq};

pub const DEFAULT_INNER_MAX_ITERS: usize = 1 << 20;

/// `2^1023`, the overflow guard on the line-search constant.
pub fn tau_cap_default() -> f64 {
    2f64.powi(1023)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerConfig {
    /// Absolute tolerance `ε°`.
    pub eps_abs: f64,
    /// Relative tolerance weight `ρ`.
    pub rho: f64,
    pub lambda: f64,
    /// Initial (inverted) step size; `λ‖AᵀA‖` is the natural choice.
    pub tau0: f64,
    /// Half-life of the relaxation `τ_{j+1} = 2^{-1/s} τ_j`.
    pub s: u32,
    pub max_iters: usize,
    pub tau_cap: f64,
}

impl InnerConfig {
    /// Config with `τ₀ = λ‖AᵀA‖` estimated by power iteration.
    pub fn for_operator(a: &LinearOperator, lambda: f64, eps_abs: f64, rho: f64, s: u32) -> Self {
        let tau0 = lambda * a.norm_sq_estimate();
        Self {
            eps_abs,
            rho,
            lambda,
            tau0: if tau0 > 0.0 { tau0 } else { lambda },
            s,
            max_iters: DEFAULT_INNER_MAX_ITERS,
            tau_cap: tau_cap_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau0 must be positive, got {}", self.tau0)));
        }
        if self.s == 0 {
            return Err(Error::InvalidArgument("relaxation half-life s must be >= 1".into()));
        }
        if !(self.eps_abs >= 0.0) || !(self.rho >= 0.0) {
            return Err(Error::InvalidArgument("eps_abs and rho must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    Converged,
    MaxIters,
    LineSearchError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerReport {
    /// Primal candidate, always `y⁺ - λAᵀv`.
    pub z: Vec<f64>,
    /// Dual iterate, always in `dom ω*`.
    pub v: Vec<f64>,
    /// Exit iteration `J`.
    pub iters: usize,
    pub gap: f64,
    pub status: InnerStatus,
    /// Last line-search constant in force.
    pub tau: f64,
}

/// Snapshot handed to the observer at the top of every iteration `j`,
/// before the exit test.
#[derive(Debug)]
pub struct InnerStep<'a> {
    pub j: usize,
    pub z: &'a [f64],
    pub v: &'a [f64],
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    /// Right-hand side of the exit test.
    pub threshold: f64,
    /// `τ_j` before any doubling at this iteration.
    pub tau: f64,
    /// Accepted `τ` of the step that produced `v_j` (`None` at `j = 0`).
    pub accepted_tau: Option<f64>,
}

/// `Φ_λ(z) = ω(Az) + ‖z - y⁺‖² / (2λ)`.
pub fn primal_value(
    spec: &RegularizerSpec,
    a: &LinearOperator,
    lambda: f64,
    y_plus: &[f64],
    z: &[f64],
) -> Result<f64> {
    check_len(a.cols(), y_plus.len())?;
    check_len(a.rows(), spec.dim())?;
    let az = a.apply(z)?;
    Ok(spec.omega_unchecked(&az) + dist_sq(z, y_plus) / (2.0 * lambda))
}

/// `Ψ_λ(v) = (λ/2)‖Aᵀv‖² - ⟨Aᵀv, y⁺⟩`, or `+∞` when `v ∉ dom ω*`.
pub fn dual_value(
    spec: &RegularizerSpec,
    a: &LinearOperator,
    lambda: f64,
    y_plus: &[f64],
    v: &[f64],
) -> Result<f64> {
    check_len(a.cols(), y_plus.len())?;
    check_len(spec.dim(), v.len())?;
    if !spec.in_conj_domain(v, 1e-12) {
        return Ok(f64::INFINITY);
    }
    let atv = a.apply_adjoint(v)?;
    Ok(0.5 * lambda * norm_sq(&atv) - dot(&atv, y_plus))
}

/// `λ‖Aᵀ(v_new - v_old)‖² ≤ τ‖v_new - v_old‖²`.
pub fn line_search_pass(a: &LinearOperator, lambda: f64, v_new: &[f64], v_old: &[f64], tau: f64) -> Result<bool> {
    check_len(a.rows(), v_new.len())?;
    check_len(a.rows(), v_old.len())?;
    let dv: Vec<f64> = v_new.iter().zip(v_old).map(|(a, b)| a - b).collect();
    let atdv = a.apply_adjoint(&dv)?;
    Ok(lambda * norm_sq(&atdv) <= tau * norm_sq(&dv))
}

/// Runs the inner loop from `z0`; `y_k` enters only the relative tolerance,
/// `y_plus` is the point whose proximal step is approximated.
pub fn pppgd(
    a: &LinearOperator,
    spec: &RegularizerSpec,
    y_k: &[f64],
    y_plus: &[f64],
    z0: &[f64],
    cfg: &InnerConfig,
) -> Result<InnerReport> {
    pppgd_observed(a, spec, y_k, y_plus, z0, cfg, |_| {})
}

/// [`pppgd`] with a callback invoked once per iteration.
pub fn pppgd_observed<F>(
    a: &LinearOperator,
    spec: &RegularizerSpec,
    y_k: &[f64],
    y_plus: &[f64],
    z0: &[f64],
    cfg: &InnerConfig,
    mut observe: F,
) -> Result<InnerReport>
where
    F: FnMut(&InnerStep<'_>),
{
    cfg.validate()?;
    let (m, n) = a.shape();
    check_len(m, spec.dim())?;
    check_len(n, y_k.len())?;
    check_len(n, y_plus.len())?;
    check_len(n, z0.len())?;
    let lambda = cfg.lambda;

    // v_0 = prox_{ω*}(A z_0), then z_0 is re-derived from v_0
    let mut az = a.apply(z0)?;
    let mut v = vec![0.0; m];
    spec.project_conj_domain(&az, &mut v)?;
    let mut atv = vec![0.0; n];
    a.apply_adjoint_into(&v, &mut atv);
    let mut z = vec![0.0; n];
    let mut sums = primal_update(&mut z, y_plus, y_k, &atv, lambda);
    a.apply_into(&z, &mut az);

    let mut v_new = vec![0.0; m];
    let mut atv_new = vec![0.0; n];
    let mut scratch = vec![0.0; m];
    let mut tau = cfg.tau0;
    let mut accepted_tau = None;
    let shrink = 2f64.powf(-1.0 / f64::from(cfg.s));

    let mut gap = f64::NAN;
    for j in 0..cfg.max_iters {
        // with z = y⁺ - λAᵀv: ‖z - y⁺‖²/(2λ) = (λ/2)‖Aᵀv‖²
        let half = 0.5 * lambda * sums.atv_sq;
        let primal = spec.omega_unchecked(&az) + half;
        let dual = half - sums.atv_dot_y;
        gap = primal + dual;
        let threshold = cfg.eps_abs + 0.5 * cfg.rho * sums.rel_sq;
        observe(&InnerStep { j, z: &z, v: &v, primal, dual, gap, threshold, tau, accepted_tau });
        if gap < threshold {
            return Ok(InnerReport { z, v, iters: j, gap, status: InnerStatus::Converged, tau });
        }

        // ∇(h∘Aᵀ)(v) = A(λAᵀv - y⁺) = -Az
        let mut accepted = false;
        while tau <= cfg.tau_cap {
            let dv_sq = spec.projected_step(&v, &az, 1.0 / tau, &mut v_new, &mut scratch)?;
            a.apply_adjoint_into(&v_new, &mut atv_new);
            let lhs: f64 = lambda * dist_sq(&atv_new, &atv);
            let rhs: f64 = tau * dv_sq;
            if lhs <= rhs {
                accepted = true;
                break;
            }
            tau *= 2.0;
        }
        if !accepted {
            return Ok(InnerReport { z, v, iters: j, gap, status: InnerStatus::LineSearchError, tau });
        }
        accepted_tau = Some(tau);
        std::mem::swap(&mut v, &mut v_new);
        std::mem::swap(&mut atv, &mut atv_new);
        tau *= shrink;
        sums = primal_update(&mut z, y_plus, y_k, &atv, lambda);
        a.apply_into(&z, &mut az);
    }

    if cfg.max_iters > 0 {
        gap = spec.omega_unchecked(&az) + lambda * sums.atv_sq - sums.atv_dot_y;
    }
    Ok(InnerReport { z, v, iters: cfg.max_iters, gap, status: InnerStatus::MaxIters, tau })
}

struct PrimalSums {
    atv_sq: f64,
    atv_dot_y: f64,
    rel_sq: f64,
}

/// `z = y⁺ - λAᵀv` together with `‖Aᵀv‖²`, `⟨Aᵀv, y⁺⟩` and `‖z - y_k‖²`.
fn primal_update(z: &mut [f64], y_plus: &[f64], y_k: &[f64], atv: &[f64], lambda: f64) -> PrimalSums {
    const W: usize = 4;
    let (mut s0, mut s1, mut s2) = ([0.0; W], [0.0; W], [0.0; W]);
    let mut zc = z.chunks_exact_mut(W);
    let mut pc = y_plus.chunks_exact(W);
    let mut kc = y_k.chunks_exact(W);
    let mut tc = atv.chunks_exact(W);
    for (((zz, yp), yk), t) in (&mut zc).zip(&mut pc).zip(&mut kc).zip(&mut tc) {
        for l in 0..W {
            let zi = yp[l] - lambda * t[l];
            zz[l] = zi;
            s0[l] += t[l] * t[l];
            s1[l] += t[l] * yp[l];
            s2[l] += (zi - yk[l]) * (zi - yk[l]);
        }
    }
    let fold = |s: [f64; W]| (s[0] + s[1]) + (s[2] + s[3]);
    let (mut atv_sq, mut atv_dot_y, mut rel_sq) = (fold(s0), fold(s1), fold(s2));
    let rest = zc.into_remainder().iter_mut().zip(pc.remainder()).zip(kc.remainder()).zip(tc.remainder());
    for (((zi, yp), yk), t) in rest {
        *zi = yp - lambda * t;
        atv_sq += t * t;
        atv_dot_y += t * yp;
        rel_sq += (*zi - yk) * (*zi - yk);
    }
    PrimalSums { atv_sq, atv_dot_y, rel_sq }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::soft_threshold;
    use approx::assert_relative_eq;

    fn cfg(lambda: f64, eps: f64, tau0: f64) -> InnerConfig {
        InnerConfig {
            eps_abs: eps,
            rho: 0.0,
            lambda,
            tau0,
            s: 4096,
            max_iters: DEFAULT_INNER_MAX_ITERS,
            tau_cap: tau_cap_default(),
        }
    }

    #[test]
    fn primal_value_examples() {
        let l1 = RegularizerSpec::scaled_l1(1, 1.0).unwrap();
        let id = LinearOperator::identity(1);
        assert_eq!(primal_value(&l1, &id, 1.0, &[2.0], &[1.0]).unwrap(), 1.5);

        let zero = RegularizerSpec::zero(1);
        assert_eq!(primal_value(&zero, &id, 1.0, &[2.0], &[2.0]).unwrap(), 0.0);

        let l1b = RegularizerSpec::scaled_l1(1, 2.0).unwrap();
        let d = LinearOperator::forward_difference(2).unwrap();
        assert_eq!(primal_value(&l1b, &d, 0.5, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), 3.0);
    }

    #[test]
    fn dual_value_examples() {
        let l1 = RegularizerSpec::scaled_l1(1, 1.0).unwrap();
        let id = LinearOperator::identity(1);
        assert_eq!(dual_value(&l1, &id, 1.0, &[2.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(dual_value(&l1, &id, 1.0, &[2.0], &[1.0]).unwrap(), -1.5);
        // (z, v) = (1, 1) is optimal: prox is soft_threshold(2, 1) = 1
        let phi = primal_value(&l1, &id, 1.0, &[2.0], &soft_threshold(&[2.0], 1.0)).unwrap();
        assert_eq!(phi + dual_value(&l1, &id, 1.0, &[2.0], &[1.0]).unwrap(), 0.0);
        // infeasible dual point
        assert_eq!(dual_value(&l1, &id, 1.0, &[2.0], &[1.5]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn line_search_examples() {
        let id = LinearOperator::identity(3);
        let v = [0.1, 0.2, 0.3];
        assert!(line_search_pass(&id, 1.0, &v, &v, 0.0).unwrap());
        assert!(line_search_pass(&id, 1.0, &[1.0, -2.0, 0.5], &v, 1.0).unwrap());

        let row = LinearOperator::dense(1, 2, vec![-1.0, 1.0]).unwrap();
        // A is 1x2, v lives in R^1: ‖Aᵀdv‖² = 2 dv², so λ = 1, τ = 1 fails and τ = 2 passes
        assert!(!line_search_pass(&row, 1.0, &[1.0], &[0.0], 1.0).unwrap());
        assert!(line_search_pass(&row, 1.0, &[1.0], &[0.0], 2.0).unwrap());
    }

    #[test]
    fn scalar_prox_matches_soft_threshold() {
        let l1 = RegularizerSpec::scaled_l1(1, 1.0).unwrap();
        let id = LinearOperator::identity(1);
        let r = pppgd(&id, &l1, &[2.0], &[2.0], &[2.0], &cfg(1.0, 1e-10, 1.0)).unwrap();
        assert_eq!(r.status, InnerStatus::Converged);
        assert!((r.z[0] - 1.0).abs() < 1e-5);

        let r = pppgd(&id, &l1, &[0.5], &[0.5], &[0.5], &cfg(1.0, 1e-10, 1.0)).unwrap();
        assert_eq!(r.status, InnerStatus::Converged);
        assert!(r.z[0].abs() < 1e-5);
    }

    #[test]
    fn huge_tolerance_exits_immediately() {
        let l1 = RegularizerSpec::scaled_l1(1, 1.0).unwrap();
        let id = LinearOperator::identity(1);
        let r = pppgd(&id, &l1, &[2.0], &[2.0], &[2.0], &cfg(1.0, 1e300, 1.0)).unwrap();
        assert_eq!(r.iters, 0);
        assert_eq!(r.status, InnerStatus::Converged);
        // v_0 = clamp(2) = 1, z_0 = 2 - 1
        assert_eq!(r.v, vec![1.0]);
        assert_eq!(r.z, vec![1.0]);
    }

    #[test]
    fn zero_regularizer_returns_y_plus() {
        let spec = RegularizerSpec::zero(3);
        let a = LinearOperator::forward_difference(4).unwrap();
        let y = [1.0, -2.0, 0.5, 3.0];
        let yk = [0.0; 4];
        let r = pppgd(&a, &spec, &yk, &y, &yk, &cfg(0.7, 1e-12, 1.0)).unwrap();
        assert_eq!(r.iters, 0);
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.z, y.to_vec());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let l1 = RegularizerSpec::scaled_l1(1, 1.0).unwrap();
        let id = LinearOperator::identity(1);
        let mut c = cfg(1.0, 1e-8, 1.0);
        c.lambda = 0.0;
        assert!(pppgd(&id, &l1, &[1.0], &[1.0], &[1.0], &c).is_err());
        let mut c = cfg(1.0, 1e-8, 1.0);
        c.s = 0;
        assert!(pppgd(&id, &l1, &[1.0], &[1.0], &[1.0], &c).is_err());
        assert!(pppgd(&id, &l1, &[1.0, 2.0], &[1.0], &[1.0], &cfg(1.0, 1e-8, 1.0)).is_err());
    }

    #[test]
    fn max_iters_and_line_search_error() {
        let l1 = RegularizerSpec::scaled_l1(3, 1.0).unwrap();
        let a = LinearOperator::dense(3, 3, vec![2.0, 1.0, 0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0]).unwrap();
        let y = [3.0, -2.0, 5.0];
        let mut c = cfg(1.0, 1e-14, 1.0);
        c.max_iters = 2;
        let r = pppgd(&a, &l1, &y, &y, &y, &c).unwrap();
        assert_eq!(r.status, InnerStatus::MaxIters);
        assert_eq!(r.iters, 2);

        let mut c = cfg(1.0, 1e-14, 1.0);
        c.tau_cap = 0.5;
        let r = pppgd(&a, &l1, &y, &y, &y, &c).unwrap();
        assert_eq!(r.status, InnerStatus::LineSearchError);
    }

    #[test]
    fn gap_equals_fenchel_young_form() {
        // Φ(z) + Ψ(v) = ω(Az) + ω*(v) - ⟨v, Az⟩ whenever z = y⁺ - λAᵀv
        let l1 = RegularizerSpec::scaled_l1(4, 0.8).unwrap();
        let a = LinearOperator::forward_difference(5).unwrap();
        let y = [0.3, 0.5, -0.1, 0.2, 0.25];
        let lambda = 0.6;
        let mut c = cfg(lambda, 1e-12, lambda * 4.0);
        c.max_iters = 7;
        let mut checked = 0;
        pppgd_observed(&a, &l1, &y, &y, &y, &c, |st| {
            let az = a.apply(st.z).unwrap();
            let fy = l1.omega(&az).unwrap() - dot(st.v, &az);
            assert_relative_eq!(st.gap, fy, epsilon = 1e-12, max_relative = 1e-12);
            checked += 1;
        })
        .unwrap();
        assert_eq!(checked, 7);
    }

    #[test]
    fn tau_relaxes_and_stays_bounded() {
        let l1 = RegularizerSpec::scaled_l1(5, 2.0).unwrap();
        let a = LinearOperator::forward_difference(6).unwrap();
        let lambda = 0.5;
        let dense = nalgebra::DMatrix::from_row_slice(5, 6, &a.to_dense());
        let top = (dense.transpose() * &dense).symmetric_eigenvalues().max();
        let bound = 2.0 * lambda * top * (1.0 + 1e-12);
        let y = [4.0, -1.0, 3.0, 3.0, 0.0, -6.0];
        let mut c = cfg(lambda, 1e-13, 1e-3);
        c.s = 2;
        pppgd_observed(&a, &l1, &y, &y, &y, &c, |st| {
            if let Some(t) = st.accepted_tau {
                assert!(t <= bound, "tau {t} > {bound}");
            }
        })
        .unwrap();
    }
}
