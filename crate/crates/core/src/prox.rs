//! Conic polyhedral regularizers and the proximal primitives built on them.
//!
//! A max-affine regularizer `ω(z) = max_i ⟨w_i, z⟩` has conjugate `ω*` equal
//! to the indicator of the polytope `P = conv{w_i}`, so `prox_{σω*}` is the
//! Euclidean projection onto `P` for every `σ > 0`. The scaled ℓ₁ norm
//! `η‖·‖₁` is the special case whose polytope is the box `[-η, η]^m`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::vecops::{abs_sum, dist_sq};

/// Euclidean projection onto `conv{w_i}` supplied by the caller.
pub type Projector = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum RegularizerKind {
    /// `η‖z‖₁`.
    ScaledL1 { eta: f64 },
    /// `max_i ⟨w_i, z⟩`.
    MaxAffine { generators: Vec<Vec<f64>>, projector: Option<Projector> },
    /// `ω ≡ 0`.
    Zero,
}

impl fmt::Debug for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ScaledL1 { eta } => f.debug_struct("ScaledL1").field("eta", eta).finish(),
            Self::MaxAffine { generators, projector } => f
                .debug_struct("MaxAffine")
                .field("generators", generators)
                .field("projector", &projector.as_ref().map(|_| "<fn>"))
                .finish(),
            Self::Zero => f.write_str("Zero"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegularizerSpec {
    dim: usize,
    kind: RegularizerKind,
}

impl RegularizerSpec {
    pub fn scaled_l1(dim: usize, eta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("regularizer dimension must be >= 1".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        Ok(Self { dim, kind: RegularizerKind::ScaledL1 { eta } })
    }

    pub fn max_affine(generators: Vec<Vec<f64>>) -> Result<Self> {
        let dim = generators
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("max-affine needs at least one generator".into()))?;
        if dim == 0 {
            return Err(Error::InvalidArgument("regularizer dimension must be >= 1".into()));
        }
        for g in &generators {
            check_len(dim, g.len())?;
        }
        Ok(Self { dim, kind: RegularizerKind::MaxAffine { generators, projector: None } })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, kind: RegularizerKind::Zero }
    }

    /// Registers the projection onto `conv{w_i}` used by [`conj_prox`](Self::conj_prox).
    /// No-op for the other kinds.
    pub fn with_projector(mut self, projector: Projector) -> Self {
        if let RegularizerKind::MaxAffine { projector: p, .. } = &mut self.kind {
            *p = Some(projector);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &RegularizerKind {
        &self.kind
    }

    pub fn omega(&self, z: &[f64]) -> Result<f64> {
        check_len(self.dim, z.len())?;
        Ok(self.omega_unchecked(z))
    }

    pub(crate) fn omega_unchecked(&self, z: &[f64]) -> f64 {
        match &self.kind {
            RegularizerKind::ScaledL1 { eta } => eta * abs_sum(z),
            RegularizerKind::MaxAffine { generators, .. } => generators
                .iter()
                .map(|w| w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
            RegularizerKind::Zero => 0.0,
        }
    }

    /// `prox_{σω*}(v)`, i.e. the projection onto `dom ω*` (independent of `σ`).
    pub fn conj_prox(&self, sigma: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, v.len())?;
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        let mut out = vec![0.0; self.dim];
        self.project_conj_domain(v, &mut out)?;
        Ok(out)
    }

    pub(crate) fn project_conj_domain(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            RegularizerKind::ScaledL1 { eta } => {
                out.iter_mut().zip(v).for_each(|(o, x)| *o = x.clamp(-eta, *eta));
            }
            RegularizerKind::MaxAffine { projector: Some(p), .. } => {
                let proj = p(v);
                check_len(self.dim, proj.len())?;
                out.copy_from_slice(&proj);
            }
            RegularizerKind::MaxAffine { projector: None, .. } => {
                return Err(Error::UnsupportedSpec(
                    "max-affine regularizer has no registered projection onto conv{w_i}".into(),
                ));
            }
            RegularizerKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
        }
        Ok(())
    }

    /// `out = Π(v + step·g)`, returning `‖out - v‖²`. `scratch` is used by
    /// projections that are not coordinatewise.
    pub(crate) fn projected_step(
        &self,
        v: &[f64],
        g: &[f64],
        step: f64,
        out: &mut [f64],
        scratch: &mut [f64],
    ) -> Result<f64> {
        if let RegularizerKind::ScaledL1 { eta } = self.kind {
            // branch form instead of clamp: identical on non-NaN input and vectorizes
            let (lo, hi) = (-eta, eta);
            let clip = |x: f64| if x < lo { lo } else if x > hi { hi } else { x };
            let mut acc = [0.0; 4];
            let mut oc = out.chunks_exact_mut(4);
            let mut vc = v.chunks_exact(4);
            let mut gc = g.chunks_exact(4);
            for ((o, vv), gg) in (&mut oc).zip(&mut vc).zip(&mut gc) {
                for l in 0..4 {
                    let p = clip(vv[l] + gg[l] * step);
                    o[l] = p;
                    acc[l] += (p - vv[l]) * (p - vv[l]);
                }
            }
            let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for ((o, vi), gi) in oc.into_remainder().iter_mut().zip(vc.remainder()).zip(gc.remainder()) {
                let p = clip(vi + gi * step);
                *o = p;
                total += (p - vi) * (p - vi);
            }
            return Ok(total);
        }
        scratch.iter_mut().zip(v).zip(g).for_each(|((s, vi), gi)| *s = vi + gi * step);
        self.project_conj_domain(scratch, out)?;
        Ok(dist_sq(out, v))
    }

    /// Whether `v ∈ dom ω*` up to `tol` (exact interval check for the ℓ₁ kind).
    pub fn in_conj_domain(&self, v: &[f64], tol: f64) -> bool {
        if v.len() != self.dim {
            return false;
        }
        match &self.kind {
            RegularizerKind::ScaledL1 { eta } => v.iter().all(|x| x.abs() <= eta + tol),
            RegularizerKind::Zero => v.iter().all(|x| x.abs() <= tol),
            RegularizerKind::MaxAffine { generators, projector } => {
                let proj = match projector {
                    Some(p) => p(v),
                    None => match project_onto_hull_exhaustive(generators, v) {
                        Ok(p) => p,
                        Err(_) => return false,
                    },
                };
                dist_sq(&proj, v).sqrt() <= tol
            }
        }
    }

    /// Global Lipschitz constant `K_ω`.
    pub fn lipschitz(&self) -> f64 {
        match &self.kind {
            RegularizerKind::ScaledL1 { eta } => eta * (self.dim as f64).sqrt(),
            RegularizerKind::MaxAffine { generators, .. } => generators
                .iter()
                .map(|w| w.iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            RegularizerKind::Zero => 0.0,
        }
    }

    /// `diam(dom ω*)`.
    pub fn conj_domain_diameter(&self) -> f64 {
        match &self.kind {
            RegularizerKind::ScaledL1 { eta } => 2.0 * eta * (self.dim as f64).sqrt(),
            RegularizerKind::MaxAffine { generators, .. } => {
                let mut best = 0.0f64;
                for (i, a) in generators.iter().enumerate() {
                    for b in &generators[i + 1..] {
                        best = best.max(dist_sq(a, b));
                    }
                }
                best.sqrt()
            }
            RegularizerKind::Zero => 0.0,
        }
    }
}

/// Componentwise `sign(v_i) max(|v_i| - t, 0)`, the prox of `t‖·‖₁`.
pub fn soft_threshold(v: &[f64], t: f64) -> Vec<f64> {
    v.iter().map(|&x| x.signum() * (x.abs() - t).max(0.0)).collect()
}

/// Gradient of `½ dist²(· | [-λ, λ]^n)` at `r`, i.e. `r - clamp(r, -λ, λ)`.
pub fn moreau_grad_dist_box(r: &[f64], lam_box: f64) -> Vec<f64> {
    r.iter().map(|&x| x - x.clamp(-lam_box, lam_box)).collect()
}

/// Inner-loop exit test: `gap < ε° + (ρ/2)‖z - y_ref‖²`.
pub fn gap_certificate(gap: f64, eps_abs: f64, rho: f64, z: &[f64], y_ref: &[f64]) -> bool {
    gap < eps_abs + 0.5 * rho * dist_sq(z, y_ref)
}

/// Reference projection of `v` onto `conv(points)` by enumerating every
/// subset of at most `min(N, dim + 1)` points and solving the affine-hull
/// projection for each. Exponential in `N`; intended for `N <= 8`.
pub fn project_onto_hull_exhaustive(points: &[Vec<f64>], v: &[f64]) -> Result<Vec<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty point set".into()));
    }
    if n > 16 {
        return Err(Error::InvalidArgument(format!("exhaustive projection with {n} points")));
    }
    let dim = v.len();
    for p in points {
        check_len(dim, p.len())?;
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1u32 << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = subset.len();
        if k > dim + 1 {
            continue;
        }
        // KKT of min ‖Σ λ_i p_i - v‖² s.t. Σ λ_i = 1
        let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
        let mut rhs = DVector::<f64>::zeros(k + 1);
        for (a, &i) in subset.iter().enumerate() {
            for (b, &j) in subset.iter().enumerate() {
                kkt[(a, b)] = points[i].iter().zip(&points[j]).map(|(x, y)| x * y).sum();
            }
            kkt[(a, k)] = 1.0;
            kkt[(k, a)] = 1.0;
            rhs[a] = points[i].iter().zip(v).map(|(x, y)| x * y).sum();
        }
        rhs[k] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.iter().take(k).any(|&l| !(l >= -1e-12) || !l.is_finite()) {
            continue;
        }
        let mut x = vec![0.0; dim];
        for (a, &i) in subset.iter().enumerate() {
            x.iter_mut().zip(&points[i]).for_each(|(o, p)| *o += sol[a] * p);
        }
        let d = dist_sq(&x, v);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.map(|(_, x)| x)
        .ok_or_else(|| Error::Degenerate("no feasible face found for hull projection".into()))
}
