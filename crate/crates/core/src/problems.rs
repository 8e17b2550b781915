//! Model problems: robust TV-ℓ₂ signal recovery and the random sparse ℓ₁
//! proximal benchmark instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::linops::LinearOperator;
use crate::outer::SmoothFunction;
use crate::prox::{moreau_grad_dist_box, RegularizerSpec};

/// Piecewise-constant test signal `x̄_i = sign(sin(4πi/m))`, `m = n - 1`,
/// `i = 0..n-1`, with `sign(0) = 0`.
///
/// The sign is computed exactly in integer arithmetic: `sin(πt)` with
/// `t = 4i/m` vanishes iff `4i ≡ 0 (mod m)` and is positive iff
/// `4i mod 2m < m`.
pub fn ground_truth(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ground truth needs n >= 2, got {n}")));
    }
    let m = n - 1;
    Ok((0..n)
        .map(|i| {
            let phase = (4 * i) % (2 * m);
            if phase == 0 || phase == m {
                0.0
            } else if phase < m {
                1.0
            } else {
                -1.0
            }
        })
        .collect())
}

/// `x̃ = C x̄ + σ z` with `z` standard normal drawn from `ChaCha8(seed)`.
pub fn observe(c: &LinearOperator, x_bar: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut out = c.apply(x_bar)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o += sigma * z;
    }
    Ok(out)
}

/// `f(x) = ½ dist²(Cx - x̃ | [-λ, λ]^n)` with TV regularizer `η‖Ax‖₁`.
#[derive(Debug, Clone)]
pub struct RobustTvL2 {
    pub c: LinearOperator,
    pub x_tilde: Vec<f64>,
    pub lam_box: f64,
    pub eta: f64,
    pub a: LinearOperator,
    lip: f64,
}

impl RobustTvL2 {
    pub fn new(c: LinearOperator, x_tilde: Vec<f64>, lam_box: f64, eta: f64) -> Result<Self> {
        let n = c.cols();
        check_len(c.rows(), x_tilde.len())?;
        if c.rows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: c.rows() });
        }
        if !(lam_box >= 0.0) {
            return Err(Error::InvalidArgument(format!("box half-width must be >= 0, got {lam_box}")));
        }
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        let a = LinearOperator::forward_difference(n)?;
        let lip = c.norm_sq_estimate();
        Ok(Self { c, x_tilde, lam_box, eta, a, lip })
    }

    pub fn n(&self) -> usize {
        self.c.cols()
    }

    pub fn spec(&self) -> RegularizerSpec {
        RegularizerSpec::scaled_l1(self.a.rows(), self.eta).expect("eta validated in constructor")
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.c.apply(x).expect("dimension checked by caller");
        for (ri, t) in r.iter_mut().zip(&self.x_tilde) {
            *ri -= t;
        }
        r
    }

    pub fn fidelity_value(&self, x: &[f64]) -> Result<f64> {
        check_len(self.n(), x.len())?;
        Ok(self.value(x))
    }

    pub fn fidelity_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), x.len())?;
        Ok(self.gradient(x))
    }

    /// `f(x) + η‖Ax‖₁`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let ax = self.a.apply(x)?;
        Ok(self.fidelity_value(x)? + self.eta * ax.iter().map(|v| v.abs()).sum::<f64>())
    }
}

impl SmoothFunction for RobustTvL2 {
    fn dim(&self) -> usize {
        self.n()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let lam = self.lam_box;
        0.5 * self
            .residual(x)
            .iter()
            .map(|r| {
                let d = r - r.clamp(-lam, lam);
                d * d
            })
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = moreau_grad_dist_box(&self.residual(x), self.lam_box);
        self.c.apply_adjoint(&g).expect("dimension checked by caller")
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lip)
    }

    // Coordinatewise, so rounding scales with each term instead of with f.
    fn bregman(&self, x: &[f64], y: &[f64], _f_y: f64, _grad_y: &[f64]) -> f64 {
        let lam = self.lam_box;
        let rx = self.residual(x);
        let ry = self.residual(y);
        rx.iter()
            .zip(&ry)
            .map(|(&u, &w)| {
                let (du, dw) = (u - u.clamp(-lam, lam), w - w.clamp(-lam, lam));
                if du == 0.0 && dw == 0.0 {
                    0.0
                } else if (u > lam && w > lam) || (u < -lam && w < -lam) {
                    0.5 * (u - w) * (u - w)
                } else {
                    0.5 * du * du - 0.5 * dw * dw - dw * (u - w)
                }
            })
            .sum()
    }
}

/// Parameters of the TV recovery instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TvParams {
    pub n: usize,
    pub l: usize,
    pub eta: f64,
    pub lam_box: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Replace the blur by the identity (noiseless sanity checks).
    pub identity_blur: bool,
}

impl TvParams {
    /// `n = 2048`, `l = 128`.
    pub fn full_scale() -> Self {
        Self { n: 2048, l: 128, eta: 2.0, lam_box: 0.2, sigma: 0.3, seed: 0, identity_blur: false }
    }

    /// `n = 256`, `l = 16`, otherwise as [`TvParams::full_scale`].
    pub fn desk() -> Self {
        Self { n: 256, l: 16, ..Self::full_scale() }
    }
}

/// An assembled TV instance together with its ground truth.
#[derive(Debug, Clone)]
pub struct TvInstance {
    pub problem: RobustTvL2,
    pub spec: RegularizerSpec,
    pub x_bar: Vec<f64>,
}

impl TvInstance {
    pub fn a(&self) -> &LinearOperator {
        &self.problem.a
    }
}

pub fn build_tv_problem(params: &TvParams) -> Result<TvInstance> {
    let c = if params.identity_blur {
        LinearOperator::identity(params.n)
    } else {
        LinearOperator::box_blur(params.n, params.l)?
    };
    let x_bar = ground_truth(params.n)?;
    let x_tilde = observe(&c, &x_bar, params.sigma, params.seed)?;
    let problem = RobustTvL2::new(c, x_tilde, params.lam_box, params.eta)?;
    let spec = problem.spec();
    Ok(TvInstance { problem, spec, x_bar })
}

/// One random instance of the sparse ℓ₁ proximal benchmark: `A = H + I`,
/// `ω = η‖·‖₁`, and a point `y` uniform on `[-η, η]^n`.
#[derive(Debug, Clone)]
pub struct SparseL1Instance {
    pub a: LinearOperator,
    pub spec: RegularizerSpec,
    pub y: Vec<f64>,
    pub lambda: f64,
}

pub fn sparse_l1_instance<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    eta: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<SparseL1Instance> {
    if m != n {
        return Err(Error::InvalidArgument(format!("A = H + I needs a square H, got {m}x{n}")));
    }
    let h = LinearOperator::random_sparse_with(m, n, rng)?;
    let a = LinearOperator::sum(h, LinearOperator::identity(n))?;
    let spec = RegularizerSpec::scaled_l1(m, eta)?;
    let y = (0..n).map(|_| rng.random_range(-eta..=eta)).collect();
    Ok(SparseL1Instance { a, spec, y, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn small_problem(n: usize, lam_box: f64, seed: u64) -> RobustTvL2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = LinearOperator::box_blur(n, 3).unwrap();
        let x_tilde = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        RobustTvL2::new(c, x_tilde, lam_box, 1.0).unwrap()
    }

    #[test]
    fn ground_truth_examples() {
        assert_eq!(ground_truth(8).unwrap(), vec![0.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 0.0]);
        let g = ground_truth(2048).unwrap();
        assert_eq!(g[0], 0.0);
        assert!(g.iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
        assert!(ground_truth(1).is_err());
    }

    #[test]
    fn ground_truth_agrees_with_float_sine_away_from_zeros() {
        for n in [9usize, 33, 256, 2048] {
            let m = (n - 1) as f64;
            for (i, v) in ground_truth(n).unwrap().into_iter().enumerate() {
                let s = (4.0 * std::f64::consts::PI * i as f64 / m).sin();
                if s.abs() > 1e-9 {
                    assert_eq!(v, s.signum());
                }
            }
        }
    }

    #[test]
    fn observe_examples() {
        let c = LinearOperator::box_blur(16, 2).unwrap();
        let xb = ground_truth(16).unwrap();
        assert_eq!(observe(&c, &xb, 0.0, 3).unwrap(), c.apply(&xb).unwrap());
        assert_eq!(observe(&c, &xb, 0.3, 9).unwrap(), observe(&c, &xb, 0.3, 9).unwrap());
        assert_ne!(observe(&c, &xb, 0.3, 9).unwrap(), observe(&c, &xb, 0.3, 10).unwrap());
        assert!(observe(&c, &xb, -1.0, 0).is_err());
    }

    #[test]
    fn observe_noise_variance() {
        let n = 64;
        let c = LinearOperator::identity(n);
        let xb = ground_truth(n).unwrap();
        let mean: f64 = (0..100u64)
            .map(|s| {
                let o = observe(&c, &xb, 0.3, s).unwrap();
                o.iter().zip(&xb).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / 100.0;
        assert!((mean - 0.09).abs() <= 0.009, "mean {mean}");
    }

    #[test]
    fn fidelity_examples() {
        // the second coordinate sits at the box center and contributes nothing
        let p = RobustTvL2::new(LinearOperator::identity(2), vec![0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(p.fidelity_value(&[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(p.fidelity_gradient(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);

        let p = RobustTvL2::new(LinearOperator::identity(2), vec![0.0, 0.0], 0.2, 1.0).unwrap();
        assert_relative_eq!(p.fidelity_value(&[0.5, 0.0]).unwrap(), 0.045, max_relative = 1e-14);
        assert_eq!(p.fidelity_value(&[0.1, -0.2]).unwrap(), 0.0);
        assert_eq!(p.fidelity_gradient(&[-0.15, 0.05]).unwrap(), vec![0.0, 0.0]);
        assert!(p.fidelity_value(&[0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn least_squares_limit() {
        let xt = vec![1.0, -2.0, 0.5];
        let p = RobustTvL2::new(LinearOperator::identity(3), xt.clone(), 0.0, 1.0).unwrap();
        let x = [0.0, 1.0, 2.0];
        let g = p.fidelity_gradient(&x).unwrap();
        for i in 0..3 {
            assert_eq!(g[i], x[i] - xt[i]);
        }
    }

    #[test]
    fn desk_instance_shapes() {
        let inst = build_tv_problem(&TvParams::desk()).unwrap();
        assert_eq!(inst.problem.n(), 256);
        assert_eq!(inst.a().shape(), (255, 256));
        assert_eq!(inst.spec.dim(), 255);
        assert_eq!(inst.x_bar.len(), 256);
    }

    #[test]
    fn sparse_instance_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = sparse_l1_instance(128, 128, 2.0, 1.0, &mut rng).unwrap();
        assert_eq!(inst.a.shape(), (128, 128));
        assert!(inst.y.iter().all(|v| v.abs() <= 2.0));
        assert!(sparse_l1_instance(4, 5, 2.0, 1.0, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn fidelity_is_convex(seed in 0u64..1000, t in 0.0f64..1.0, lam in 0.0f64..1.0) {
            let p = small_problem(12, lam, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let x1: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x2: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mid: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            prop_assert!(p.value(&mid) <= t * p.value(&x1) + (1.0 - t) * p.value(&x2) + 1e-9);
        }

        #[test]
        fn gradient_is_lipschitz(seed in 0u64..1000, lam in 0.0f64..1.0) {
            let p = small_problem(12, lam, seed);
            // exact ‖C‖² from the dense symmetric eigendecomposition
            let d = nalgebra::DMatrix::from_row_slice(12, 12, &p.c.to_dense());
            let lip = (d.transpose() * &d).symmetric_eigen().eigenvalues.max();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
            let x1: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x2: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g1 = p.gradient(&x1);
            let g2 = p.gradient(&x2);
            let dg: f64 = g1.iter().zip(&g2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let dx: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(dg <= lip * dx * (1.0 + 1e-6));
        }

        #[test]
        fn value_ignores_perturbations_inside_box(seed in 0u64..1000, shift in -0.05f64..0.05) {
            let lam = 0.5;
            let xt: Vec<f64> = vec![0.1, 2.0, -0.3, -1.5];
            let p = RobustTvL2::new(LinearOperator::identity(4), xt, lam, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = vec![0.2, rng.random_range(-1.0..1.0), -0.1, rng.random_range(-1.0..1.0)];
            let mut y = x.clone();
            y[0] += shift;
            y[2] += shift;
            prop_assert_eq!(p.value(&x), p.value(&y));
        }

        #[test]
        fn bregman_matches_definition(seed in 0u64..1000, lam in 0.0f64..1.0) {
            let p = small_problem(10, lam, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = p.gradient(&y);
            let direct = p.value(&x) - p.value(&y)
                - g.iter().zip(x.iter().zip(&y)).map(|(gi, (a, b))| gi * (a - b)).sum::<f64>();
            let b = p.bregman(&x, &y, p.value(&y), &g);
            prop_assert!(b >= 0.0);
            prop_assert!((b - direct).abs() <= 1e-9 * (1.0 + p.value(&x) + p.value(&y)));
        }
    }
}
