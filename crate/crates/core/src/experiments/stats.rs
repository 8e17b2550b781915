//! Summary statistics and the regression models behind the reference lines.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quartiles by linear interpolation at position `(n-1)q` of the sorted data.
pub fn five_number_summary(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("five-number summary of an empty list".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = (v.len() - 1) as f64 * q;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    Ok(FiveNumber { min: v[0], q1: at(0.25), median: at(0.5), q3: at(0.75), max: v[v.len() - 1] })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ a + b x`. `R² = 0` when `y` has no variance.
pub fn fit_affine(xs: &[f64], ys: &[f64]) -> Result<AffineFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(Error::Degenerate("affine fit needs at least 2 points".into()));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("affine fit needs at least 2 distinct x values".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        0.0
    } else {
        let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        1.0 - sse / syy
    };
    Ok(AffineFit { intercept, slope, r2 })
}

/// `y ≈ c · max(1, ln X)^a / X^b` with `X = max(c₁, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDecayFit {
    pub c: f64,
    pub c1: f64,
    pub a: f64,
    pub b: f64,
    /// Residual sum of squares in log space.
    pub sse: f64,
}

impl LogDecayFit {
    pub fn predict(&self, x: f64) -> f64 {
        let (u, w) = log_features(self.c1.max(x));
        (self.c.ln() + self.a * u - self.b * w).exp()
    }
}

fn log_features(x: f64) -> (f64, f64) {
    let lx = x.ln();
    let llx = if lx > 0.0 { lx.ln().max(0.0) } else { 0.0 };
    (llx, lx)
}

/// Fits `ln y = ln c + a·max(0, ln ln X) - b·ln X`, `X = max(c₁, x)`, by
/// least squares, with `c₁` chosen by grid search over the observed `x`.
pub fn fit_log_decay(xs: &[f64], ys: &[f64]) -> Result<LogDecayFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 4 {
        return Err(Error::Degenerate("log-decay fit needs at least 4 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("log-decay fit needs positive finite data".into()));
    }
    let mut grid = xs.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let rhs = DVector::from_iterator(ys.len(), ys.iter().map(|y| y.ln()));

    let mut best: Option<LogDecayFit> = None;
    for &c1 in &grid {
        let mut design = DMatrix::zeros(xs.len(), 3);
        for (i, &x) in xs.iter().enumerate() {
            let (u, w) = log_features(c1.max(x));
            design[(i, 0)] = 1.0;
            design[(i, 1)] = u;
            design[(i, 2)] = -w;
        }
        let svd = design.clone().svd(true, true);
        let Ok(coef) = svd.solve(&rhs, 1e-12) else { continue };
        let sse = (&design * &coef - &rhs).norm_squared();
        if best.is_none_or(|b| sse < b.sse) {
            best = Some(LogDecayFit { c: coef[0].exp(), c1, a: coef[1], b: coef[2], sse });
        }
    }
    best.ok_or_else(|| Error::Degenerate("log-decay regression failed for every c1".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn five_number_examples() {
        let f = five_number_summary(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let f = five_number_summary(&[7.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (7.0, 7.0, 7.0, 7.0, 7.0));
        let f = five_number_summary(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert!(five_number_summary(&[]).is_err());
    }

    #[test]
    fn affine_examples() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let f = fit_affine(&xs, &ys).unwrap();
        assert_relative_eq!(f.intercept, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);

        let f = fit_affine(&xs, &[3.0; 10]).unwrap();
        assert_eq!((f.slope, f.r2), (0.0, 0.0));

        let noisy: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x + if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = fit_affine(&xs, &noisy).unwrap();
        // closed form: slope = 1 + Σ(x-4.5)(±1)/82.5 = 1 - 5/82.5
        assert_relative_eq!(f.slope, 1.0 - 5.0 / 82.5, epsilon = 1e-12);
        assert!((0.9..=1.1).contains(&f.slope));

        assert!(fit_affine(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(fit_affine(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn log_decay_recovers_synthetic_model() {
        let truth = LogDecayFit { c: 10.0, c1: 100.0, a: 2.0, b: 1.5, sse: 0.0 };
        let xs: Vec<f64> = (0..200).map(|i| 10f64.powf(1.0 + 5.0 * i as f64 / 199.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| truth.predict(x)).collect();
        let f = fit_log_decay(&xs, &ys).unwrap();
        assert!((f.b - 1.5).abs() <= 0.05 * 1.5, "b = {}", f.b);
    }

    #[test]
    fn log_decay_pure_power_law() {
        let xs: Vec<f64> = (1..=100).map(|i| 50.0 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.0)).collect();
        let f = fit_log_decay(&xs, &ys).unwrap();
        assert!(f.a.abs() <= 0.1, "a = {}", f.a);
        assert_relative_eq!(f.b, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn log_decay_rejects_bad_input() {
        assert!(fit_log_decay(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_log_decay(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn five_number_is_ordered_and_permutation_invariant(
            mut v in prop::collection::vec(-1e6f64..1e6, 1..50),
            rot in 0usize..50,
        ) {
            let f = five_number_summary(&v).unwrap();
            prop_assert!(f.min <= f.q1 && f.q1 <= f.median && f.median <= f.q3 && f.q3 <= f.max);
            let k = rot % v.len();
            v.rotate_left(k);
            v.reverse();
            prop_assert_eq!(five_number_summary(&v).unwrap(), f);
        }
    }
}
