//! Matrix-free linear operators.
//!
//! Every operator maps `cols`-vectors to `rows`-vectors and knows its adjoint.
//! The structured operators (forward difference, box blur, identity) are
//! applied by direct loops and never materialize storage. General matrices
//! come in as dense row-major data or as sparse triplets compressed by row.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::vecops::norm_sq;

/// Compressed sparse row storage.
#[derive(Debug, Clone, PartialEq)]
struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Dense(Vec<f64>),
    Sparse(Csr),
    ForwardDifference,
    BoxBlur { width: usize },
    Identity,
    Scaled(f64, Box<LinearOperator>),
    Sum(Box<LinearOperator>, Box<LinearOperator>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    rows: usize,
    cols: usize,
    kind: Kind,
}

/// Result of a power-iteration estimate of `‖AᵀA‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const DEFAULT_NORM_TOL: f64 = 1e-10;
pub const DEFAULT_NORM_MAX_ITERS: usize = 5000;
const DEFAULT_NORM_SEED: u64 = 0x5_eed0_fa7a;

impl LinearOperator {
    /// Dense matrix from row-major data.
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("dense operator needs rows, cols >= 1".into()));
        }
        check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, kind: Kind::Dense(data) })
    }

    /// Sparse matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("sparse operator needs rows, cols >= 1".into()));
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({r}, {c}) outside a {rows}x{cols} operator"
                )));
            }
        }
        sorted.sort_by_key(|e| (e.0, e.1));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self { rows, cols, kind: Kind::Sparse(Csr { indptr, indices, values }) })
    }

    /// First-order forward difference, shape `(n-1) x n`: `(Ax)_i = x_{i+1} - x_i`.
    pub fn forward_difference(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("forward difference needs n >= 2, got {n}")));
        }
        Ok(Self { rows: n - 1, cols: n, kind: Kind::ForwardDifference })
    }

    /// Non-uniform box blur of maximal half-width `l`, shape `n x n`.
    ///
    /// Row `t` (1-indexed) averages over `2w+1` samples centred at `t` with
    /// weight `1/(2w)`, where `w = min(t-1, l, n-t)`. The rows are not
    /// renormalized, so they sum to `(2w+1)/(2w)`. Endpoint rows with `w = 0`
    /// are identity rows.
    pub fn box_blur(n: usize, l: usize) -> Result<Self> {
        if l == 0 || l > n {
            return Err(Error::InvalidArgument(format!("box blur width {l} outside [1, {n}]")));
        }
        Ok(Self { rows: n, cols: n, kind: Kind::BoxBlur { width: l } })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "identity needs n >= 1");
        Self { rows: n, cols: n, kind: Kind::Identity }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, kind: Kind::Scaled(factor, Box::new(self)) }
    }

    /// `A + B`; both summands must have the same shape.
    pub fn sum(a: LinearOperator, b: LinearOperator) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::InvalidArgument(format!(
                "cannot add operators of shapes {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        Ok(Self { rows: a.rows, cols: a.cols, kind: Kind::Sum(Box::new(a), Box::new(b)) })
    }

    /// Random sparse `m x n` matrix: each entry is nonzero independently with
    /// probability `1/sqrt(mn)`, nonzero values uniform on `[0, 1)`.
    pub fn random_sparse(m: usize, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_sparse_with(m, n, &mut rng)
    }

    pub fn random_sparse_with<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("random sparse operator needs m, n >= 1".into()));
        }
        let p = 1.0 / ((m * n) as f64).sqrt();
        let mut triplets = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.random::<f64>() < p {
                    triplets.push((i, j, rng.random::<f64>()));
                }
            }
        }
        Self::from_triplets(m, n, &triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Stored nonzeros for sparse operators, `None` otherwise.
    pub fn nnz(&self) -> Option<usize> {
        match &self.kind {
            Kind::Sparse(csr) => Some(csr.values.len()),
            _ => None,
        }
    }

    /// Sparse triplets in row-major order (sparse operators only).
    pub fn triplets(&self) -> Option<Vec<(usize, usize, f64)>> {
        match &self.kind {
            Kind::Sparse(csr) => {
                let mut out = Vec::with_capacity(csr.values.len());
                for r in 0..self.rows {
                    for k in csr.indptr[r]..csr.indptr[r + 1] {
                        out.push((r, csr.indices[k], csr.values[k]));
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        self.apply_adjoint_into(y, &mut out);
        Ok(out)
    }

    /// `out = A x`. Panics on shape mismatch; the checked entry point is [`apply`](Self::apply).
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        match &self.kind {
            Kind::Dense(data) => {
                for (r, o) in out.iter_mut().enumerate() {
                    let row = &data[r * self.cols..(r + 1) * self.cols];
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            Kind::Sparse(csr) => {
                for (r, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for k in csr.indptr[r]..csr.indptr[r + 1] {
                        acc += csr.values[k] * x[csr.indices[k]];
                    }
                    *o = acc;
                }
            }
            Kind::ForwardDifference => {
                for ((o, a), b) in out.iter_mut().zip(&x[..x.len() - 1]).zip(&x[1..]) {
                    *o = b - a;
                }
            }
            Kind::BoxBlur { width } => {
                let n = self.cols;
                for (t, o) in out.iter_mut().enumerate() {
                    let w = blur_half_width(t, *width, n);
                    if w == 0 {
                        *o = x[t];
                    } else {
                        let s: f64 = x[t - w..=t + w].iter().sum();
                        *o = s / (2 * w) as f64;
                    }
                }
            }
            Kind::Identity => out.copy_from_slice(x),
            Kind::Scaled(c, inner) => {
                inner.apply_into(x, out);
                out.iter_mut().for_each(|o| *o *= c);
            }
            Kind::Sum(a, b) => {
                a.apply_into(x, out);
                let mut tmp = vec![0.0; self.rows];
                b.apply_into(x, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
            }
        }
    }

    /// `out = Aᵀ y`.
    pub fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        match &self.kind {
            Kind::Dense(data) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (r, &yr) in y.iter().enumerate() {
                    let row = &data[r * self.cols..(r + 1) * self.cols];
                    out.iter_mut().zip(row).for_each(|(o, a)| *o += a * yr);
                }
            }
            Kind::Sparse(csr) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (r, &yr) in y.iter().enumerate() {
                    for k in csr.indptr[r]..csr.indptr[r + 1] {
                        out[csr.indices[k]] += csr.values[k] * yr;
                    }
                }
            }
            Kind::ForwardDifference => {
                let n = self.cols;
                out[0] = -y[0];
                for ((o, a), b) in out[1..n - 1].iter_mut().zip(&y[..n - 2]).zip(&y[1..]) {
                    *o = a - b;
                }
                out[n - 1] = y[n - 2];
            }
            Kind::BoxBlur { width } => {
                let n = self.cols;
                out.iter_mut().for_each(|o| *o = 0.0);
                for (t, &yt) in y.iter().enumerate() {
                    let w = blur_half_width(t, *width, n);
                    if w == 0 {
                        out[t] += yt;
                    } else {
                        let c = yt / (2 * w) as f64;
                        out[t - w..=t + w].iter_mut().for_each(|o| *o += c);
                    }
                }
            }
            Kind::Identity => out.copy_from_slice(y),
            Kind::Scaled(c, inner) => {
                inner.apply_adjoint_into(y, out);
                out.iter_mut().for_each(|o| *o *= c);
            }
            Kind::Sum(a, b) => {
                a.apply_adjoint_into(y, out);
                let mut tmp = vec![0.0; self.cols];
                b.apply_adjoint_into(y, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
            }
        }
    }

    /// Row-major dense materialization, built column by column from `A e_j`.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut data = vec![0.0; self.rows * self.cols];
        let mut e = vec![0.0; self.cols];
        let mut col = vec![0.0; self.rows];
        for j in 0..self.cols {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            for i in 0..self.rows {
                data[i * self.cols + j] = col[i];
            }
            e[j] = 0.0;
        }
        data
    }

    /// Power iteration on `AᵀA` for `‖A‖²`.
    ///
    /// Stops when the relative change of the Rayleigh quotient drops to `tol`
    /// or after `max_iters` sweeps; in the latter case the last quotient is
    /// returned with `converged = false`. The zero operator yields 0.
    pub fn op_norm_sq(&self, max_iters: usize, tol: f64, seed: u64) -> NormEstimate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..self.cols).map(|_| rng.sample(StandardNormal)).collect();
        let nv = norm_sq(&v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);

        let mut av = vec![0.0; self.rows];
        let mut atav = vec![0.0; self.cols];
        let mut prev = f64::NAN;
        for it in 1..=max_iters {
            self.apply_into(&v, &mut av);
            let rq = norm_sq(&av);
            if rq == 0.0 {
                return NormEstimate { value: 0.0, iterations: it, converged: true };
            }
            if (rq - prev).abs() <= tol * rq {
                return NormEstimate { value: rq, iterations: it, converged: true };
            }
            prev = rq;
            self.apply_adjoint_into(&av, &mut atav);
            let nu = norm_sq(&atav).sqrt();
            v.iter_mut().zip(&atav).for_each(|(x, a)| *x = a / nu);
        }
        NormEstimate { value: prev, iterations: max_iters, converged: false }
    }

    /// [`op_norm_sq`](Self::op_norm_sq) with the default tolerance, budget and seed.
    pub fn norm_sq_estimate(&self) -> f64 {
        self.op_norm_sq(DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_TOL, DEFAULT_NORM_SEED).value
    }
}

/// `w(t) = min(t-1, l, n-t)` for the 1-indexed row `t0 + 1`.
#[inline]
fn blur_half_width(t0: usize, l: usize, n: usize) -> usize {
    t0.min(l).min(n - 1 - t0)
}
