// Small dense-vector kernels shared by the solvers. Reductions keep four
// partial sums so the compiler can vectorize them.

const LANES: usize = 4;

#[inline]
fn reduce2(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += f(x[l], y[l]);
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += f(*x, *y);
    }
    s
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    reduce2(a, b, |x, y| x * y)
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    reduce2(a, a, |x, _| x * x)
}

#[inline]
pub fn abs_sum(a: &[f64]) -> f64 {
    reduce2(a, a, |x, _| x.abs())
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    reduce2(a, b, |x, y| (x - y) * (x - y))
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}
