//! Matrix-free inexact accelerated proximal gradient (IAPG).
//!
//! Solves `min_x f(x) + ω(Ax)` where `f` is convex and Lipschitz smooth and `ω`
//! is a conic polyhedral (max-affine) function. The proximal step of `ω∘A` is
//! never formed in closed form: an inner loop runs proximal gradient descent
//! on the dual of the proximal point problem and stops once the duality gap
//! certifies the required accuracy. The outer loop is an accelerated proximal
//! gradient method with Armijo line search, backtracking on the smoothness
//! estimate, and an error schedule that shrinks the inner tolerances.
//!
//! Module map:
//!
//! - [`linops`]: matrix-free operators (dense, sparse, forward difference,
//!   box blur) with adjoints and power-iteration norm estimates.
//! - [`prox`]: regularizers, conjugate projections, soft thresholding and the
//!   duality-gap certificate.
//! - [`inner`]: the dual PGD inner loop.
//! - [`outer`]: the accelerated outer loop, its trace and theory ledger.
//! - [`problems`]: the robust TV-ℓ₂ recovery problem and the sparse ℓ₁
//!   proximal benchmark instance.
//! - [`experiments`]: benchmark sweeps, summary statistics, regression fits,
//!   config parsing and CSV I/O.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod inner;
pub mod linops;
pub mod outer;
pub mod par;
pub mod problems;
pub mod prox;
pub(crate) mod vecops;

pub use error::{Error, Result};
pub use inner::{pppgd, pppgd_observed, InnerConfig, InnerReport, InnerStatus, InnerStep};
pub use linops::{LinearOperator, NormEstimate};
pub use outer::{
    iapg_solve, IapgOutput, OuterConfig, OuterRecord, OuterStatus, OuterTrace, SmoothFunction,
    TheoryLedger,
};
pub use problems::RobustTvL2;
pub use prox::RegularizerSpec;
