//! Coreset construction and two-stage row sampling for overconstrained
//! `lp` regression, `min_x ||A x - b||_p` with `p` in `[1, inf)`.
//!
//! The pieces, bottom up:
//!
//! - [`linalg`]: dense matrices, p-norms and pivoted Householder QR.
//! - [`conditioning`]: well-conditioned bases `U = Q G^-1` from ellipsoidal
//!   rounding of the unit ball of `z -> ||Q z||_p`, with certified constants.
//! - [`sampling`]: row sampling probabilities and reproducible Bernoulli plans.
//! - [`solver`]: a smoothed IRLS solver for full and sampled subproblems.
//! - [`pipeline`]: the two-stage algorithm, single-stage variants, and the
//!   Monte Carlo statistics used to check the approximation guarantees.
//! - [`io`] and [`cli`]: file formats, instance generation, reports, and the
//!   `lpc` command line.

pub mod cli;
pub mod conditioning;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector};
