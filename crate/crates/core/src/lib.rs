//! Spectral density of sub-unitary random matrix ensembles `T = U·H`, where
//! `U` is Haar-distributed on the unitary group and `H = diag(√g_i)` with
//! `0 ≤ g_i ≤ 1`.
//!
//! Three independent routes to the radial eigenvalue distribution are
//! provided and can be cross-checked against each other:
//!
//! * [`asymptotic`]: the large-N limit, obtained from the S-transform of the
//!   limiting measure of the `g_i` ([`measure`]).
//! * [`exact_n`]: the exact finite-N mean density for strictly distinct `g_i`.
//! * [`ensemble`]: direct Monte Carlo sampling of `T` and its eigenvalues.
//!
//! The [`cli`] module wires the three routes into a batch front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotic;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod exact_n;
pub mod measure;
pub mod quadrature;
pub mod roots;

pub use asymptotic::{AnnulusBounds, GridSpec, RadialSolution, SaddleDiagnostics};

pub use ensemble::{EigenSample, SampleConfig};
pub use error::{Error, Result};
pub use exact_n::{ExactEnsemble, QuadratureSpec, SignedLog};
pub use measure::{GSpectrum, MeasureSpec, Moment};
