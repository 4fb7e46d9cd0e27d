use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("cannot read measure file {path}: {source}")]
    MeasureFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{op}: argument {value} outside domain ({detail})")]
    Domain {
        op: &'static str,
        value: f64,
        detail: String,
    },

    #[error("{op}: no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange {
        op: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("{op}: {count} sign changes found at s = {s}; root is not unique")]
    MultipleRoots { op: &'static str, s: f64, count: usize },

    #[error("degenerate saddle at s = {s}, y = {y}: 1 - psi'(u)/(y^2 s) = {denominator}")]
    DegenerateSaddle { s: f64, y: f64, denominator: f64 },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("s = {s} coincides with g[{index}] = {g}")]
    PoleCoincidence { s: f64, index: usize, g: f64 },

    #[error("quadrature did not converge: coarse = {coarse}, refined = {refined}")]
    QuadratureNonConvergence { coarse: f64, refined: f64 },

    #[error("exact density {value} at s = {s} is negative beyond quadrature noise")]
    NegativeDensity { s: f64, value: f64 },

    #[error("eigensolver failed on sample {sample}")]
    Eigensolver { sample: usize },

    #[error("grid point {index} (r = {r}): {source}")]
    GridPoint {
        index: usize,
        r: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method on valid input, as opposed to
    /// malformed input or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoSignChange { .. }
            | Error::MultipleRoots { .. }
            | Error::DegenerateSaddle { .. }
            | Error::PoleCoincidence { .. }
            | Error::QuadratureNonConvergence { .. }
            | Error::NegativeDensity { .. }
            | Error::Eigensolver { .. } => true,
            Error::GridPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
