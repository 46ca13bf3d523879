use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("dimension {0} exceeds the supported maximum of 64")]
    TooLarge(usize),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("matrix is singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },
    #[error("eigenvector matrix is near-defective (condition number {0:.3e})")]
    NearDefective(f64),
    #[error("system is unstable: eigenvalue {0} has non-negative real part")]
    Unstable(Complex64),
    #[error("slow basis selection splits the complex-conjugate pair containing {0}")]
    ConjugatePairSplit(Complex64),
    #[error("{what} = {value} is out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },
    #[error("spectral gap {0:.3e} too small to separate the slow eigenvalues")]
    GapTooSmall(f64),
    #[error("basis vectors are linearly dependent (smallest singular value {0:.3e})")]
    RankDeficient(f64),
    #[error("basis is not invariant under the operator (residual {0:.3e})")]
    NotInvariant(f64),
    #[error("vector is not an eigenvector (residual {0:.3e})")]
    NotEigenvector(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("trajectory time grids differ")]
    GridMismatch,
    #[error("integrator step underflow: {0}")]
    StepUnderflow(String),
    #[error("unsupported slow dimension {0} for this operation")]
    UnsupportedDimension(usize),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
