use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    NotHermitian {
        asymmetry: f64,
    },
    NotAntiHermitian {
        asymmetry: f64,
    },
    NotPositiveDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    Singular,
    NonFinite,
    /// RK4 failed its step-halving check.
    StepSizeFailure {
        discrepancy: f64,
    },
    GridMismatch(String),
    GridTooSmall {
        axis: &'static str,
        nodes: usize,
    },
    DomainError(String),
    InvalidInput(String),
    Parse {
        pos: usize,
        msg: String,
    },
    /// A rational coefficient has a pole at the requested point.
    Pole,
    InvalidShift(String),
    QuadratureNotConverged {
        estimate: f64,
        error: f64,
    },
    PositivityLoss {
        node: usize,
        min_eigenvalue: f64,
    },
    Divergence {
        t: f64,
        sup_b: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotHermitian { asymmetry } => {
                write!(f, "matrix is not Hermitian (asymmetry {asymmetry:e})")
            }
            Error::NotAntiHermitian { asymmetry } => {
                write!(f, "matrix is not anti-Hermitian (asymmetry {asymmetry:e})")
            }
            Error::NotPositiveDefinite { min_eigenvalue, max_eigenvalue } => {
                write!(f, "matrix is not positive definite (eigenvalues in [{min_eigenvalue:e}, {max_eigenvalue:e}])")
            }
            Error::Singular => write!(f, "matrix is singular"),
            Error::NonFinite => write!(f, "non-finite entries"),
            Error::StepSizeFailure { discrepancy } => {
                write!(f, "ODE step-halving discrepancy {discrepancy:e} above tolerance")
            }
            Error::GridMismatch(m) => write!(f, "grid mismatch: {m}"),
            Error::GridTooSmall { axis, nodes } => {
                write!(f, "grid axis {axis} has {nodes} nodes, need at least 4")
            }
            Error::DomainError(m) => write!(f, "argument outside domain: {m}"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::Parse { pos, msg } => write!(f, "parse error at {pos}: {msg}"),
            Error::Pole => write!(f, "rational coefficient has a pole"),
            Error::InvalidShift(m) => write!(f, "invalid lattice shift: {m}"),
            Error::QuadratureNotConverged { estimate, error } => {
                write!(f, "quadrature did not converge (estimate {estimate}, error {error:e})")
            }
            Error::PositivityLoss { node, min_eigenvalue } => {
                write!(f, "metric lost positivity at node {node} (min eigenvalue {min_eigenvalue:e})")
            }
            Error::Divergence { t, sup_b } => {
                write!(f, "flow diverging at t = {t}: sup|B| = {sup_b:e}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
