use thiserror::Error;

/// Errors raised by the solver and its supporting routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PepError {
    #[error("coefficient {index} has shape {rows}x{cols}, expected {n}x{n}")]
    ShapeMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },

    #[error("matrix polynomial has no coefficients")]
    Empty,

    #[error("degree-0 matrix polynomial has no eigenvalue problem to solve")]
    DegreeZero,

    #[error("matrix polynomial is identically zero")]
    ZeroPolynomial,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("Moebius map is degenerate (alpha*delta - gamma*beta = 0)")]
    DegenerateMobius,

    #[error("evaluation point is a pole of the Moebius map")]
    MobiusPole,

    #[error("approximations {0} and {1} coincide")]
    CoincidentPoints(usize, usize),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("leading coefficient is singular; use Henrici disks or the Moebius fallback")]
    SingularLeading,

    #[error("degenerate quadratic while recovering eigenvalue pairs")]
    DegenerateQuadratic,

    #[error("declared structure violated: {symmetry} (relative residual {residual:.3e})")]
    StructureViolation { symmetry: String, residual: f64 },

    #[error("structured degree {0} is odd after deflation; declare the exceptional eigenvalues")]
    OddPairedDegree(usize),

    #[error("{0}")]
    Unsupported(String),

    #[error("oracle limited to nk <= {limit}, got {nk}")]
    OracleTooLarge { nk: usize, limit: usize },

    #[error("spectra have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, PepError>;
