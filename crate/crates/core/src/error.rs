use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel tail is not integrable: {0}")]
    NonIntegrableTail(String),

    #[error("kernel derivative is singular at t = {t}")]
    SingularDerivative { t: f64 },

    #[error("kernel vanishes at s = {s}; K_delta is undefined")]
    VanishingKernel { s: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("convolution strategy not supported: {0}")]
    UnsupportedStrategy(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CFL condition violated: dt = {dt} exceeds the stable bound {max_dt} (0.9 h / sqrt(mu0), h = {h}, mu0 = {mu0})")]
    Cfl {
        dt: f64,
        max_dt: f64,
        h: f64,
        mu0: f64,
    },

    #[error("history length mismatch: expected {expected}, found {found}")]
    HistoryMismatch { expected: usize, found: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
