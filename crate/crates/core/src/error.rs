use thiserror::Error;

/// Errors raised anywhere in the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("potential curvature omega0^2 must be positive, got {0}")]
    NonPositiveCurvature(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("operation requires hbar > 0 (the Matsubara frequency is undefined at hbar = 0)")]
    HbarZero,

    #[error("hypergeometric parameter C = {re} + {im}i is a non-positive integer")]
    InvalidC { re: f64, im: f64 },
    #[error("series did not converge: {0}")]
    NoConvergence(String),
    #[error("tail of the Matsubara series cannot be bounded below {tol:e} within {n_max} terms")]
    TailNotBounded { tol: f64, n_max: usize },

    #[error("chi_q vanishes at t = {t}: drift function has a pole (nearest pole at t = {pole})")]
    PoleAtChiQZero { t: f64, pole: f64 },
    #[error("variance {variance:e} at t = {t} is not positive; the density is degenerate")]
    DegenerateVariance { t: f64, variance: f64 },

    #[error("diffusion coefficient {value:e} < 0 at t = {t}")]
    NegativeDiffusion { t: f64, value: f64 },
    #[error("step [{t0}, {t1}] crosses a drift pole at t = {pole}")]
    PoleWindow { t0: f64, t1: f64, pole: f64 },
    #[error("time step violates stability limit: {0}")]
    CflViolation(String),
    #[error("non-finite coefficient {name} at t = {t}")]
    NonFiniteCoefficient { name: &'static str, t: f64 },
    #[error("non-finite state in path {path} at t = {t}; time step too large?")]
    NonFiniteState { path: usize, t: f64 },
    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("errors at {} table rows; first at index {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Table(Vec<(usize, Error)>),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True when the error stems from bad user input rather than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveMass(_)
                | Error::NonPositiveTemperature(_)
                | Error::NonPositiveCurvature(_)
                | Error::InvalidInput(_)
                | Error::HbarZero
                | Error::InvalidC { .. }
                | Error::GridMismatch(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
