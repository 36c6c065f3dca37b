use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit parameters: {0}")]
    InvalidParams(String),
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),
    #[error("requested {requested} levels but operator dimension is {dim}")]
    LevelOutOfRange { requested: usize, dim: usize },
    #[error("operator is not Hermitian (max |H - H†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("persistent-current projection is degenerate (splitting {splitting_na:.3e} nA)")]
    DegenerateProjection { splitting_na: f64 },
    #[error("invalid anneal path: {0}")]
    InvalidPath(String),
    #[error("time {t} ns outside path range [0, {end}] ns")]
    TimeOutOfRange { t: f64, end: f64 },
    #[error("invalid bath parameters: {0}")]
    InvalidBath(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("step size underflow at t = {t} ns (h = {h:.3e} ns)")]
    StepFailure { t: f64, h: f64 },
    #[error("density matrix lost positivity at t = {t} ns (min eigenvalue {min_eigenvalue:.3e})")]
    PositivityViolation { t: f64, min_eigenvalue: f64 },
    #[error("Lamb-shift integral did not converge at ω = {omega} rad/ns (spread {spread:.3e})")]
    LambShiftNonConvergence { omega: f64, spread: f64 },
    #[error("fit diverged: {0}")]
    FitDiverged(String),
    #[error("insufficient data: {have} points for {need} required")]
    InsufficientData { have: usize, need: usize },
    #[error("Gaussian fit failed: {0}")]
    GaussianFitFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Numerical failures (as opposed to bad input) — fit divergence,
    /// integrator breakdown, positivity loss.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepFailure { .. }
                | Error::PositivityViolation { .. }
                | Error::LambShiftNonConvergence { .. }
                | Error::FitDiverged(_)
                | Error::GaussianFitFailed(_)
                | Error::DegenerateProjection { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
