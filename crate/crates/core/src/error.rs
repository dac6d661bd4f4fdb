use thiserror::Error;

/// Errors raised by geometry, curve, solver and check operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {0:?} has no nearest point on the manifold")]
    SingularProjection(Vec<f64>),
    #[error("points at distance {dist} are beyond the injectivity radius {inj}")]
    BeyondInjectivityRadius { dist: f64, inj: f64 },
    #[error("jump between identical points")]
    DegenerateJump,
    #[error("sigma = {sigma} is outside the comparison range [0, {limit})")]
    OutOfComparisonRange { sigma: f64, limit: f64 },
    #[error("ramp width {ramp} overlaps neighbouring ramps (minimal breakpoint gap {gap})")]
    RampTooWide { ramp: f64, gap: f64 },
    #[error("time step unstable: TV grew by {growth:e} in one step at t = {t}")]
    CflViolation { t: f64, growth: f64 },
    #[error("jump {index} reached {dist}, violating the rad bound {bound}")]
    RadViolation { index: usize, dist: f64, bound: f64 },
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("snapshots are not comparable: {0}")]
    IncompatibleSnapshots(String),
    #[error("manifold {0} is not a complete NPC space")]
    NotNpc(String),
    #[error("check needs a sphere, got {0}")]
    WrongManifold(String),
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error("window variation {tv} exceeds {limit}")]
    WindowTooLong { tv: f64, limit: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its message.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct IoError(pub String);

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(IoError(e.to_string()))
    }
}

impl Error {
    /// True for errors caused by the geometry of the data rather than by configuration.
    pub fn is_geometric(&self) -> bool {
        matches!(
            self,
            Error::SingularProjection(_)
                | Error::BeyondInjectivityRadius { .. }
                | Error::DegenerateJump
                | Error::OutOfComparisonRange { .. }
                | Error::RadViolation { .. }
                | Error::DegenerateTriangle
                | Error::WindowTooLong { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
