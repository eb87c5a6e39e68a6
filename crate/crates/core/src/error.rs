use thiserror::Error;

/// Every failure the library can report.
///
/// Variants map onto CLI exit codes through [`Error::is_config_error`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension N = {0} is too small, need N >= 3")]
    DimensionTooSmall(usize),
    #[error("supercritical exponent: p = {p} is at or above the Sobolev exponent {bound}")]
    SupercriticalExponent { p: f64, bound: f64 },
    #[error("p = {p} is at or below the Serrin exponent {bound}")]
    SubthresholdExponent { p: f64, bound: f64 },
    #[error("weight exponent {nu} lies outside the open interval ({lo}, {hi})")]
    WeightOutOfRange { nu: f64, lo: f64, hi: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("tolerance unreachable: step size underflow at t = {t}")]
    ToleranceUnreachable { t: f64 },

    #[error("grid has {0} points, need at least 5")]
    GridTooCoarse(usize),
    #[error("solution overflowed while integrating the channel ODE at r = {r}")]
    IntegrationOverflow { r: f64 },
    #[error("decaying solution vanishes at r = 1 and cannot be normalized")]
    NormalizationFailure,
    #[error("Frobenius fit unreliable: best residual {residual:e}")]
    FitUnreliable { residual: f64 },
    #[error("indicial roots are complex, Frobenius fit needs real roots")]
    ComplexRoots,
    #[error("fit basis exponents collide: separation {gap}")]
    RootsTooClose { gap: f64 },
    #[error("Hardy integrand has not decayed at the grid ends")]
    TailNotDecayed,

    #[error("grid node lies on the singular set")]
    NodeOnSingularSet,
    #[error("exponent ordering violated: {0}")]
    ExponentOrdering(String),

    #[error("invalid singular set: {0}")]
    SpecInvalid(String),
    #[error("domain is incompatible with the singular set: {0}")]
    IncompatibleDomain(String),

    #[error("iterative solver stagnated after {iterations} iterations (residual {residual:e})")]
    SolverStagnation { iterations: usize, residual: f64 },
    #[error("linear system is singular at pivot {0}")]
    SingularSystem(usize),
    #[error("barrier inequality fails at node {node} (value {value:e})")]
    BarrierFailure { node: usize, value: f64 },

    #[error("Picard iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("iterate left the ball at iteration {iteration}: norm {norm:e} > radius {radius:e}")]
    LeftBall { iteration: usize, norm: f64, radius: f64 },
    #[error("positivity lost at iteration {iteration}")]
    PositivityLost { iteration: usize },
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),

    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad input rather than a numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionTooSmall(_)
                | Error::SupercriticalExponent { .. }
                | Error::SubthresholdExponent { .. }
                | Error::WeightOutOfRange { .. }
                | Error::InvalidInput(_)
                | Error::GridTooCoarse(_)
                | Error::SpecInvalid(_)
                | Error::IncompatibleDomain(_)
                | Error::ExponentOrdering(_)
                | Error::Config(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
