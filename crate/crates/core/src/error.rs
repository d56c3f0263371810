use thiserror::Error;

/// Errors raised by the market model, closed-form solver, numerical oracles
/// and simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate volatility: {0}")]
    DegenerateVolatility(String),

    #[error("spread is not mean reverting: alpha1 = {alpha1} must be < c*alpha2 = {c_alpha2} (kappa = {kappa})")]
    NonMeanReverting { alpha1: f64, c_alpha2: f64, kappa: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} is at or beyond the escape time {t_esc}")]
    EscapeTimeExceeded { t: f64, t_esc: f64 },

    #[error("horizon {horizon} is within 2% of the escape time {t_esc}; finite differences refuse it")]
    HorizonNearEscape { horizon: f64, t_esc: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("ill-posed horizon: T = {horizon} >= T_N = {t_n} (gamma = {gamma}, gamma0 = {gamma0})")]
    IllPosedHorizon { gamma: f64, gamma0: f64, t_n: f64, horizon: f64 },

    #[error("wealth must be positive, got {0}")]
    NonPositiveWealth(f64),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("value function overflows f64 (log of 1 + (1-gamma) v = {log_kernel})")]
    ValueOverflow { log_kernel: f64 },

    #[error("market-neutrality condition violated (residual {residual:e})")]
    ConditionViolated { residual: f64 },

    #[error("market-neutral weights are undefined at the terminal time t = T = {0}")]
    TerminalTime(f64),

    #[error("Riccati integration diverged: |h| > {max_h} after t = {last_t} (h = {last_h})")]
    DivergenceDetected { last_t: f64, last_h: f64, max_h: f64 },

    #[error("finite-difference grid too coarse: step-doubling discrepancy {discrepancy:e} > {tolerance:e}")]
    GridTooCoarse { discrepancy: f64, tolerance: f64 },

    #[error("quadrature did not converge (last error estimate {0:e})")]
    QuadratureNotConverged(f64),

    #[error("strategy '{label}' returned a non-finite weight at z = {z}, t = {t}")]
    NonFiniteWeight { label: String, z: f64, t: f64 },

    #[error("gamma = {gamma} is not below gamma0 = {gamma0}; there is no blow-up to sweep")]
    NotIllPosed { gamma: f64, gamma0: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
