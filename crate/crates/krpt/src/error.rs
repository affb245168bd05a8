use thiserror::Error;

/// Unified error type for configuration, kernel selection, solvers, and the
/// particle engine.
#[derive(Debug, Error)]
pub enum KrptError {
    #[error("domain measure must be positive, got {0}")]
    NonPositiveDomain(f64),

    #[error("initial concentration must be positive, got {0}")]
    NonPositiveConcentration(f64),

    #[error("diffusion coefficient must be non-negative, got {0}")]
    NegativeDiffusion(f64),

    #[error("reaction rate must be non-negative, got {0}")]
    NegativeRate(f64),

    #[error("time step must be positive, got {0}")]
    NonPositiveTimeStep(f64),

    #[error("stop time {t_final} must be at least one time step {dt}")]
    StopTimeBeforeFirstStep { t_final: f64, dt: f64 },

    #[error("gaussian particle count {n_gauss} must satisfy 1 <= N_G <= N_delta = {n_dirac}")]
    GaussianCountExceedsDirac { n_gauss: usize, n_dirac: usize },

    #[error("spatial dimension must be >= 1")]
    ZeroDimension,

    #[error("ensemble size must be >= 1")]
    EmptyEnsemble,

    #[error("kernel half-width must be non-negative, got {0}")]
    NegativeHalfWidth(f64),

    #[error("Damkohler number is undefined for zero diffusion")]
    ZeroDiffusion,

    #[error("co-location kernel has zero total variance (half-width and D*dt both zero)")]
    DegenerateKernel,

    #[error(
        "matching time t* = {t_star} is infeasible (exceeds tau* = {tau_star}); \
         the half-width formula has no real solution there"
    )]
    InfeasibleMatchTime { t_star: f64, tau_star: f64 },

    #[error("least-squares matching requires a non-empty time grid")]
    EmptyTimeGrid,

    #[error("time grid must be strictly increasing and non-negative")]
    InvalidTimeGrid,

    #[error("psi_delta diverges at t = 0; evaluate at t > 0")]
    SingularAtZero,

    #[error("the moment equations are solved for Dirac and fixed-Gaussian kernels only")]
    UnsupportedMomentKernel,

    #[error("moment solver failed to self-converge; Richardson estimate {estimate:e} after {halvings} halvings")]
    NoConvergence { estimate: f64, halvings: u32 },

    #[error(
        "particle mass driven below zero during reaction step at t = {time} \
         (worst overdraw {overdraw:e}); reduce the time step"
    )]
    MassOverdraw { time: f64, overdraw: f64 },

    #[error("run produces an empty trace (no complete step before t_final)")]
    EmptyTrace,

    #[error("autocovariance estimation needs at least {needed} systems, got {got}")]
    InsufficientEnsemble { needed: usize, got: usize },

    #[error("perturbation amplitude {amplitude} exceeds C0 = {c0}; cells could go negative")]
    NegativeConcentrationRisk { amplitude: f64, c0: f64 },

    #[error("grid cell went negative ({value:e}) at t = {time}; reduce the time step")]
    NegativeConcentration { time: f64, value: f64 },

    #[error("particle engine supports d = 1 only, got d = {0}")]
    UnsupportedDimension(u32),

    #[error("config key {0:?} is not recognized")]
    UnknownConfigKey(String),

    #[error("config value for {key:?} is malformed: {value:?}")]
    MalformedConfigValue { key: String, value: String },

    #[error("config line {0:?} is not of the form `key = value`")]
    MalformedConfigLine(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KrptError>;
