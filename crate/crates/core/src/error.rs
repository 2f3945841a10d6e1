use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("detuning Δ_b = {delta_b} sits on the pole Δ_b² = ω_m² of the effective coupling")]
    SingularDetuning { delta_b: f64 },

    #[error("Bogoliubov transformation needs g > G ≥ 0 (g = {g}, G = {big_g})")]
    InvalidRatio { g: f64, big_g: f64 },

    #[error("reservoir-engineering closed form needs G < g (g = {g}, G = {big_g})")]
    InvalidRegime { g: f64, big_g: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance propagation left the finite range at t = {t}")]
    NonFiniteResult { t: f64 },

    #[error("drift matrix is not Hurwitz (max Re λ = {max_re:.3e}); no steady state exists")]
    Unstable { max_re: f64 },

    #[error("Lyapunov solve residual {residual:.3e} exceeds tolerance")]
    SolveFailed { residual: f64 },

    #[error("g_eff² = κ_a κ_b: steady covariance constants diverge")]
    StabilityPole,

    #[error("ambiguous branch tracking near Δ_a = {delta_a}")]
    AmbiguousTracking { delta_a: f64 },

    #[error("no imaginary splitting above 1e-12 found in the scan")]
    NoSplittingFound,

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("reference squeezing level is zero")]
    ZeroReference,

    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// everything raised by the computation itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::UnknownFigure(_) => 2,
            _ => 3,
        }
    }
}
