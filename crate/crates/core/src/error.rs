use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid chain or drive specification: {0}")]
    InvalidSpec(String),

    /// Squeezing parameters do not exist or the dynamics has a non-negative eigenvalue.
    #[error("unstable dynamics: {reason} (γ ≤ |t| maps the chain onto pure parametric driving)")]
    Unstable { reason: String, max_real_eigenvalue: Option<f64> },

    #[error("dynamical matrix is numerically singular (reciprocal condition {rcond:e})")]
    Singular { rcond: f64 },

    #[error("element ({row}, {col}) is not in the closed-form catalogue")]
    NotTabulated { row: usize, col: usize },

    #[error("closed form hits a pole: denominator {denominator:e} (scale {scale:e})")]
    PoleEncountered { denominator: f64, scale: f64 },

    #[error("closed form requires the fixed protocol: {0}")]
    ProtocolMismatch(String),

    #[error("no exponential enhancement: log-ratios ln L = {ln_l}, ln R = {ln_r}")]
    NoEnhancement { ln_l: f64, ln_r: f64 },

    #[error("linear regime never breaks down (amplification factor {factor} ≤ 1)")]
    NoBreakdown { factor: f64 },

    #[error("time-domain integration diverged at t = {time} (|v| = {norm:e})")]
    OracleDiverged { time: f64, norm: f64 },

    #[error("time-domain integration did not converge by t = {t_end}; residual {residual:e}")]
    OracleNotConverged { t_end: f64, residual: f64 },
}
