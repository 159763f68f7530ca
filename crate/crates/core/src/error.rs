use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate state: zero norm")]
    DegenerateState,

    #[error("qubit amplitudes not normalized: |alpha|^2 + |beta|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("midpoint tuning reserved for z-configuration")]
    MidpointTuning,

    #[error("z-configuration requires a vanishing pump envelope (pump = {value} at t = {t} ps)")]
    PumpNotZero { t: f64, value: f64 },

    #[error("mixing angle undefined: all field amplitudes vanish")]
    VanishingFields,

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("gate is not unitary: deviation {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("quadrature did not converge: error estimate {estimate:e} > tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("stiffness/tolerance failure: step size underflow at t = {t} ps (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("positivity violation: eigenvalue {min_eigenvalue:e} at t = {t} ps")]
    Positivity { t: f64, min_eigenvalue: f64 },

    #[error("channel average inconsistency: six-state {six_state}, sphere {sphere}")]
    ChannelAverage { six_state: f64, sphere: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
