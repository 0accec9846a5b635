use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator length mismatch: {left} vs {right} sites")]
    LengthMismatch { left: usize, right: usize },

    #[error("{n} sites exceeds the dense dimension cap of {cap} sites")]
    DimensionCap { n: usize, cap: usize },

    #[error("invalid Pauli text: {0}")]
    Parse(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("time {t} outside [0, {tau}]")]
    TimeOutOfRange { t: f64, tau: f64 },

    #[error("ansatz range {range} exceeds a chain of {n} sites")]
    AnsatzRange { range: usize, n: usize },

    #[error("operator is not Hermitian (imaginary coefficient {imag:e})")]
    NotHermitian { imag: f64 },

    #[error("zero-width spectrum (E_max = E_min = {0})")]
    ZeroWidthSpectrum(f64),

    #[error("integrator did not converge after {refinements} refinements (last change {delta:e}, steps {steps})")]
    NonConvergence {
        refinements: usize,
        delta: f64,
        steps: usize,
    },

    #[error("cost returned non-finite value {value} at beta = {beta:?}")]
    NonFiniteCost { beta: Vec<f64>, value: f64 },

    #[error("invalid optimizer setup: {0}")]
    InvalidOptimizer(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
