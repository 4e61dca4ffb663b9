use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("dispersion is not gapped: min xi_k = {min_xi}")]
    NotGapped { min_xi: f64 },

    #[error("negative quasiparticle radicand at k index {k}: {value}")]
    Domain { k: usize, value: f64 },

    #[error("{what} did not converge after {iterations} iterations (last change {last_delta:e})")]
    NotConverged { what: &'static str, iterations: usize, last_delta: f64 },

    #[error("{what} became unstable after {iterations} sweeps; reduce dt or the damping factor")]
    Unstable { what: &'static str, iterations: usize },

    #[error("pseudo-unitarity defect {defect:e} exceeds {gate:e}; halve the step")]
    IntegratorDefect { defect: f64, gate: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}
