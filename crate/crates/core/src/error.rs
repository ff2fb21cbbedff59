//! Error types shared across the simulator.

use thiserror::Error;

/// Errors produced by state construction, optical evolution, and detection.
#[derive(Debug, Error)]
pub enum SimError {
    /// A caller-supplied value violates a precondition (unknown channel,
    /// duplicate port, non-unitary matrix, parameter out of range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation would push the total photon count past the configured
    /// bound of the registry.
    #[error("photon capacity exceeded: {0}")]
    Capacity(String),

    /// The state is not in the shape the operation requires (consumed port,
    /// leftover unmeasured photons, ...).
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
