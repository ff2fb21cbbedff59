//! Exact desk-scale simulator of heralded two-photon polarization
//! entanglement from probabilistic logic operations on multiple
//! down-conversion sources.
//!
//! The crate evolves sparse multi-mode Fock states through polarizing
//! beamsplitter networks, models multi-pair emission of the sources, and
//! conditions on photon-counting herald patterns. Everything is computed in
//! closed form at double precision: there is no sampling and no randomness,
//! so identical inputs always produce identical outputs.
//!
//! Module map:
//! - [`fock`]: sparse Fock states, projective counting, two-qubit reduction;
//! - [`elements`]: mode transforms for the optical elements;
//! - [`sources`]: Bell pairs and truncated multi-pair down-conversion;
//! - [`detection`]: detector models and the post-selection engine;
//! - [`protocol`]: the full heralding circuits, sector analysis, and the
//!   qubit-level oracle;
//! - [`memory`]: the cyclical storage-loop model for the heralded pair;
//! - [`cli`]: the batch front-end behind the `herald-sim` binary.

pub mod cli;
pub mod detection;
pub mod elements;
pub mod error;
pub mod fock;
pub mod memory;
pub mod protocol;
pub mod sources;

pub use error::{Result, SimError};
