//! Fluorescence time-of-arrival simulator for two-level atoms crossing a
//! resonant laser beam of finite width.
//!
//! The crate solves the stationary scattering problem of the non-Hermitian
//! conditional Hamiltonian (analytically for a sharp-edged beam, by transfer
//! matrices for arbitrary Rabi profiles), evolves incident wave packets
//! conditioned on no photon detection, and computes first-photon and ideal
//! arrival-time distributions.

pub mod arrival;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod packet;
pub mod regime;
pub mod scattering;
pub mod series;
pub mod transfer;
pub mod wave;

pub use error::{Error, Result};
pub use model::{AtomLaserConfig, PhysicalConstants, RabiProfile, ValidatedConfig};
pub use num_complex::Complex64 as C64;
