//! Numerical laboratory for vibrational ladder climbing in diatomic molecules.
//!
//! The crate is organised bottom-up:
//!
//! * [`units`], [`grid`], [`curves`] and [`model`] describe a molecule on a
//!   uniform spatial grid in atomic units.
//! * [`spectrum`] diagonalizes the Fourier-grid Hamiltonian, builds transition
//!   dipole matrices and locates missing rungs.
//! * [`pulse`] evaluates linearly chirped Gaussian pulses and pulse trains.
//! * [`propagator`] runs second-order split-operator wavepacket dynamics with a
//!   complex absorbing potential, flux accounting and level-contribution records.
//! * [`regime`] screens pulse parameters for quantum ladder climbing.
//! * [`optimize`] holds the Gaussian-process Bayesian optimizer, CMA-ES and the
//!   pulse objectives.
//! * [`analysis`] covers pulse energy, efficiency, phase sweeps and map scans.
//!
//! Everything inside the crate works in Hartree atomic units; conversions
//! happen at the boundaries through [`units`].

pub mod analysis;
pub mod curves;
pub mod error;
pub mod grid;
pub mod model;
pub mod optimize;
pub mod propagator;
pub mod pulse;
pub mod regime;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use model::MolecularModel;
pub use pulse::{ChirpedPulse, PulseTrain};
pub use spectrum::BoundSpectrum;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
