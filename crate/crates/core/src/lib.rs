//! One-dimensional model atom in a strong laser pulse: TDSE propagation,
//! Bohmian trajectories, classical return ensembles and time-frequency
//! analysis of the emitted harmonics.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohmian;
pub mod classical;
pub mod config;
pub mod eigen;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod pipeline;
pub mod potential;
pub mod pulse;
pub mod spectral;
pub mod tdse;

pub use error::{Error, Result};
pub use grid::{SpatialGrid, TimeSeries, Trajectory, TrajectoryKind, Wavefunction};
pub use potential::{BindingPotential, PotentialSpec};
pub use pulse::PulseSpec;
