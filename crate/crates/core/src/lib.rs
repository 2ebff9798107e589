//! Simulation and analysis chain for microwave-to-optical transduction of
//! itinerant single microwave photons.
//!
//! The crate is organised along the physical signal path:
//!
//! * [`figures`]: device parameters and closed-form figures of merit.
//! * [`qubit`]: transmon-cavity master equation and itinerant photon envelopes.
//! * [`microwave`]: EO-cavity reflection, loss accounting, heterodyne SNR.
//! * [`tomography`]: heterodyne shots, moments, state reconstruction, Wigner functions.
//! * [`optical`]: filter banks, optical and thermal noise, detection budget.
//! * [`counting`]: photon-counting Monte Carlo, SNR, Rabi fits, rate sweeps.
//! * [`pipeline`]: configuration, subcommands and run reports.

pub mod counting;
pub mod error;
pub mod figures;
pub mod microwave;
pub mod optical;
pub mod pipeline;
pub mod qubit;
pub mod rng;
pub mod spectral;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64;
