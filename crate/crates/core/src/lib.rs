//! Pseudospectral simulation of the stochastic 2D Boussinesq system with
//! transport noise on the torus `[-pi, pi]^2`, together with numerical checks
//! of its cancellation identities, conservation laws and blow-up monitors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
mod fft;
pub mod integrator;
pub mod io;
pub mod noise;
pub mod operators;
pub mod spectral;
pub mod verify;

pub use error::*;
pub use noise::{BrownianIncrements, BrownianPath, NoiseBasis, NoiseMode, Phase};
pub use spectral::{Axis, Grid, SpectralField, VelocityField};
