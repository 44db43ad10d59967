//! Reaction-diffusion model of protest activity `u`, social tension `v` and
//! police presence `P`: steady states, region maps, travelling-wave
//! simulation, front metrics, tail asymptotics and lattice sweeps.
//!
//! The kinetics, integrator and metrics are generic over [`Scalar`]
//! (`f32` or `f64`); the analysis modules work in `f64`.

pub mod asymptotics;
pub mod error;
pub mod kinetics;
pub mod linalg;
pub mod pde;
pub mod regions;
pub mod roots;
pub mod scalar;
pub mod sweep;
pub mod wave_metrics;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelParams64 = kinetics::ModelParams<f64>;
pub type ModelParams32 = kinetics::ModelParams<f32>;
pub type SteadyState64 = kinetics::SteadyState<f64>;
pub type SteadyState32 = kinetics::SteadyState<f32>;
pub type GridSpec64 = pde::GridSpec<f64>;
pub type GridSpec32 = pde::GridSpec<f32>;
pub type Trajectory64 = pde::Trajectory<f64>;
pub type Trajectory32 = pde::Trajectory<f32>;
pub type Snapshot64 = pde::Snapshot<f64>;
pub type Snapshot32 = pde::Snapshot<f32>;
