//! Spatio-temporal kernel density estimation for predictive hotspot mapping,
//! with likelihood cross-validated bandwidths, Monte-Carlo significance
//! testing and PAI-based forecast evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod cli;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod io;
pub mod kernels;
pub mod significance;
pub mod synth;

pub use domain::{
    Bandwidths, DensitySurface, DensityVolume, GridSpec2D, GridSpec3D, Incident, LandUse, LandUseGrid, Point3,
    TimeWindow, VoxelIndex,
};
pub use error::{Error, Result};
pub use kernels::KernelId;
