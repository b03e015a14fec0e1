//! Data-driven gait model and a four-state extended Kalman filter for gait
//! phase, phase rate, stride length and incline.
//!
//! - [`gait_model`] fits and evaluates the constrained kinematic model.
//! - [`torque_model`] fits the biomimetic ankle torque surface.
//! - [`estimator`] is the main filter.
//! - [`baseline`] holds the timing-based estimator, heel-strike detection
//!   and the backup estimator that can reset the filter.
//! - [`simdata`] generates and loads labeled stride data and streams.
//! - [`harness`] runs cross-validation, ablation and replay experiments.

pub mod baseline;
pub mod error;
pub mod estimator;
pub mod gait_model;
pub mod harness;
pub mod model_file;
pub mod simdata;
pub mod torque_model;

pub use error::{Error, Result};
pub use estimator::{FilterState, MeasurementVector, NoiseConfig};
pub use gait_model::{GaitState, ParameterMatrix};
pub use simdata::StrideDataset;
