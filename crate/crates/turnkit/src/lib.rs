//! Turn detection for pedestrian inertial trajectories.
//!
//! The crate ingests smartphone-style IMU logs, extracts steps and per-step
//! heading, and runs three detector families over the resulting series:
//!
//! * [`threshold`] — per-step yaw-delta thresholding, with optional merging
//!   of adjacent detections into single turn events;
//! * [`hmm`] — a legacy 3-step composite-state detector and a block-based
//!   region HMM driven by peak segmentation of the bandpassed yaw;
//! * [`pelt`] / [`iforest`] / [`fusion`] — penalized change-point search on
//!   the yaw series, isolation-forest anomaly scoring on step features, and
//!   their union.
//!
//! [`synth`] generates walks with exact ground truth and [`eval`] scores
//! detectors with missed-detection / false-alarm / overlap accounting.

pub mod angles;
pub mod butter;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod hmm;
pub mod iforest;
pub mod pelt;
pub mod signal;
pub mod synth;
pub mod threshold;
pub mod types;

pub use error::{Error, Result};
pub use types::{Method, Region, TurnEvent};
