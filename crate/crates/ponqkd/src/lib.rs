//! Raman-noise and DPS-QKD performance model for a quantum channel sharing a
//! lit GPON / NG-PON2 passive optical network.
//!
//! The pipeline runs classical channel plan -> Raman noise routed through the
//! distribution network -> receive filter -> SPAD -> raw rate, QBER and secure
//! key rate. The `planner` module scans the quantum wavelength for a tree with
//! mixed GPON / NG-PON2 subscribers.

pub mod calibration;
pub mod detector;
pub mod dps;
pub mod error;
pub mod odn;
pub mod planner;
pub mod raman;
pub mod scenario;
pub mod spectral;
pub mod table;
pub mod units;

pub use error::{Error, FieldError, Result};
