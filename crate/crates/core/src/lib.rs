//! Vision-based shape sensing for soft continuum arms.
//!
//! The arm's centerline is modeled as a Cosserat rod whose curvature profile
//! is a linear combination of strain basis functions. Observed silhouette
//! boundaries on a wide-angle camera's image sphere are matched against the
//! projected tube to estimate the basis coefficients, and hence the full 3D
//! shape.
//!
//! Module map:
//!
//! * [`liegroup`]: SO(3)/SE(3) algebra
//! * [`strainbasis`]: curvature basis families and strain fields
//! * [`rodmodel`]: integration of the rod kinematics
//! * [`camera`]: omnidirectional camera and tube silhouettes
//! * [`estimator`]: reprojection cost and coefficient fitting
//! * [`calibration`]: base-pose and sensor-chain calibration
//! * [`experiments`]: synthetic datasets, error metrics and basis comparison

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod camera;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod liegroup;
pub mod rodmodel;
pub mod solver;
pub mod strainbasis;

pub use error::{Error, Result};
