//! Linearized flux-quantization model of gated multi-terminal SQUIDs.
//!
//! The crate is organized bottom-up:
//!
//! * [`circuit`] describes a device and validates it.
//! * [`solver`] solves the linear network and builds the superconducting
//!   region as an intersection of half-planes.
//! * [`pattern`] turns that region into interference patterns and maps.
//! * [`oracle`] is an exact nonlinear two-junction solver used to check the
//!   linearization.
//! * [`analysis`] and [`fit`] extract phase/amplitude shifts, effective
//!   inductance and fitted parameters.
//! * [`io`] and [`cli`] handle config files, reports and the command line.

pub mod analysis;
pub mod circuit;
pub mod cli;
pub mod fit;
pub mod io;
pub mod oracle;
pub mod pattern;
pub mod solver;
pub mod units;

pub use circuit::{BranchSpec, DeviceConfig, Drive, GateMode, GateSpec, Theta0Policy, UnitsMode};
pub use solver::SolverError;
