//! Linearized quantization model: internal currents, critical lines and the
//! superconducting region.

mod closed;
mod constraints;
mod network;

pub use closed::{
    critical_lines, gate_critical_input, gate_current, gate_input_window, internal_currents_closed, CriticalEntry,
    CriticalLine, CriticalLines, GatedSquid,
};
pub use constraints::{Binding, CellState, CriticalPoint, CriticalSolver, FeasibleInterval, HalfPlane};
pub use network::{internal_currents_generic, BranchState, LinearModel, LoopEquation};

use thiserror::Error;

use crate::circuit::{DeviceConfig, Drive, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid device:\n{0}")]
    Invalid(#[from] ValidationReport),
    #[error("singular network: {equations} are deficient ({detail})")]
    Singular { equations: &'static str, detail: String },
    #[error("drive has {got} gate voltages, device has {expected} gates")]
    GateVoltages { expected: usize, got: usize },
    #[error("{got} fluxon numbers given for {expected} loops")]
    FluxonCount { expected: usize, got: usize },
    #[error("drive contains a non-finite value")]
    NonFiniteDrive,
    #[error("closed-form solution needs the three-branch ring with one gate on node 1: {0}")]
    NotGatedSquid(String),
    #[error("critical current is defined for single-loop networks, this one has {0} loops")]
    MultiLoop(usize),
    #[error("no superconducting state at phi_ext = {phi:e} for any fluxon number")]
    NoSuperconductingState { phi: f64 },
    #[error("input current is unbounded above at phi_ext = {phi:e}")]
    Unbounded { phi: f64 },
    #[error("amplitude shift is singular: alpha * r = 1")]
    AmplitudeSingular,
}

/// Critical current at one flux point; see [`CriticalSolver::critical_current`].
pub fn critical_current(config: &DeviceConfig, phi_ext: f64, v_gate: &[f64]) -> Result<CriticalPoint, SolverError> {
    CriticalSolver::new(config, v_gate)?.critical_current(phi_ext)
}

/// Whether the drive admits a superconducting state; returns the witness
/// fluxon number.
pub fn is_superconducting(config: &DeviceConfig, drive: &Drive) -> Result<Option<i64>, SolverError> {
    let solver = CriticalSolver::new(config, &drive.v_gate)?;
    if !drive.is_finite() {
        return Err(SolverError::NonFiniteDrive);
    }
    Ok(match drive.m {
        Some(m) => solver.admits(drive.phi_ext, drive.i_in, m).then_some(m),
        None => solver.is_superconducting(drive.phi_ext, drive.i_in),
    })
}
