//! Circuit description: branches, gates, topology, unit handling and
//! validation.
//!
//! The default topology for `N` branches is a single ring
//! `0 → 1 → … → N-1 → 0`. The input current enters node 0 and leaves through
//! node `N-1`; for three branches this is the gated SQUID with the gate
//! attached to node 1, where
//!
//! ```text
//! I_in = I1 - I3,   I_g = I2 - I1,   I_out = I2 - I3
//! ```
//!
//! All superconducting nodes sit at the common potential `V0`; each gate
//! drives `I_g = (V_g - V0) / R_g` into its node and the output node returns
//! `I_out = V0 / R_out` to ground.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::units::PHI0_SI;

/// Current-phase relation of a weak link.
///
/// Only the sinusoidal relation is built in; the linearized model depends on
/// the CPR only through `dI/dθ = 0` at its maximum, so any analytic CPR with
/// that property is handled identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cpr {
    #[default]
    Sinusoidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    /// Branch id, 1-based.
    pub index: usize,
    /// Total (kinetic + geometric) inductance.
    pub inductance: f64,
    pub critical_current: f64,
    #[serde(default)]
    pub cpr: Cpr,
}

impl BranchSpec {
    pub fn new(index: usize, inductance: f64, critical_current: f64) -> Self {
        Self {
            index,
            inductance,
            critical_current,
            cpr: Cpr::Sinusoidal,
        }
    }
}

/// Wide gates only shift the loop phase; narrow gates additionally suppress
/// the critical currents of the adjacent weak links by `α |I_g|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    Wide,
    Narrow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    /// Node the gate lead attaches to.
    pub node: usize,
    pub r_gate: f64,
    pub r_out: f64,
    /// Gate-port threshold `I_g*`.
    pub gate_threshold: f64,
    pub coupling_alpha: f64,
    /// `w_g / w_j`, descriptive only.
    pub width_ratio: Option<f64>,
    pub mode: GateMode,
}

impl GateSpec {
    pub fn wide(node: usize, r_gate: f64, r_out: f64, gate_threshold: f64) -> Self {
        Self {
            node,
            r_gate,
            r_out,
            gate_threshold,
            coupling_alpha: 0.0,
            width_ratio: None,
            mode: GateMode::Wide,
        }
    }

    pub fn narrow(node: usize, r_gate: f64, r_out: f64, gate_threshold: f64, alpha: f64) -> Self {
        Self {
            coupling_alpha: alpha,
            mode: GateMode::Narrow,
            ..Self::wide(node, r_gate, r_out, gate_threshold)
        }
    }

    /// `r = R_out / R_g`.
    pub fn resistance_ratio(&self) -> f64 {
        self.r_out / self.r_gate
    }

    /// Coupling that actually enters the thresholds (zero for wide gates).
    pub fn effective_alpha(&self) -> f64 {
        match self.mode {
            GateMode::Wide => 0.0,
            GateMode::Narrow => self.coupling_alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theta0Policy {
    Auto,
    #[serde(untagged)]
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitsMode {
    Si,
    Normalized,
}

/// Explicit network graph. Edge `k` carries branch `k`, positive from the
/// first to the second node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub input: usize,
    pub output: usize,
    /// Fraction of `Φ_ext` threading each fundamental loop (defaults to 1).
    #[serde(default)]
    pub loop_flux_weights: Vec<f64>,
}

impl Topology {
    pub fn ring(branches: usize) -> Self {
        Self {
            nodes: branches,
            edges: (0..branches).map(|k| (k, (k + 1) % branches)).collect(),
            input: 0,
            output: branches.saturating_sub(1),
            loop_flux_weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub branches: Vec<BranchSpec>,
    pub gates: Vec<GateSpec>,
    pub topology: Option<Topology>,
    pub theta0: Theta0Policy,
    pub phi0: f64,
    pub units: UnitsMode,
}

impl DeviceConfig {
    /// Three-branch single-gate device in SI units.
    pub fn gated_squid(inductances: [f64; 3], critical_currents: [f64; 3], gate: GateSpec) -> Self {
        Self {
            branches: (0..3)
                .map(|k| BranchSpec::new(k + 1, inductances[k], critical_currents[k]))
                .collect(),
            gates: vec![gate],
            topology: None,
            theta0: Theta0Policy::Explicit(0.0),
            phi0: PHI0_SI,
            units: UnitsMode::Si,
        }
    }

    /// Ungated ring of branches in normalized units (Φ₀ = 1).
    pub fn normalized_ring(inductances: &[f64], critical_currents: &[f64]) -> Self {
        Self {
            branches: inductances
                .iter()
                .zip(critical_currents)
                .enumerate()
                .map(|(k, (&l, &i))| BranchSpec::new(k + 1, l, i))
                .collect(),
            gates: Vec::new(),
            topology: None,
            theta0: Theta0Policy::Explicit(0.0),
            phi0: 1.0,
            units: UnitsMode::Normalized,
        }
    }

    pub fn with_gate(mut self, gate: GateSpec) -> Self {
        self.gates.push(gate);
        self
    }

    pub fn with_theta0(mut self, theta0: Theta0Policy) -> Self {
        self.theta0 = theta0;
        self
    }

    pub fn topology(&self) -> Topology {
        self.topology
            .clone()
            .unwrap_or_else(|| Topology::ring(self.branches.len()))
    }

    pub fn total_inductance(&self) -> f64 {
        self.branches.iter().map(|b| b.inductance).sum()
    }

    /// Largest branch critical current; the natural current scale.
    pub fn current_scale(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.critical_current)
            .fold(0.0, f64::max)
    }

    pub fn inductance(&self, branch: usize) -> f64 {
        self.branches[branch - 1].inductance
    }

    pub fn validate(&self) -> Result<(), ValidationReport> {
        let mut v = Vec::new();
        if self.branches.len() < 2 {
            v.push(Violation::TooFewBranches(self.branches.len()));
        }
        for (k, b) in self.branches.iter().enumerate() {
            let id = k + 1;
            if b.index != id {
                v.push(Violation::BranchIndex { position: id, index: b.index });
            }
            if !(b.inductance.is_finite() && b.inductance > 0.0) {
                v.push(Violation::NonPositive { field: format!("branches[{id}].inductance"), what: "inductance" });
            }
            if !(b.critical_current.is_finite() && b.critical_current > 0.0) {
                v.push(Violation::NonPositive {
                    field: format!("branches[{id}].critical_current"),
                    what: "critical current",
                });
            } else if b.inductance > 0.0 && !beta_l(b, self.phi0).is_finite() {
                v.push(Violation::NonFinite { field: format!("branches[{id}]"), what: "beta_L" });
            }
        }
        if !(self.phi0.is_finite() && self.phi0 > 0.0) {
            v.push(Violation::NonPositive { field: "phi0".into(), what: "flux quantum" });
        }
        if self.units == UnitsMode::Normalized && self.phi0 != 1.0 {
            v.push(Violation::NormalizedPhi0(self.phi0));
        }
        if let Theta0Policy::Explicit(t) = self.theta0 {
            if !t.is_finite() {
                v.push(Violation::NonFinite { field: "theta0".into(), what: "theta0" });
            }
        }

        let topo = self.topology();
        if let Some(t) = &self.topology {
            if t.edges.len() != self.branches.len() {
                v.push(Violation::Topology(format!(
                    "{} edges for {} branches",
                    t.edges.len(),
                    self.branches.len()
                )));
            }
            for (k, &(a, b)) in t.edges.iter().enumerate() {
                if a >= t.nodes || b >= t.nodes {
                    v.push(Violation::Topology(format!("edge {} references a missing node", k + 1)));
                } else if a == b {
                    v.push(Violation::Topology(format!("edge {} is a self loop", k + 1)));
                }
            }
            if t.input >= t.nodes || t.output >= t.nodes {
                v.push(Violation::Topology("input/output node out of range".into()));
            }
            if t.input == t.output {
                v.push(Violation::Topology("input and output nodes coincide".into()));
            }
            if t.loop_flux_weights.iter().any(|w| !w.is_finite()) {
                v.push(Violation::NonFinite { field: "topology.loop_flux_weights".into(), what: "flux weight" });
            }
        }

        for (k, g) in self.gates.iter().enumerate() {
            let id = k + 1;
            if g.node >= topo.nodes {
                v.push(Violation::DanglingGate { gate: id, node: g.node, nodes: topo.nodes });
            }
            for (name, val) in [("r_gate", g.r_gate), ("r_out", g.r_out), ("gate_threshold", g.gate_threshold)] {
                if !(val > 0.0) {
                    v.push(Violation::NonPositive { field: format!("gates[{id}].{name}"), what: "resistance or threshold" });
                }
            }
            if !(g.coupling_alpha.is_finite() && g.coupling_alpha >= 0.0) {
                v.push(Violation::NegativeAlpha { gate: id });
            }
            if let Some(w) = g.width_ratio {
                if !(w.is_finite() && w > 0.0) {
                    v.push(Violation::NonPositive { field: format!("gates[{id}].width_ratio"), what: "width ratio" });
                }
            }
        }
        if let Some(first) = self.gates.first() {
            if self.gates.iter().any(|g| g.r_out != first.r_out) {
                v.push(Violation::InconsistentOutput);
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(ValidationReport { violations: v })
        }
    }
}

/// Returns the config unchanged when every invariant holds.
pub fn validate_device(config: DeviceConfig) -> Result<DeviceConfig, ValidationReport> {
    config.validate().map(|()| config)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewBranches(usize),
    BranchIndex { position: usize, index: usize },
    NonPositive { field: String, what: &'static str },
    NonFinite { field: String, what: &'static str },
    NormalizedPhi0(f64),
    DanglingGate { gate: usize, node: usize, nodes: usize },
    NegativeAlpha { gate: usize },
    InconsistentOutput,
    Topology(String),
}

impl Violation {
    /// Config field the violation refers to, when there is one.
    pub fn field(&self) -> Option<String> {
        match self {
            Violation::NonPositive { field, .. } | Violation::NonFinite { field, .. } => Some(field.clone()),
            Violation::DanglingGate { gate, .. } => Some(format!("gates[{gate}].node")),
            Violation::NegativeAlpha { gate } => Some(format!("gates[{gate}].coupling_alpha")),
            Violation::NormalizedPhi0(_) => Some("phi0".into()),
            Violation::BranchIndex { position, .. } => Some(format!("branches[{position}].index")),
            _ => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewBranches(n) => write!(f, "at least 2 branches required, got {n}"),
            Violation::BranchIndex { position, index } => {
                write!(f, "branches[{position}]: index {index} does not match its position")
            }
            Violation::NonPositive { field, what } => write!(f, "{field}: {what} must be positive"),
            Violation::NonFinite { field, what } => write!(f, "{field}: {what} must be finite"),
            Violation::NormalizedPhi0(p) => write!(f, "phi0: normalized units require phi0 = 1, got {p}"),
            Violation::DanglingGate { gate, node, nodes } => {
                write!(f, "gates[{gate}].node: dangling attachment to node {node} ({nodes} nodes)")
            }
            Violation::NegativeAlpha { gate } => write!(f, "gates[{gate}].coupling_alpha: must be >= 0"),
            Violation::InconsistentOutput => write!(f, "gates: all gates must share the same r_out"),
            Violation::Topology(msg) => write!(f, "topology: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Screening parameter `(2π/Φ₀)·L·I*`.
pub fn beta_l(branch: &BranchSpec, phi0: f64) -> f64 {
    2.0 * PI / phi0 * branch.inductance * branch.critical_current
}

/// External knobs applied to a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub i_in: f64,
    /// One voltage per gate.
    pub v_gate: Vec<f64>,
    pub phi_ext: f64,
    pub m: Option<i64>,
}

impl Drive {
    pub fn new(i_in: f64, v_gate: &[f64], phi_ext: f64) -> Self {
        Self {
            i_in,
            v_gate: v_gate.to_vec(),
            phi_ext,
            m: None,
        }
    }

    pub fn with_m(mut self, m: i64) -> Self {
        self.m = Some(m);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.i_in.is_finite() && self.phi_ext.is_finite() && self.v_gate.iter().all(|v| v.is_finite())
    }
}

/// Scale factors between SI and normalized units. Currents are measured in
/// `current`, fluxes in `phi0`, resistances in `resistance`; inductance and
/// voltage units follow as `phi0 / current` and `current · resistance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    pub current: f64,
    pub resistance: f64,
    pub phi0: f64,
}

impl UnitScale {
    pub const IDENTITY: UnitScale = UnitScale {
        current: 1.0,
        resistance: 1.0,
        phi0: 1.0,
    };

    pub fn inductance(&self) -> f64 {
        self.phi0 / self.current
    }

    pub fn voltage(&self) -> f64 {
        self.current * self.resistance
    }
}

/// Convert to normalized units: currents relative to branch 1's critical
/// current, resistances relative to the first gate's `R_g` (or 1 Ω when
/// ungated), flux in units of Φ₀. Already-normalized inputs pass through.
pub fn to_normalized(config: &DeviceConfig, drive: &Drive) -> (DeviceConfig, Drive, UnitScale) {
    if config.units == UnitsMode::Normalized {
        return (config.clone(), drive.clone(), UnitScale::IDENTITY);
    }
    let scale = UnitScale {
        current: config.branches[0].critical_current,
        resistance: config.gates.first().map_or(1.0, |g| g.r_gate),
        phi0: config.phi0,
    };
    (
        rescale_config(config, &scale, false),
        rescale_drive(drive, &scale, false),
        scale,
    )
}

/// Inverse of [`to_normalized`].
pub fn from_normalized(config: &DeviceConfig, drive: &Drive, scale: &UnitScale) -> (DeviceConfig, Drive) {
    if config.units == UnitsMode::Si {
        return (config.clone(), drive.clone());
    }
    (rescale_config(config, scale, true), rescale_drive(drive, scale, true))
}

fn conv(x: f64, unit: f64, to_si: bool) -> f64 {
    if to_si {
        x * unit
    } else {
        x / unit
    }
}

fn rescale_config(config: &DeviceConfig, s: &UnitScale, to_si: bool) -> DeviceConfig {
    let mut out = config.clone();
    for b in &mut out.branches {
        b.inductance = conv(b.inductance, s.inductance(), to_si);
        b.critical_current = conv(b.critical_current, s.current, to_si);
    }
    for g in &mut out.gates {
        g.r_gate = conv(g.r_gate, s.resistance, to_si);
        g.r_out = conv(g.r_out, s.resistance, to_si);
        g.gate_threshold = conv(g.gate_threshold, s.current, to_si);
    }
    if to_si {
        out.phi0 = s.phi0;
        out.units = UnitsMode::Si;
    } else {
        out.phi0 = 1.0;
        out.units = UnitsMode::Normalized;
    }
    out
}

fn rescale_drive(drive: &Drive, s: &UnitScale, to_si: bool) -> Drive {
    Drive {
        i_in: conv(drive.i_in, s.current, to_si),
        v_gate: drive.v_gate.iter().map(|v| conv(*v, s.voltage(), to_si)).collect(),
        phi_ext: conv(drive.phi_ext, s.phi0, to_si),
        m: drive.m,
    }
}
