//! Superconducting region of a single-loop network as an intersection of
//! half-planes in `(Φ_ext, I_in)`.
//!
//! Branch `i` stays superconducting while `|Iᵢ| + Σ α_k |I_gk| < Iᵢ*`, the sum
//! running over narrow gates attached to either end of the branch. Expanding
//! the absolute values gives one affine constraint per sign pattern:
//!
//! ```text
//! a·I_in + b_φ·Φ_ext + b_q·q + b < T
//! ```
//!
//! with `q = (m + Θ₀/2π) Φ₀`. For fixed `(Φ_ext, m)` the feasible inputs form
//! an open interval; the critical current is the largest upper end over `m`.

use std::ops::RangeInclusive;

use serde::Serialize;

use super::network::LinearModel;
use super::SolverError;
use crate::circuit::{DeviceConfig, GateMode};

/// Relative size below which an input coefficient counts as zero.
const VERTICAL_TOL: f64 = 1e-12;

/// Which physical limit a constraint encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Binding {
    /// Branch id, 1-based.
    Branch(usize),
    /// Gate id, 1-based.
    Gate(usize),
}

impl Binding {
    pub fn label(&self) -> String {
        match *self {
            Binding::Branch(i) => i.to_string(),
            Binding::Gate(1) => "gate".into(),
            Binding::Gate(k) => format!("gate{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub binding: Binding,
    pub a: f64,
    pub b_phi: f64,
    pub b_q: f64,
    pub b: f64,
    pub limit: f64,
}

impl HalfPlane {
    /// Constraint value minus threshold, without the input term.
    fn offset(&self, phi: f64, q: f64) -> f64 {
        self.b_phi * phi + self.b_q * q + self.b - self.limit
    }

    pub fn is_vertical(&self) -> bool {
        self.a.abs() <= VERTICAL_TOL
    }

    /// Boundary `I_in(Φ_ext) = slope·Φ_ext + intercept` at fixed `q`.
    pub fn line(&self, q: f64) -> (f64, f64) {
        (-self.b_phi / self.a, (self.limit - self.b - self.b_q * q) / self.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibleInterval {
    pub m: i64,
    pub lo: f64,
    pub hi: f64,
    pub lo_binding: Binding,
    pub hi_binding: Binding,
    /// Index into [`CriticalSolver::constraints`] of the upper bound.
    pub hi_constraint: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub i_c: f64,
    pub binding: Binding,
    /// `None` when no fluxon state is superconducting and the gate window is
    /// reported instead.
    pub m: Option<i64>,
}

impl CriticalPoint {
    pub fn label(&self) -> String {
        self.binding.label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Superconducting,
    Normal,
    /// Outside the gate-port window.
    GateLimited,
}

/// Half-plane description of one device at fixed gate voltages.
#[derive(Debug, Clone)]
pub struct CriticalSolver {
    model: LinearModel,
    v_gate: Vec<f64>,
    constraints: Vec<HalfPlane>,
    flux_bound: f64,
    tie: f64,
}

impl CriticalSolver {
    pub fn new(config: &DeviceConfig, v_gate: &[f64]) -> Result<Self, SolverError> {
        Self::from_model(LinearModel::new(config)?, v_gate)
    }

    pub fn from_model(model: LinearModel, v_gate: &[f64]) -> Result<Self, SolverError> {
        if model.loops().len() != 1 {
            return Err(SolverError::MultiLoop(model.loops().len()));
        }
        let n_b = model.n_branches();
        let n_g = model.n_gates();
        if v_gate.len() != n_g {
            return Err(SolverError::GateVoltages { expected: n_g, got: v_gate.len() });
        }
        if v_gate.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteDrive);
        }

        let vg_term = |row: &[f64], k: usize| (0..n_g).map(|j| row[k * n_g + j] * v_gate[j]).sum::<f64>();
        let mut constraints = Vec::new();
        for i in 0..n_b {
            let coupled: Vec<(usize, f64)> = model
                .adjacent_gates(i)
                .into_iter()
                .filter_map(|k| {
                    let g = &model.gates()[k];
                    (g.mode == GateMode::Narrow && g.coupling_alpha > 0.0).then_some((k, g.coupling_alpha))
                })
                .collect();
            let limit = model.config.branches[i].critical_current;
            let base = (model.c_in[i], model.c_phi[i], model.c_q[i], vg_term(&model.c_vg, i));
            for mask in 0u32..(1 << (1 + coupled.len())) {
                let s0 = if mask & 1 == 0 { 1.0 } else { -1.0 };
                let mut h = HalfPlane {
                    binding: Binding::Branch(i + 1),
                    a: s0 * base.0,
                    b_phi: s0 * base.1,
                    b_q: s0 * base.2,
                    b: s0 * base.3,
                    limit,
                };
                for (bit, &(k, alpha)) in coupled.iter().enumerate() {
                    let sk = if mask & (2 << bit) == 0 { 1.0 } else { -1.0 };
                    h.a += alpha * sk * model.g_in[k];
                    h.b += alpha * sk * vg_term(&model.g_vg, k);
                }
                constraints.push(h);
            }
        }
        for (k, g) in model.gates().iter().enumerate() {
            let w = vg_term(&model.g_vg, k);
            for s in [1.0, -1.0] {
                constraints.push(HalfPlane {
                    binding: Binding::Gate(k + 1),
                    a: s * model.g_in[k],
                    b_phi: 0.0,
                    b_q: 0.0,
                    b: s * w,
                    limit: g.gate_threshold,
                });
            }
        }

        let flux_bound = model
            .config
            .branches
            .iter()
            .map(|b| b.inductance * b.critical_current)
            .sum();
        let tie = 1e-12 * model.config.current_scale();
        Ok(Self {
            v_gate: v_gate.to_vec(),
            constraints,
            flux_bound,
            tie,
            model,
        })
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn v_gate(&self) -> &[f64] {
        &self.v_gate
    }

    pub fn constraints(&self) -> &[HalfPlane] {
        &self.constraints
    }

    fn flux_weight(&self) -> f64 {
        self.model.loops()[0].flux_weight
    }

    /// Flux period of the pattern.
    pub fn period(&self) -> f64 {
        self.model.phi0() / self.flux_weight().abs()
    }

    pub fn q(&self, m: i64) -> f64 {
        self.model.fluxon_term(0, m)
    }

    /// Fluxon numbers that can possibly be superconducting at `phi_ext`:
    /// the loop flux `Σ sᵢLᵢIᵢ = q + wΦ` is bounded by `Σ LᵢIᵢ*`.
    pub fn m_window(&self, phi_ext: f64) -> RangeInclusive<i64> {
        let phi0 = self.model.phi0();
        let offset = self.q(0) + self.flux_weight() * phi_ext;
        let lo = ((-self.flux_bound - offset) / phi0).ceil() as i64 - 1;
        let hi = ((self.flux_bound - offset) / phi0).floor() as i64 + 1;
        lo..=hi
    }

    /// Open interval of superconducting inputs at `(phi_ext, m)`.
    pub fn interval(&self, phi_ext: f64, m: i64) -> Option<FeasibleInterval> {
        let q = self.q(m);
        let mut lo = (f64::NEG_INFINITY, Binding::Branch(1));
        let mut hi = (f64::INFINITY, Binding::Branch(1), usize::MAX);
        for (idx, h) in self.constraints.iter().enumerate() {
            let off = h.offset(phi_ext, q);
            if h.is_vertical() {
                if off >= -self.tie {
                    return None;
                }
                continue;
            }
            let x = -off / h.a;
            if h.a > 0.0 {
                if x < hi.0 {
                    hi = (x, h.binding, idx);
                }
            } else if x > lo.0 {
                lo = (x, h.binding);
            }
        }
        (lo.0 < hi.0).then_some(FeasibleInterval {
            m,
            lo: lo.0,
            hi: hi.0,
            lo_binding: lo.1,
            hi_binding: hi.1,
            hi_constraint: hi.2,
        })
    }

    pub fn intervals(&self, phi_ext: f64) -> Vec<FeasibleInterval> {
        self.m_window(phi_ext).filter_map(|m| self.interval(phi_ext, m)).collect()
    }

    /// Whether the superconducting inputs above `max(0, gate lower bound)`
    /// split into disjoint intervals, i.e. ramping `I_in` up leaves and
    /// re-enters the superconducting state.
    pub fn is_reentrant(&self, phi_ext: f64) -> bool {
        let floor = self.gate_window().map_or(0.0, |w| w.0.max(0.0));
        let mut iv: Vec<(f64, f64)> = self
            .intervals(phi_ext)
            .iter()
            .filter(|i| i.hi > floor)
            .map(|i| (i.lo.max(floor), i.hi))
            .collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut reach = f64::NEG_INFINITY;
        let mut pieces = 0;
        for (lo, hi) in iv {
            if lo > reach {
                pieces += 1;
            }
            reach = reach.max(hi);
        }
        pieces > 1
    }

    /// Lower and upper input bounds from the gate ports alone.
    pub fn gate_window(&self) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let mut any = false;
        for h in self.constraints.iter().filter(|h| matches!(h.binding, Binding::Gate(_))) {
            any = true;
            if h.is_vertical() {
                continue;
            }
            let x = (h.limit - h.b) / h.a;
            if h.a > 0.0 {
                hi = hi.min(x);
            } else {
                lo = lo.max(x);
            }
        }
        any.then_some((lo, hi))
    }

    /// Largest superconducting input current over all fluxon states.
    pub fn critical_current(&self, phi_ext: f64) -> Result<CriticalPoint, SolverError> {
        self.critical_detail(phi_ext).map(|d| d.0)
    }

    /// Critical point together with the index of the binding constraint.
    pub fn critical_detail(&self, phi_ext: f64) -> Result<(CriticalPoint, usize), SolverError> {
        let mut best: Option<FeasibleInterval> = None;
        for iv in self.intervals(phi_ext) {
            if best.is_none_or(|b| iv.hi > b.hi) {
                best = Some(iv);
            }
        }
        match best {
            Some(iv) if iv.hi.is_finite() => Ok((
                CriticalPoint {
                    i_c: iv.hi,
                    binding: iv.hi_binding,
                    m: Some(iv.m),
                },
                iv.hi_constraint,
            )),
            Some(_) => Err(SolverError::Unbounded { phi: phi_ext }),
            None => {
                let gate_hi = self
                    .constraints
                    .iter()
                    .enumerate()
                    .filter(|(_, h)| matches!(h.binding, Binding::Gate(_)) && h.a > VERTICAL_TOL)
                    .map(|(idx, h)| ((h.limit - h.b) / h.a, h.binding, idx))
                    .min_by(|x, y| x.0.total_cmp(&y.0));
                match gate_hi {
                    Some((i_c, binding, idx)) => Ok((CriticalPoint { i_c, binding, m: None }, idx)),
                    None => Err(SolverError::NoSuperconductingState { phi: phi_ext }),
                }
            }
        }
    }

    /// Every constraint holds strictly (with the tie margin) at fluxon `m`.
    pub fn admits(&self, phi_ext: f64, i_in: f64, m: i64) -> bool {
        let q = self.q(m);
        self.constraints
            .iter()
            .all(|h| h.a * i_in + h.offset(phi_ext, q) < -self.tie)
    }

    /// Witness fluxon number of a superconducting state, if any.
    /// Searched outward from the state with the least loop flux.
    pub fn is_superconducting(&self, phi_ext: f64, i_in: f64) -> Option<i64> {
        let centre = (-(self.q(0) + self.flux_weight() * phi_ext) / self.model.phi0()).round() as i64;
        let mut ms: Vec<i64> = self.m_window(phi_ext).collect();
        ms.sort_by_key(|&m| ((m - centre).abs(), m));
        ms.into_iter().find(|&m| self.admits(phi_ext, i_in, m))
    }

    pub fn classify(&self, phi_ext: f64, i_in: f64) -> CellState {
        let gate_ok = self
            .constraints
            .iter()
            .filter(|h| matches!(h.binding, Binding::Gate(_)))
            .all(|h| h.a * i_in + h.b - h.limit < -self.tie);
        if !gate_ok {
            CellState::GateLimited
        } else if self.is_superconducting(phi_ext, i_in).is_some() {
            CellState::Superconducting
        } else {
            CellState::Normal
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Drive, GateSpec};

    fn device(alpha: f64) -> DeviceConfig {
        DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]).with_gate(GateSpec::narrow(1, 1.0, 0.57, 5.0, alpha))
    }

    #[test]
    fn zero_drive_is_superconducting_at_m0() {
        let s = CriticalSolver::new(&device(0.4), &[0.0]).unwrap();
        assert_eq!(s.is_superconducting(0.0, 0.0), Some(0));
    }

    #[test]
    fn huge_input_is_normal() {
        let s = CriticalSolver::new(&device(0.4), &[0.0]).unwrap();
        assert_eq!(s.is_superconducting(0.1, 100.0), None);
    }

    #[test]
    fn critical_point_is_on_boundary() {
        let s = CriticalSolver::new(&device(0.4), &[1.5]).unwrap();
        for k in 0..20 {
            let phi = k as f64 / 20.0;
            let cp = s.critical_current(phi).unwrap();
            assert!(s.is_superconducting(phi, cp.i_c - 1e-9).is_some(), "phi {phi}");
            assert!(s.is_superconducting(phi, cp.i_c).is_none(), "phi {phi}");
        }
    }

    #[test]
    fn witness_agrees_with_currents() {
        let c = device(0.4);
        let s = CriticalSolver::new(&c, &[1.5]).unwrap();
        let m = s.is_superconducting(0.2, 0.5).unwrap();
        let st = LinearModel::new(&c).unwrap().state(&Drive::new(0.5, &[1.5], 0.2), &[m]).unwrap();
        let ig = st.gate_currents[0].abs();
        assert!(st.currents[0].abs() + 0.4 * ig < 1.0);
        assert!(st.currents[1].abs() + 0.4 * ig < 1.0);
        assert!(st.currents[2].abs() < 1.0);
    }

    #[test]
    fn ungated_ring_has_no_gate_window() {
        let c = DeviceConfig::normalized_ring(&[1.0; 3], &[1.0; 3]);
        let s = CriticalSolver::new(&c, &[]).unwrap();
        assert!(s.gate_window().is_none());
        assert!(s.critical_current(0.3).unwrap().i_c > 0.0);
    }
}
