//! Closed forms for the three-branch single-gate device.
//!
//! With `R = R_g + R_out`, `L_tot = L1 + L2 + L3` and
//! `Q = (m + Θ₀/2π) Φ₀ + Φ_ext`:
//!
//! ```text
//! I_g = (V_g - R_out I_in) / R
//! I1  = (Q - L2 I_g + L3 I_in) / L_tot
//! I2  = I1 + I_g
//! I3  = I1 - I_in
//! ```
//!
//! Setting `I1 = I1*`, `I2 = I2* - α|I_g|` or `I3 = -I3*` and solving for
//! `I_in` gives the three families of critical lines.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use serde::Serialize;

use super::network::{BranchState, LinearModel};
use super::SolverError;
use crate::circuit::{DeviceConfig, Drive, GateMode, Topology};

/// Parameters of the gated three-branch ring, unpacked.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedSquid {
    pub l: [f64; 3],
    pub i_star: [f64; 3],
    pub r_gate: f64,
    pub r_out: f64,
    pub gate_threshold: f64,
    /// Zero for wide gates.
    pub alpha: f64,
    pub mode: GateMode,
    pub phi0: f64,
    pub theta0: f64,
}

impl GatedSquid {
    pub fn from_config(config: &DeviceConfig) -> Result<Self, SolverError> {
        config.validate()?;
        if config.branches.len() != 3 {
            return Err(SolverError::NotGatedSquid(format!("{} branches", config.branches.len())));
        }
        if config.gates.len() != 1 {
            return Err(SolverError::NotGatedSquid(format!("{} gates", config.gates.len())));
        }
        if config.topology().edges != Topology::ring(3).edges || config.topology().input != 0 || config.topology().output != 2 {
            return Err(SolverError::NotGatedSquid("custom topology".into()));
        }
        let g = &config.gates[0];
        if g.node != 1 {
            return Err(SolverError::NotGatedSquid(format!("gate on node {}", g.node)));
        }
        let theta0 = LinearModel::new(config)?.theta0()[0];
        let b = &config.branches;
        Ok(Self {
            l: [b[0].inductance, b[1].inductance, b[2].inductance],
            i_star: [b[0].critical_current, b[1].critical_current, b[2].critical_current],
            r_gate: g.r_gate,
            r_out: g.r_out,
            gate_threshold: g.gate_threshold,
            alpha: g.effective_alpha(),
            mode: g.mode,
            phi0: config.phi0,
            theta0,
        })
    }

    pub fn l_tot(&self) -> f64 {
        self.l.iter().sum()
    }

    /// `R_g + R_out`.
    pub fn r_sum(&self) -> f64 {
        self.r_gate + self.r_out
    }

    pub fn resistance_ratio(&self) -> f64 {
        self.r_out / self.r_gate
    }

    /// `(m + Θ₀/2π) Φ₀ + Φ_ext`.
    pub fn flux_term(&self, m: i64, phi_ext: f64) -> f64 {
        (m as f64 + self.theta0 / (2.0 * PI)) * self.phi0 + phi_ext
    }

    pub fn gate_current(&self, v_g: f64, i_in: f64) -> f64 {
        (v_g - self.r_out * i_in) / self.r_sum()
    }

    /// Input currents allowed by `|I_g| < I_g*`.
    pub fn gate_input_window(&self, v_g: f64) -> (f64, f64) {
        let span = self.gate_threshold * self.r_sum();
        ((v_g - span) / self.r_out, (v_g + span) / self.r_out)
    }

    pub fn currents(&self, i_in: f64, v_g: f64, phi_ext: f64, m: i64) -> [f64; 3] {
        let [l1, l2, l3] = self.l;
        let i_g = self.gate_current(v_g, i_in);
        let i1 = (self.flux_term(m, phi_ext) - l2 * i_g + l3 * i_in) / (l1 + l2 + l3);
        [i1, i1 + i_g, i1 - i_in]
    }

    /// Critical lines for fluxon numbers in `ms`. Narrow-gate thresholds assume
    /// `I_g > 0` on the gated branches, as in the tent regime.
    pub fn critical_lines(&self, v_g: f64, ms: RangeInclusive<i64>) -> CriticalLines {
        let [l1, l2, l3] = self.l;
        let lt = self.l_tot();
        let (rg, ro) = (self.r_gate, self.r_out);
        let r = self.r_sum();
        let a = self.alpha;
        // (constant numerator part, flux sign, denominator), I_c = (num ± R·Q)/den
        let fams = [
            (lt * r * self.i_star[0] + (l2 - a * lt) * v_g, -1.0, l2 * ro + l3 * r - a * lt * ro),
            (lt * r * self.i_star[1] - (l1 + l3 + a * lt) * v_g, -1.0, l3 * rg - l1 * ro - a * lt * ro),
            (lt * r * self.i_star[2] - l2 * v_g, 1.0, l2 * rg + l1 * r),
        ];
        let mut entries = Vec::new();
        for m in ms {
            let shift = self.flux_term(m, 0.0);
            for (k, &(num, s, den)) in fams.iter().enumerate() {
                let scale = lt * r;
                let line = if den.abs() <= 1e-12 * scale {
                    // num + s·R·(shift + Φ) = 0
                    CriticalLine::Vertical { phi: -num / (s * r) - shift }
                } else {
                    CriticalLine::Sloped {
                        slope: s * r / den,
                        intercept: (num + s * r * shift) / den,
                    }
                };
                entries.push(CriticalEntry { branch: k + 1, m, line });
            }
        }
        CriticalLines { v_g, entries }
    }

    /// Upper tent vertex, where the branch-2 and branch-3 lines meet.
    pub fn envelope_max(&self, v_g: f64) -> f64 {
        let r = self.r_sum();
        (r * (self.i_star[1] + self.i_star[2]) - (1.0 + self.alpha) * v_g) / (self.r_gate - self.alpha * self.r_out)
    }

    /// Peak-to-valley height of the branch-2/branch-3 tent.
    pub fn modulation_depth(&self) -> f64 {
        self.r_sum() * self.phi0 / (self.l_tot() * (self.r_gate - self.alpha * self.r_out))
    }

    pub fn envelope_min(&self, v_g: f64) -> f64 {
        self.envelope_max(v_g) - self.modulation_depth()
    }

    /// Flux translation of the pattern, `L2 V_g / (R_g + R_out)`.
    pub fn phase_shift(&self, v_g: f64) -> f64 {
        self.l[1] * v_g / self.r_sum()
    }

    /// Downward shift of the envelope maximum relative to `V_g = 0`.
    pub fn amplitude_shift(&self, v_g: f64) -> Result<f64, SolverError> {
        let ar = self.alpha * self.resistance_ratio();
        if (1.0 - ar).abs() <= 1e-12 {
            return Err(SolverError::AmplitudeSingular);
        }
        Ok(v_g / self.r_gate * (1.0 + self.alpha) / (1.0 - ar))
    }

    /// Coupling at which the branch-2 line turns vertical.
    pub fn alpha_star(&self) -> f64 {
        let [l1, _, l3] = self.l;
        (l3 / self.resistance_ratio() - l1) / self.l_tot()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CriticalLine {
    /// `I_c = slope·Φ_ext + intercept`.
    Sloped { slope: f64, intercept: f64 },
    /// Input-independent condition `Φ_ext = phi`.
    Vertical { phi: f64 },
}

impl CriticalLine {
    pub fn eval(&self, phi_ext: f64) -> Option<f64> {
        match *self {
            CriticalLine::Sloped { slope, intercept } => Some(slope * phi_ext + intercept),
            CriticalLine::Vertical { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalEntry {
    pub branch: usize,
    pub m: i64,
    pub line: CriticalLine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalLines {
    pub v_g: f64,
    pub entries: Vec<CriticalEntry>,
}

impl CriticalLines {
    pub fn get(&self, branch: usize, m: i64) -> Option<&CriticalLine> {
        self.entries.iter().find(|e| e.branch == branch && e.m == m).map(|e| &e.line)
    }
}

fn single_gate(config: &DeviceConfig, drive: &Drive) -> Result<(), SolverError> {
    if config.gates.len() != 1 || drive.v_gate.len() != 1 {
        return Err(SolverError::GateVoltages { expected: 1, got: drive.v_gate.len() });
    }
    Ok(())
}

/// `I_g = (V_g - R_out I_in) / (R_g + R_out)` for a single-gate device.
pub fn gate_current(config: &DeviceConfig, drive: &Drive) -> Result<f64, SolverError> {
    single_gate(config, drive)?;
    let g = &config.gates[0];
    Ok((drive.v_gate[0] - g.r_out * drive.i_in) / (g.r_gate + g.r_out))
}

/// Input-current window `(lower, upper)` from `|I_g| < I_g*`.
pub fn gate_input_window(config: &DeviceConfig, v_g: f64) -> Result<(f64, f64), SolverError> {
    let Some(g) = config.gates.first() else {
        return Err(SolverError::GateVoltages { expected: 1, got: 0 });
    };
    let span = g.gate_threshold * (g.r_gate + g.r_out);
    Ok(((v_g - span) / g.r_out, (v_g + span) / g.r_out))
}

/// Upper input-current bound imposed by the gate port.
pub fn gate_critical_input(config: &DeviceConfig, v_g: f64) -> Result<f64, SolverError> {
    gate_input_window(config, v_g).map(|w| w.1)
}

pub fn internal_currents_closed(config: &DeviceConfig, drive: &Drive, m: i64) -> Result<BranchState, SolverError> {
    single_gate(config, drive)?;
    let dev = GatedSquid::from_config(config)?;
    let v = drive.v_gate[0];
    let currents = dev.currents(drive.i_in, v, drive.phi_ext, m);
    let fulton_phases = currents
        .iter()
        .zip(dev.l)
        .map(|(&c, l)| PI / 2.0 * c.signum() * f64::from(c != 0.0) + 2.0 * PI / dev.phi0 * l * c)
        .collect();
    Ok(BranchState {
        currents: currents.to_vec(),
        gate_currents: vec![dev.gate_current(v, drive.i_in)],
        fluxons: vec![m],
        fulton_phases,
    })
}

pub fn critical_lines(config: &DeviceConfig, v_g: f64, ms: RangeInclusive<i64>) -> Result<CriticalLines, SolverError> {
    Ok(GatedSquid::from_config(config)?.critical_lines(v_g, ms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateSpec;

    fn si_device() -> DeviceConfig {
        DeviceConfig::gated_squid([10e-12, 10e-12, 20e-12], [20e-6; 3], GateSpec::wide(1, 1e3, 570.0, 5e-6))
    }

    #[test]
    fn gate_current_values() {
        let c = si_device();
        assert_eq!(gate_current(&c, &Drive::new(0.0, &[0.0], 0.0)).unwrap(), 0.0);
        let ig = gate_current(&c, &Drive::new(0.0, &[10e-3], 0.0)).unwrap();
        assert!((ig - 6.3694e-6).abs() < 1e-10);
        let ig = gate_current(&c, &Drive::new(3e-6, &[570.0 * 3e-6], 0.0)).unwrap();
        assert!(ig.abs() < 1e-20);
    }

    #[test]
    fn gate_bound_solves_threshold_inequality() {
        let c = si_device();
        let (lo, hi) = gate_input_window(&c, 10e-3).unwrap();
        let dev = GatedSquid::from_config(&c).unwrap();
        assert!((dev.gate_current(10e-3, hi) + 5e-6).abs() < 1e-18);
        assert!((dev.gate_current(10e-3, lo) - 5e-6).abs() < 1e-18);
        // (10 mV + 5 µA·1570 Ω) / 570 Ω
        assert!((hi - 3.1316e-5).abs() < 1e-9);
        let mut wide_open = c.clone();
        wide_open.gates[0].gate_threshold = 1e30;
        assert!(gate_critical_input(&wide_open, 0.0).unwrap() > 1e29);
    }

    #[test]
    fn lines_shift_by_one_period_per_fluxon() {
        let c = si_device();
        let lines = critical_lines(&c, 1e-3, -1..=1).unwrap();
        for b in 1..=3 {
            let (l0, l1) = (lines.get(b, 0).unwrap(), lines.get(b, 1).unwrap());
            let phi = 0.3e-15;
            assert!((l0.eval(phi).unwrap() - l1.eval(phi - c.phi0).unwrap()).abs() < 1e-18);
        }
    }

    #[test]
    fn alpha_star_example() {
        let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]).with_gate(GateSpec::narrow(1, 1.0, 0.57, 5.0, 0.3));
        let a = GatedSquid::from_config(&c).unwrap().alpha_star();
        assert!((a - (2.0 / 0.57 - 1.0) / 4.0).abs() < 1e-15);
    }
}
