//! Quantities derived from the model or from patterns: phase and amplitude
//! tunability, effective inductance and the zero-inductance coupling.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::DeviceConfig;
use crate::pattern::{InterferencePattern, SegmentKind};
use crate::solver::{GatedSquid, SolverError};

/// Coupling quoted for the measured device.
pub const MEASURED_ALPHA_ESTIMATE: f64 = 0.8;

/// Default relative slope threshold for the zero-inductance flag.
pub const ZERO_INDUCTANCE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("patterns have different periods ({0:e} vs {1:e})")]
    PeriodMismatch(f64, f64),
    #[error("pattern spans {span:e}, at least two periods ({needed:e}) required")]
    TooShort { span: f64, needed: f64 },
    #[error("phi_ext = {0:e} lies outside the pattern")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseShift {
    /// Translation of the pattern along `Φ_ext`.
    pub flux: f64,
    /// Fulton-phase shift, `-2π·flux/Φ₀`.
    pub radians: f64,
}

/// `δΦ = L2 V_g / (R_g + R_out)`.
pub fn phase_shift_predicted(config: &DeviceConfig, v_g: f64) -> Result<PhaseShift, AnalysisError> {
    let dev = GatedSquid::from_config(config)?;
    let flux = dev.phase_shift(v_g);
    Ok(PhaseShift {
        flux,
        radians: -2.0 * PI * flux / dev.phi0,
    })
}

fn curve_value(p: &InterferencePattern, phi: f64) -> f64 {
    if let Some(v) = p.eval(phi) {
        return v;
    }
    let s = &p.samples;
    let k = s.partition_point(|x| x.phi_ext < phi).clamp(1, s.len() - 1);
    let (a, b) = (&s[k - 1], &s[k]);
    a.i_c + (b.i_c - a.i_c) * (phi - a.phi_ext) / (b.phi_ext - a.phi_ext)
}

/// Translation `δ` with `b(Φ + δ) ≈ a(Φ)`, found by minimizing the RMS
/// difference over one period; wrapped into `(-P/2, P/2]`.
pub fn phase_shift_measured(a: &InterferencePattern, b: &InterferencePattern) -> Result<f64, AnalysisError> {
    let p = a.period;
    if (a.period - b.period).abs() > 1e-9 * p {
        return Err(AnalysisError::PeriodMismatch(a.period, b.period));
    }
    for pat in [a, b] {
        let span = pat.phi_range.1 - pat.phi_range.0;
        if span < 2.0 * p * (1.0 - 1e-9) {
            return Err(AnalysisError::TooShort { span, needed: 2.0 * p });
        }
    }
    // compare a on its middle period against b around the same place
    let (a0, _) = a.phi_range;
    let (b0, b1) = b.phi_range;
    let xs: Vec<f64> = (0..512).map(|k| a0 + 0.5 * p + p * (k as f64 + 0.5) / 512.0).collect();
    let rms = |d: f64| {
        let mut acc = 0.0;
        for &x in &xs {
            let t = (x + d).clamp(b0, b1);
            let diff = curve_value(b, t) - curve_value(a, x);
            acc += diff * diff;
        }
        (acc / xs.len() as f64).sqrt()
    };
    // b may be offset from a; search a full period around the nominal overlap
    let n = 400;
    let step = p / n as f64;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..n {
        let d = -0.5 * p + step * (k as f64 + 0.5);
        let r = rms(d);
        if r < best.0 {
            best = (r, d);
        }
    }
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (rms(x1), rms(x2));
    while hi - lo > 1e-10 * p {
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = rms(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = rms(x1);
        }
    }
    Ok(wrap_half_period(0.5 * (lo + hi), p))
}

/// Map into `(-P/2, P/2]`.
pub fn wrap_half_period(x: f64, p: f64) -> f64 {
    let mut y = x - p * (x / p).round();
    if y <= -0.5 * p {
        y += p;
    }
    if y > 0.5 * p {
        y -= p;
    }
    y
}

/// Downward shift of the envelope maximum, `(V_g/R_g)(1+α)/(1-αr)`.
pub fn amplitude_shift_predicted(config: &DeviceConfig, v_g: f64) -> Result<f64, AnalysisError> {
    Ok(GatedSquid::from_config(config)?.amplitude_shift(v_g)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Inductance {
    Finite(f64),
    /// Flat segment.
    Infinite,
    /// Vertical or near-vertical segment.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveInductance {
    pub left: Inductance,
    pub right: Inductance,
    pub at_vertex: bool,
}

impl EffectiveInductance {
    pub fn is_zero_inductance(&self) -> bool {
        self.left == Inductance::Zero || self.right == Inductance::Zero
    }
}

fn classify_slope(slope: f64, threshold: f64) -> Inductance {
    if slope.abs() > threshold {
        Inductance::Zero
    } else if slope == 0.0 {
        Inductance::Infinite
    } else {
        Inductance::Finite(1.0 / slope)
    }
}

/// `L_eff = (dI_c/dΦ_ext)⁻¹` from the exact segment slopes, with
/// [`ZERO_INDUCTANCE_EPS`].
pub fn effective_inductance(pattern: &InterferencePattern, phi: f64) -> Result<EffectiveInductance, AnalysisError> {
    effective_inductance_eps(pattern, phi, ZERO_INDUCTANCE_EPS)
}

/// Slopes steeper than `I*/(eps·Φ₀)` are reported as zero inductance.
pub fn effective_inductance_eps(pattern: &InterferencePattern, phi: f64, eps: f64) -> Result<EffectiveInductance, AnalysisError> {
    let (start, stop) = pattern.phi_range;
    if phi < start || phi > stop {
        return Err(AnalysisError::OutOfRange(phi));
    }
    let phi0 = pattern.period;
    let threshold = pattern.current_scale / (eps * phi0);
    let tol = 1e-12 * phi0;
    let segs = &pattern.segments;
    let vertical_here = segs
        .iter()
        .any(|s| s.kind == SegmentKind::Vertical && (s.phi_start - phi).abs() <= tol);
    let sloped = || segs.iter().filter(|s| s.kind == SegmentKind::Sloped);
    let ending = sloped().find(|s| (s.phi_end - phi).abs() <= tol && s.phi_end < stop);
    let starting = sloped().find(|s| (s.phi_start - phi).abs() <= tol && s.phi_start > start);
    let interior = sloped().find(|s| s.phi_start + tol < phi && phi < s.phi_end - tol);

    let (left, right, at_vertex) = match (interior, ending, starting) {
        (Some(s), _, _) => {
            let l = classify_slope(s.slope(), threshold);
            (l, l, false)
        }
        (None, Some(a), Some(b)) => (classify_slope(a.slope(), threshold), classify_slope(b.slope(), threshold), true),
        (None, Some(s), None) | (None, None, Some(s)) => {
            let l = classify_slope(s.slope(), threshold);
            (l, l, false)
        }
        (None, None, None) => return Err(AnalysisError::OutOfRange(phi)),
    };
    if vertical_here {
        return Ok(EffectiveInductance {
            left: Inductance::Zero,
            right: Inductance::Zero,
            at_vertex: true,
        });
    }
    Ok(EffectiveInductance { left, right, at_vertex })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaStar {
    /// `(L3/r - L1) / ΣL`.
    pub raw: f64,
    /// Clamped at 0.
    pub value: f64,
    pub physical: bool,
    /// Coupling quoted for the measured device, for comparison.
    pub measured_estimate: f64,
}

/// Coupling at which `L3 - (L1 + α ΣL) r = 0`.
pub fn alpha_star(config: &DeviceConfig) -> Result<AlphaStar, AnalysisError> {
    let raw = GatedSquid::from_config(config)?.alpha_star();
    Ok(AlphaStar {
        raw,
        value: raw.max(0.0),
        physical: raw >= 0.0,
        measured_estimate: MEASURED_ALPHA_ESTIMATE,
    })
}

/// `L3 - (L1 + α ΣL) r`.
pub fn zero_inductance_residual(config: &DeviceConfig, alpha: f64) -> Result<f64, AnalysisError> {
    let dev = GatedSquid::from_config(config)?;
    Ok(dev.l[2] - (dev.l[0] + alpha * dev.l_tot()) * dev.resistance_ratio())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateSpec;

    fn device(l: [f64; 3], r: f64) -> DeviceConfig {
        DeviceConfig::normalized_ring(&l, &[1.0; 3]).with_gate(GateSpec::narrow(1, 1.0, r, 5.0, 0.3))
    }

    #[test]
    fn alpha_star_values() {
        let a = alpha_star(&device([1.0, 1.0, 2.0], 0.57)).unwrap();
        assert!((a.raw - 0.627_192_982_456_140_4).abs() < 1e-12);
        assert!(a.physical);
        let huge = alpha_star(&device([1.0, 1.0, 2.0], 1e9)).unwrap();
        assert!((huge.raw + 0.25).abs() < 1e-6);
        assert_eq!(huge.value, 0.0);
        assert!(!huge.physical);
        let edge = alpha_star(&device([1.0, 1.0, 0.5], 0.5)).unwrap();
        assert!(edge.raw.abs() < 1e-15);
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_half_period(0.5, 1.0), 0.5);
        assert_eq!(wrap_half_period(-0.5, 1.0), 0.5);
        assert!((wrap_half_period(1.3, 1.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn predicted_phase_shift_example() {
        let c = DeviceConfig::gated_squid([10e-12, 10e-12, 20e-12], [20e-6; 3], GateSpec::wide(1, 1e3, 570.0, 50e-6));
        let s = phase_shift_predicted(&c, 1e-3).unwrap();
        assert!((s.flux - 6.369e-18).abs() < 1e-21);
        assert!((s.flux / c.phi0 - 3.08e-3).abs() < 1e-5);
        let s2 = phase_shift_predicted(&c, 2e-3).unwrap();
        assert!((s2.flux - 2.0 * s.flux).abs() < 1e-30);
    }
}
