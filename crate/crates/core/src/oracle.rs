//! Exact nonlinear solver for a DC-SQUID with two sinusoidal weak links in
//! series with inductances `L1`, `L2`.
//!
//! With `bₖ = 2π Lₖ Iₖc / Φ₀` and `f = Φ_ext / Φ₀` the loop condition reads
//!
//! ```text
//! θ1 - θ2 + b1 sin θ1 - b2 sin θ2 + 2π f = 2π m
//! ```
//!
//! and the device carries `I = I1c sin θ1 + I2c sin θ2`. For each `θ1` the
//! condition is solved for `θ2` on the monotone pieces of `θ + b2 sin θ`,
//! which handles the multivalued branches at `b2 > 1` without jumping
//! between them.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{DeviceConfig, Theta0Policy, UnitsMode};
use crate::solver::{CriticalSolver, SolverError};

const SCAN: usize = 2048;
const ROOT_TOL: f64 = 1e-14;
const POLISH_TOL: f64 = 1e-12;
const POLISH_CANDIDATES: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid loop: {0}")]
    Invalid(String),
    #[error("root finder did not converge at theta1 = {theta1}, m = {m}")]
    NoConvergence { theta1: f64, m: i64 },
    #[error("no phase configuration satisfies the loop condition at phi_ext = {phi:e}")]
    NoSolution { phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoJunctionLoop {
    pub l1: f64,
    pub l2: f64,
    pub ic1: f64,
    pub ic2: f64,
    pub phi0: f64,
}

impl TwoJunctionLoop {
    pub fn new(l1: f64, l2: f64, ic1: f64, ic2: f64, phi0: f64) -> Result<Self, OracleError> {
        for (name, v) in [("l1", l1), ("l2", l2), ("ic1", ic1), ("ic2", ic2), ("phi0", phi0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(OracleError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { l1, l2, ic1, ic2, phi0 })
    }

    /// Identical junctions in normalized units with `β_L = beta` each.
    pub fn symmetric(beta: f64) -> Self {
        Self {
            l1: beta / (2.0 * PI),
            l2: beta / (2.0 * PI),
            ic1: 1.0,
            ic2: 1.0,
            phi0: 1.0,
        }
    }

    fn b(&self) -> (f64, f64) {
        let k = 2.0 * PI / self.phi0;
        (k * self.l1 * self.ic1, k * self.l2 * self.ic2)
    }

    pub fn beta_l(&self) -> (f64, f64) {
        self.b()
    }

    /// Equivalent ungated two-branch ring for the linearized model.
    pub fn linearized_config(&self) -> DeviceConfig {
        let mut c = DeviceConfig::normalized_ring(&[self.l1, self.l2], &[self.ic1, self.ic2]).with_theta0(Theta0Policy::Auto);
        c.phi0 = self.phi0;
        if self.phi0 != 1.0 {
            c.units = UnitsMode::Si;
        }
        c
    }

    /// Loop-condition residual in radians.
    pub fn residual(&self, theta1: f64, theta2: f64, phi_ext: f64, m: i64) -> f64 {
        let (b1, b2) = self.b();
        theta1 - theta2 + b1 * theta1.sin() - b2 * theta2.sin() + 2.0 * PI * phi_ext / self.phi0 - 2.0 * PI * m as f64
    }

    pub fn current(&self, theta1: f64, theta2: f64) -> f64 {
        self.ic1 * theta1.sin() + self.ic2 * theta2.sin()
    }

    /// Positive-definite Hessian of the current-biased energy.
    pub fn is_stable(&self, theta1: f64, theta2: f64) -> bool {
        let k = 2.0 * PI / self.phi0;
        let (kap1, kap2) = (1.0 / (k * self.l1), 1.0 / (k * self.l2));
        let a1 = self.ic1 * theta1.cos() + kap1;
        let a2 = self.ic2 * theta2.cos() + kap2;
        a1 > 0.0 && a2 > 0.0 && kap1 + kap2 - kap1 * kap1 / a1 - kap2 * kap2 / a2 > 0.0
    }

    /// Fluxon numbers with any solution at `phi_ext`.
    pub fn m_window(&self, phi_ext: f64) -> std::ops::RangeInclusive<i64> {
        let (b1, b2) = self.b();
        let reach = (g_range(b1) + g_range(b2)) / (2.0 * PI) + 1.0;
        let f = phi_ext / self.phi0;
        ((f - reach).ceil() as i64)..=((f + reach).floor() as i64)
    }
}

// max |θ + b sin θ| over [-π, π]
fn g_range(b: f64) -> f64 {
    if b <= 1.0 {
        PI
    } else {
        let c = (-1.0 / b).acos();
        (c + (b * b - 1.0).sqrt()).max(PI)
    }
}

// Monotone pieces of θ + b sin θ on [-π, π].
fn pieces(b: f64) -> Vec<(f64, f64)> {
    if b <= 1.0 {
        vec![(-PI, PI)]
    } else {
        let c = (-1.0 / b).acos();
        vec![(-PI, -c), (-c, c), (c, PI)]
    }
}

// Solve θ + b sin θ = t on a monotone piece.
fn solve_piece(b: f64, t: f64, (lo, hi): (f64, f64)) -> Option<Result<f64, ()>> {
    let g = |x: f64| x + b * x.sin() - t;
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Some(Ok(lo));
    }
    if ghi == 0.0 {
        return Some(Ok(hi));
    }
    if glo.signum() == ghi.signum() {
        return None;
    }
    let rising = ghi > 0.0;
    let (mut a, mut z) = (lo, hi);
    let mut x = 0.5 * (a + z);
    let scale = t.abs().max(1.0);
    for _ in 0..200 {
        let gx = g(x);
        if gx.abs() <= ROOT_TOL * scale {
            return Some(Ok(x));
        }
        if (gx > 0.0) == rising {
            z = x;
        } else {
            a = x;
        }
        let d = 1.0 + b * x.cos();
        let newton = x - gx / d;
        x = if d != 0.0 && newton > a && newton < z { newton } else { 0.5 * (a + z) };
        if z - a <= f64::EPSILON * scale {
            return Some(Ok(x));
        }
    }
    Some(Err(()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactOptimum {
    pub i_c: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub m: i64,
    /// Loop-condition residual, radians.
    pub residual: f64,
    pub stable: bool,
}

#[derive(Clone, Copy)]
struct Candidate {
    current: f64,
    theta1: f64,
    theta2: f64,
    m: i64,
    piece: usize,
}

// All solutions at every scanned θ1, grouped by fluxon number and θ2 piece.
fn scan(lp: &TwoJunctionLoop, phi_ext: f64, only_m: Option<i64>) -> Result<Vec<Candidate>, OracleError> {
    let (b1, b2) = lp.b();
    let f = phi_ext / lp.phi0;
    let r2 = g_range(b2);
    let ps = pieces(b2);
    let mut out = Vec::new();
    for k in 0..SCAN {
        let theta1 = -PI + 2.0 * PI * k as f64 / SCAN as f64;
        let base = theta1 + b1 * theta1.sin() + 2.0 * PI * f;
        let ms = match only_m {
            Some(m) => m..=m,
            None => ((base - r2) / (2.0 * PI)).ceil() as i64..=((base + r2) / (2.0 * PI)).floor() as i64,
        };
        for m in ms {
            let t = base - 2.0 * PI * m as f64;
            for (piece, &range) in ps.iter().enumerate() {
                match solve_piece(b2, t, range) {
                    None => {}
                    Some(Err(())) => return Err(OracleError::NoConvergence { theta1, m }),
                    Some(Ok(theta2)) => out.push(Candidate {
                        current: lp.current(theta1, theta2),
                        theta1,
                        theta2,
                        m,
                        piece,
                    }),
                }
            }
        }
    }
    Ok(out)
}

// Golden-section refinement of ±I along one branch of the solution curve.
fn polish(lp: &TwoJunctionLoop, phi_ext: f64, c: Candidate, sign: f64) -> Result<Candidate, OracleError> {
    let (b1, b2) = lp.b();
    let f = phi_ext / lp.phi0;
    let range = pieces(b2)[c.piece];
    let eval = |theta1: f64| -> Result<Option<(f64, f64)>, OracleError> {
        let t = theta1 + b1 * theta1.sin() + 2.0 * PI * f - 2.0 * PI * c.m as f64;
        match solve_piece(b2, t, range) {
            None => Ok(None),
            Some(Err(())) => Err(OracleError::NoConvergence { theta1, m: c.m }),
            Some(Ok(theta2)) => Ok(Some((sign * lp.current(theta1, theta2), theta2))),
        }
    };
    let h = 2.0 * PI / SCAN as f64;
    let (mut a, mut z) = (c.theta1 - h, c.theta1 + h);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let score = |x: f64| -> Result<f64, OracleError> { Ok(eval(x)?.map_or(f64::NEG_INFINITY, |v| v.0)) };
    let mut x1 = z - ratio * (z - a);
    let mut x2 = a + ratio * (z - a);
    let (mut f1, mut f2) = (score(x1)?, score(x2)?);
    while z - a > POLISH_TOL {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (z - a);
            f2 = score(x2)?;
        } else {
            z = x2;
            x2 = x1;
            f2 = f1;
            x1 = z - ratio * (z - a);
            f1 = score(x1)?;
        }
    }
    let x = 0.5 * (a + z);
    match eval(x)? {
        Some((v, theta2)) if v >= sign * c.current => Ok(Candidate {
            current: sign * v,
            theta1: x,
            theta2,
            ..c
        }),
        _ => Ok(c),
    }
}

fn best_polished(
    lp: &TwoJunctionLoop,
    phi_ext: f64,
    mut cands: Vec<Candidate>,
    sign: f64,
) -> Result<Option<Candidate>, OracleError> {
    cands.sort_by(|x, y| (sign * y.current).total_cmp(&(sign * x.current)));
    let mut best: Option<Candidate> = None;
    let mut seen: Vec<(i64, usize)> = Vec::new();
    for c in cands {
        if seen.len() >= POLISH_CANDIDATES {
            break;
        }
        // one local optimum per fluxon branch is enough
        if seen.contains(&(c.m, c.piece)) {
            continue;
        }
        seen.push((c.m, c.piece));
        let p = polish(lp, phi_ext, c, sign)?;
        if best.is_none_or(|b| sign * p.current > sign * b.current) {
            best = Some(p);
        }
    }
    Ok(best)
}

/// Largest total supercurrent over all phase configurations and fluxon
/// numbers.
pub fn exact_critical_current(lp: &TwoJunctionLoop, phi_ext: f64) -> Result<ExactOptimum, OracleError> {
    let cands = scan(lp, phi_ext, None)?;
    let best = best_polished(lp, phi_ext, cands, 1.0)?.ok_or(OracleError::NoSolution { phi: phi_ext })?;
    Ok(ExactOptimum {
        i_c: best.current,
        theta1: best.theta1,
        theta2: best.theta2,
        m: best.m,
        residual: lp.residual(best.theta1, best.theta2, phi_ext, best.m).abs(),
        stable: lp.is_stable(best.theta1, best.theta2),
    })
}

/// Range of bias currents with a stable state in fluxon sector `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRegion {
    pub m: i64,
    pub phi_ext: Vec<f64>,
    /// `(lower, upper)` bias bounds, `None` where sector `m` has no stable
    /// state.
    pub bounds: Vec<Option<(f64, f64)>>,
}

impl StabilityRegion {
    pub fn contains(&self, k: usize, i_in: f64) -> bool {
        self.bounds[k].is_some_and(|(lo, hi)| i_in >= lo && i_in <= hi)
    }
}

/// Flux span on which sector `m` can have solutions.
pub fn sector_span(lp: &TwoJunctionLoop, m: i64) -> (f64, f64) {
    let (b1, b2) = lp.b();
    let reach = (g_range(b1) + g_range(b2)) / (2.0 * PI);
    ((m as f64 - reach) * lp.phi0, (m as f64 + reach) * lp.phi0)
}

pub fn stability_bounds(lp: &TwoJunctionLoop, m: i64, phi_ext: f64) -> Result<Option<(f64, f64)>, OracleError> {
    let stable: Vec<Candidate> = scan(lp, phi_ext, Some(m))?
        .into_iter()
        .filter(|c| lp.is_stable(c.theta1, c.theta2))
        .collect();
    if stable.is_empty() {
        return Ok(None);
    }
    let hi = best_polished(lp, phi_ext, stable.clone(), 1.0)?.map(|c| c.current);
    let lo = best_polished(lp, phi_ext, stable, -1.0)?.map(|c| c.current);
    Ok(hi.zip(lo).map(|(hi, lo)| (lo, hi)))
}

pub fn stability_region(lp: &TwoJunctionLoop, m: i64, phi_grid: &[f64]) -> Result<StabilityRegion, OracleError> {
    let bounds = phi_grid
        .par_iter()
        .map(|&phi| stability_bounds(lp, m, phi))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StabilityRegion {
        m,
        phi_ext: phi_grid.to_vec(),
        bounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonSample {
    pub phi_ext: f64,
    pub exact: f64,
    pub linear: f64,
    /// `|exact - linear| / I*`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub beta_l: (f64, f64),
    pub samples: Vec<ComparisonSample>,
    pub max_error: f64,
    pub mean_error: f64,
}

/// Exact against linearized critical current, normalized by the larger
/// junction critical current.
pub fn compare_linearized(lp: &TwoJunctionLoop, phi_samples: &[f64]) -> Result<ComparisonReport, OracleError> {
    let config = lp.linearized_config();
    let solver = CriticalSolver::new(&config, &[]).map_err(|e| OracleError::Invalid(e.to_string()))?;
    let i_ref = lp.ic1.max(lp.ic2);
    let samples = phi_samples
        .par_iter()
        .map(|&phi| {
            let exact = exact_critical_current(lp, phi)?.i_c;
            // the linear ring runs branch 2 against the oracle's orientation
            let linear = match solver.critical_current(-phi) {
                Ok(cp) => cp.i_c,
                // the linearized ring has no state here at all
                Err(SolverError::NoSuperconductingState { .. }) => 0.0,
                Err(e) => return Err(OracleError::Invalid(e.to_string())),
            };
            Ok(ComparisonSample {
                phi_ext: phi,
                exact,
                linear,
                error: (exact - linear).abs() / i_ref,
            })
        })
        .collect::<Result<Vec<_>, OracleError>>()?;
    let max_error = samples.iter().map(|s| s.error).fold(0.0, f64::max);
    let mean_error = samples.iter().map(|s| s.error).sum::<f64>() / samples.len().max(1) as f64;
    Ok(ComparisonReport {
        beta_l: lp.b(),
        samples,
        max_error,
        mean_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flux_symmetric_is_full_current() {
        let lp = TwoJunctionLoop::symmetric(3.0);
        let opt = exact_critical_current(&lp, 0.0).unwrap();
        assert!((opt.i_c - 2.0).abs() < 1e-9, "{opt:?}");
        assert!(opt.residual < 1e-10);
    }

    #[test]
    fn root_solver_hits_tolerance() {
        for b in [0.3, 1.0, 4.0, 80.0] {
            for t in [-2.0, 0.0, 0.7, 3.0] {
                for piece in pieces(b) {
                    if let Some(r) = solve_piece(b, t, piece) {
                        let x = r.unwrap();
                        assert!((x + b * x.sin() - t).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_nonpositive_inductance() {
        assert!(TwoJunctionLoop::new(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }
}
