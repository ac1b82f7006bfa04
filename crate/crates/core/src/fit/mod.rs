//! Least-squares fit of device parameters to measured `I_c(Φ_ext)` curves.
//!
//! The envelope is piecewise affine with kinks, so the optimizer is a
//! derivative-free bounded simplex. Starts are drawn from a seeded ChaCha
//! stream, run in parallel, and merged by best RMS then lowest start index,
//! which keeps results bit-identical across runs and thread counts.

mod simplex;

pub use simplex::{minimize, SimplexOptions, SimplexRun};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{DeviceConfig, Theta0Policy};
use crate::solver::{CriticalSolver, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FitParam {
    /// 1-based branch.
    Inductance(usize),
    CriticalCurrent(usize),
    Alpha,
    RGate,
    ROut,
    Theta0,
    GateThreshold,
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitParam::Inductance(i) => write!(f, "L{i}"),
            FitParam::CriticalCurrent(i) => write!(f, "I{i}"),
            FitParam::Alpha => f.write_str("alpha"),
            FitParam::RGate => f.write_str("r_gate"),
            FitParam::ROut => f.write_str("r_out"),
            FitParam::Theta0 => f.write_str("theta0"),
            FitParam::GateThreshold => f.write_str("gate_threshold"),
        }
    }
}

impl FromStr for FitParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let indexed = |rest: &str| rest.parse::<usize>().ok().filter(|&i| i >= 1);
        match s {
            "alpha" => Ok(FitParam::Alpha),
            "r_gate" => Ok(FitParam::RGate),
            "r_out" => Ok(FitParam::ROut),
            "theta0" => Ok(FitParam::Theta0),
            "gate_threshold" => Ok(FitParam::GateThreshold),
            _ => match (s.get(..1), s.get(1..).and_then(indexed)) {
                (Some("L"), Some(i)) => Ok(FitParam::Inductance(i)),
                (Some("I"), Some(i)) => Ok(FitParam::CriticalCurrent(i)),
                _ => Err(format!("unknown fit parameter {s:?}")),
            },
        }
    }
}

impl TryFrom<String> for FitParam {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<FitParam> for String {
    fn from(p: FitParam) -> String {
        p.to_string()
    }
}

impl FitParam {
    pub fn get(&self, c: &DeviceConfig) -> Option<f64> {
        Some(match *self {
            FitParam::Inductance(i) => c.branches.get(i - 1)?.inductance,
            FitParam::CriticalCurrent(i) => c.branches.get(i - 1)?.critical_current,
            FitParam::Alpha => c.gates.first()?.coupling_alpha,
            FitParam::RGate => c.gates.first()?.r_gate,
            FitParam::ROut => c.gates.first()?.r_out,
            FitParam::GateThreshold => c.gates.first()?.gate_threshold,
            FitParam::Theta0 => match c.theta0 {
                Theta0Policy::Explicit(t) => t,
                Theta0Policy::Auto => LinearModel::new(c).ok()?.theta0()[0],
            },
        })
    }

    /// Gate parameters apply to every gate.
    pub fn set(&self, c: &mut DeviceConfig, v: f64) {
        match *self {
            FitParam::Inductance(i) => c.branches[i - 1].inductance = v,
            FitParam::CriticalCurrent(i) => c.branches[i - 1].critical_current = v,
            FitParam::Alpha => c.gates.iter_mut().for_each(|g| g.coupling_alpha = v),
            FitParam::RGate => c.gates.iter_mut().for_each(|g| g.r_gate = v),
            FitParam::ROut => c.gates.iter_mut().for_each(|g| g.r_out = v),
            FitParam::GateThreshold => c.gates.iter_mut().for_each(|g| g.gate_threshold = v),
            FitParam::Theta0 => c.theta0 = Theta0Policy::Explicit(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    pub param: FitParam,
    pub lower: f64,
    pub upper: f64,
}

impl ParamBound {
    pub fn new(param: FitParam, lower: f64, upper: f64) -> Self {
        Self { param, lower, upper }
    }

    fn value_at(&self, u: f64) -> f64 {
        self.lower + u * (self.upper - self.lower)
    }

    fn unit_of(&self, v: f64) -> f64 {
        ((v - self.lower) / (self.upper - self.lower)).clamp(0.0, 1.0)
    }
}

/// One measured curve at fixed gate voltages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCurve {
    pub v_gate: Vec<f64>,
    pub phi_ext: Vec<f64>,
    pub i_c: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub simplex: SimplexOptions,
    /// Extra simplex restarts from the best point of each start.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            simplex: SimplexOptions::default(),
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedValue {
    pub param: FitParam,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: Vec<FittedValue>,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the winning start.
    pub best_start: usize,
    /// Data points left out because the model is re-entrant there.
    pub excluded: usize,
    /// Best objective after every iteration of the winning start.
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub config: DeviceConfig,
}

impl FitResult {
    pub fn value(&self, p: FitParam) -> Option<f64> {
        self.params.iter().find(|v| v.param == p).map(|v| v.value)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("unidentifiable: the critical-current data are constant")]
    Unidentifiable,
    #[error("curve {curve} spans {span:e} in flux, at least two periods ({needed:e}) required")]
    TooShort { curve: usize, span: f64, needed: f64 },
    #[error("curve {0} has mismatched or empty columns")]
    BadCurve(usize),
    #[error("no free parameters")]
    NoParameters,
    #[error("bounds for {param} are invalid: [{lower}, {upper}]")]
    BadBounds { param: FitParam, lower: f64, upper: f64 },
    #[error("parameter {0} does not exist on this device")]
    UnknownParameter(FitParam),
    #[error("template is invalid: {0}")]
    Template(String),
}

struct Objective<'a> {
    data: &'a [FitCurve],
    template: &'a DeviceConfig,
    free: &'a [ParamBound],
}

impl Objective<'_> {
    fn config_at(&self, u: &[f64]) -> DeviceConfig {
        let mut c = self.template.clone();
        for (b, &x) in self.free.iter().zip(u) {
            b.param.set(&mut c, b.value_at(x));
        }
        c
    }

    /// RMS residual and the number of excluded points.
    fn eval(&self, u: &[f64]) -> (f64, usize) {
        let c = self.config_at(u);
        let Ok(model) = LinearModel::new(&c) else {
            return (f64::INFINITY, 0);
        };
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut excluded = 0usize;
        for curve in self.data {
            let Ok(solver) = CriticalSolver::from_model(model.clone(), &curve.v_gate) else {
                return (f64::INFINITY, 0);
            };
            for (&phi, &ic) in curve.phi_ext.iter().zip(&curve.i_c) {
                let Ok(cp) = solver.critical_current(phi) else {
                    return (f64::INFINITY, 0);
                };
                if solver.is_reentrant(phi) {
                    excluded += 1;
                    continue;
                }
                acc += (cp.i_c - ic).powi(2);
                count += 1;
            }
        }
        if count == 0 {
            return (f64::INFINITY, excluded);
        }
        ((acc / count as f64).sqrt(), excluded)
    }
}

fn check_inputs(data: &[FitCurve], template: &DeviceConfig, free: &[ParamBound]) -> Result<(), FitError> {
    template.validate().map_err(|e| FitError::Template(e.to_string()))?;
    if free.is_empty() {
        return Err(FitError::NoParameters);
    }
    for b in free {
        if !(b.lower.is_finite() && b.upper.is_finite() && b.upper > b.lower) {
            return Err(FitError::BadBounds { param: b.param, lower: b.lower, upper: b.upper });
        }
        if b.param.get(template).is_none() {
            return Err(FitError::UnknownParameter(b.param));
        }
    }
    let period = template.phi0;
    let mut all = Vec::new();
    for (k, c) in data.iter().enumerate() {
        if c.phi_ext.len() != c.i_c.len() || c.phi_ext.len() < 2 {
            return Err(FitError::BadCurve(k));
        }
        let lo = c.phi_ext.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.phi_ext.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 2.0 * period * (1.0 - 1e-9) {
            return Err(FitError::TooShort { curve: k, span: hi - lo, needed: 2.0 * period });
        }
        all.extend_from_slice(&c.i_c);
    }
    if all.is_empty() {
        return Err(FitError::BadCurve(0));
    }
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let spread = all.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
        return Err(FitError::Unidentifiable);
    }
    Ok(())
}

/// Minimize the RMS of model-minus-data critical current over the free
/// parameters, inside their bounds.
pub fn fit_parameters(
    data: &[FitCurve],
    template: &DeviceConfig,
    free: &[ParamBound],
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    check_inputs(data, template, free)?;
    let objective = Objective { data, template, free };

    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|k| {
            if k == 0 {
                free.iter().map(|b| b.unit_of(b.param.get(template).unwrap())).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
                free.iter().map(|_| rng.random::<f64>()).collect()
            }
        })
        .collect();

    let runs: Vec<(usize, SimplexRun)> = starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let f = |u: &[f64]| objective.eval(u).0;
            let mut run = minimize(f, x0, &opts.simplex);
            for _ in 0..opts.restarts {
                let again = minimize(f, &run.x, &opts.simplex);
                let improved = again.value < run.value;
                let mut trace = std::mem::take(&mut run.trace);
                let floor = trace.last().copied().unwrap_or(f64::INFINITY);
                trace.extend(again.trace.iter().map(|v| v.min(floor)));
                let iterations = run.iterations + again.iterations;
                if improved {
                    run = SimplexRun { trace, iterations, ..again };
                } else {
                    run.trace = trace;
                    run.iterations = iterations;
                    run.converged &= again.converged;
                    break;
                }
            }
            (k, run)
        })
        .collect();

    let (best_start, best) = runs
        .into_iter()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .expect("at least one start");
    let (rms, excluded) = objective.eval(&best.x);
    let params = free
        .iter()
        .zip(&best.x)
        .map(|(b, &u)| FittedValue {
            param: b.param,
            value: b.value_at(u),
            lower: b.lower,
            upper: b.upper,
        })
        .collect();
    Ok(FitResult {
        params,
        rms,
        iterations: best.iterations,
        converged: best.converged,
        best_start,
        excluded,
        trace: best.trace,
        config: objective.config_at(&best.x),
    })
}
