//! Interference patterns `I_c(Φ_ext)` and superconducting/normal maps.
//!
//! The envelope is computed exactly. Over one flux period every boundary
//! line of every fluxon state is intersected with every other; between two
//! consecutive breakpoints the active `(constraint, m)` pair cannot change, so
//! one evaluation at the midpoint identifies the segment. The period is then
//! replicated with `Φ → Φ + Φ₀`, `m → m - 1`. Samples are only for output.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::DeviceConfig;
use crate::solver::{Binding, CellState, CriticalSolver, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("at least 2 samples required, got {0}")]
    TooFewSamples(usize),
    #[error("flux range [{start:e}, {stop:e}] is empty or not finite")]
    BadRange { start: f64, stop: f64 },
    #[error("pattern spans {span:e} but one period is {period:e}")]
    ShortPattern { span: f64, period: f64 },
    #[error("{axis} grid must be nonempty and strictly increasing")]
    Grid { axis: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternSample {
    pub phi_ext: f64,
    pub i_c: f64,
    pub branch: String,
    pub m: Option<i64>,
    /// Feasible inputs at this flux split into disjoint intervals.
    pub reentrant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Sloped,
    /// Jump of the envelope at fixed flux.
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub phi_start: f64,
    pub phi_end: f64,
    pub i_start: f64,
    pub i_end: f64,
    pub binding: Binding,
    pub m: Option<i64>,
    pub kind: SegmentKind,
    pub reentrant: bool,
    #[serde(skip)]
    constraint: usize,
}

impl Segment {
    pub fn slope(&self) -> f64 {
        match self.kind {
            SegmentKind::Vertical => f64::INFINITY.copysign(self.i_end - self.i_start),
            SegmentKind::Sloped => (self.i_end - self.i_start) / (self.phi_end - self.phi_start),
        }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        match self.kind {
            SegmentKind::Vertical => self.i_end,
            SegmentKind::Sloped => self.i_start + (self.i_end - self.i_start) * (phi - self.phi_start) / (self.phi_end - self.phi_start),
        }
    }

    pub fn contains(&self, phi: f64) -> bool {
        phi >= self.phi_start && phi <= self.phi_end
    }

    pub fn label(&self) -> String {
        self.binding.label()
    }

    pub fn is_zero_inductance(&self) -> bool {
        self.kind == SegmentKind::Vertical
    }
}

/// Envelope corner with the constraints meeting there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vertex {
    pub phi_ext: f64,
    pub i_in: f64,
    pub left: (Binding, Option<i64>),
    pub right: (Binding, Option<i64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferencePattern {
    pub phi_range: (f64, f64),
    pub period: f64,
    pub v_gate: Vec<f64>,
    /// Short hash of the serialized device.
    pub digest: String,
    /// Largest branch critical current, the natural current unit.
    pub current_scale: f64,
    pub samples: Vec<PatternSample>,
    pub segments: Vec<Segment>,
    pub vertices: Vec<Vertex>,
}

impl InterferencePattern {
    /// Segment covering `phi`; at a vertex, the one starting there.
    pub fn segment_at(&self, phi: f64) -> Option<&Segment> {
        self.segments
            .iter()
            .rev()
            .find(|s| s.kind == SegmentKind::Sloped && s.contains(phi))
    }

    pub fn eval(&self, phi: f64) -> Option<f64> {
        self.segment_at(phi).map(|s| s.eval(phi))
    }

    pub fn has_zero_inductance(&self) -> bool {
        self.segments.iter().any(Segment::is_zero_inductance)
    }

    pub fn is_reentrant(&self) -> bool {
        self.segments.iter().any(|s| s.reentrant)
    }

    /// The same pattern moved by `delta` along the flux axis.
    pub fn translated(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.phi_range = (self.phi_range.0 + delta, self.phi_range.1 + delta);
        for s in &mut out.samples {
            s.phi_ext += delta;
        }
        for s in &mut out.segments {
            s.phi_start += delta;
            s.phi_end += delta;
        }
        for v in &mut out.vertices {
            v.phi_ext += delta;
        }
        out
    }
}

pub fn config_digest(config: &DeviceConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    let hash = Sha256::digest(&json);
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// `n` evenly spaced points including both ends.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|k| if k == n - 1 { stop } else { start + (stop - start) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

pub fn sweep_pattern(
    config: &DeviceConfig,
    phi_range: (f64, f64),
    n_samples: usize,
    v_gate: &[f64],
) -> Result<InterferencePattern, PatternError> {
    let solver = CriticalSolver::new(config, v_gate)?;
    sweep_with(&solver, config, phi_range, n_samples)
}

pub fn sweep_with(
    solver: &CriticalSolver,
    config: &DeviceConfig,
    phi_range: (f64, f64),
    n_samples: usize,
) -> Result<InterferencePattern, PatternError> {
    let (start, stop) = phi_range;
    if n_samples < 2 {
        return Err(PatternError::TooFewSamples(n_samples));
    }
    if !(start.is_finite() && stop.is_finite() && stop > start) {
        return Err(PatternError::BadRange { start, stop });
    }
    let samples = linspace(start, stop, n_samples)
        .into_par_iter()
        .map(|phi| {
            let cp = solver.critical_current(phi)?;
            Ok(PatternSample {
                phi_ext: phi,
                i_c: cp.i_c,
                branch: cp.label(),
                m: cp.m,
                reentrant: solver.is_reentrant(phi),
            })
        })
        .collect::<Result<Vec<_>, SolverError>>()?;

    let segments = envelope(solver, start, stop)?;
    let (segments, vertices) = join_segments(solver, segments);
    Ok(InterferencePattern {
        phi_range,
        period: solver.period(),
        v_gate: solver.v_gate().to_vec(),
        digest: config_digest(config),
        current_scale: config.current_scale(),
        samples,
        segments,
        vertices,
    })
}

// Sloped envelope pieces over [start, stop], adjacent equal pieces merged.
fn envelope(solver: &CriticalSolver, start: f64, stop: f64) -> Result<Vec<Segment>, SolverError> {
    let p = solver.period();
    let base = base_period(solver, start)?;
    let dm = solver.model().loops()[0].flux_weight.signum() as i64;
    let n_periods = ((stop - start) / p).ceil() as i64;
    let mut out: Vec<Segment> = Vec::new();
    for k in 0..n_periods.max(1) {
        for s in &base {
            let shift = k as f64 * p;
            let mut seg = s.clone();
            seg.phi_start += shift;
            seg.phi_end += shift;
            seg.m = seg.m.map(|m| m - dm * k);
            if seg.phi_start >= stop {
                continue;
            }
            if seg.phi_end > stop {
                seg.i_end = s.eval(stop - shift);
                seg.phi_end = stop;
            }
            push_merged(&mut out, seg);
        }
    }
    Ok(out)
}

fn push_merged(out: &mut Vec<Segment>, seg: Segment) {
    if let Some(last) = out.last_mut() {
        if last.constraint == seg.constraint && last.m == seg.m {
            last.phi_end = seg.phi_end;
            last.i_end = seg.i_end;
            last.reentrant |= seg.reentrant;
            return;
        }
    }
    out.push(seg);
}

fn base_period(solver: &CriticalSolver, start: f64) -> Result<Vec<Segment>, SolverError> {
    let p = solver.period();
    let end = start + p;
    let (w0, w1) = (solver.m_window(start), solver.m_window(end));
    let ms = (*w0.start()).min(*w1.start())..=(*w0.end()).max(*w1.end());

    let mut cuts = vec![start, end];
    let mut lines = Vec::new();
    for h in solver.constraints() {
        for m in ms.clone() {
            let q = solver.q(m);
            if h.is_vertical() {
                if h.b_phi != 0.0 {
                    cuts.push((h.limit - h.b - h.b_q * q) / h.b_phi);
                }
            } else {
                lines.push(h.line(q));
            }
        }
    }
    for (i, &(s1, c1)) in lines.iter().enumerate() {
        for &(s2, c2) in &lines[i + 1..] {
            if s1 != s2 {
                cuts.push((c2 - c1) / (s1 - s2));
            }
        }
    }
    cuts.retain(|x| x.is_finite() && *x >= start && *x <= end);
    cuts.sort_by(f64::total_cmp);
    let min_width = 1e-12 * p;
    cuts.dedup_by(|b, a| *b - *a <= min_width);
    if *cuts.last().unwrap() < end {
        cuts.push(end);
    } else {
        *cuts.last_mut().unwrap() = end;
    }

    let mut segs: Vec<Segment> = Vec::new();
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let mid = 0.5 * (x0 + x1);
        let (cp, idx) = solver.critical_detail(mid)?;
        let h = solver.constraints()[idx];
        let q = cp.m.map_or(0.0, |m| solver.q(m));
        let (slope, intercept) = h.line(q);
        push_merged(
            &mut segs,
            Segment {
                phi_start: x0,
                phi_end: x1,
                i_start: slope * x0 + intercept,
                i_end: slope * x1 + intercept,
                binding: cp.binding,
                m: cp.m,
                kind: SegmentKind::Sloped,
                reentrant: solver.is_reentrant(mid),
                constraint: idx,
            },
        );
    }
    Ok(segs)
}

// Insert vertical pieces at jumps and collect vertices.
fn join_segments(solver: &CriticalSolver, sloped: Vec<Segment>) -> (Vec<Segment>, Vec<Vertex>) {
    let tol = 1e-9 * solver.model().config().current_scale();
    let mut segments = Vec::with_capacity(sloped.len() + 4);
    let mut vertices = Vec::new();
    for (k, seg) in sloped.iter().enumerate() {
        if k > 0 {
            let prev = &sloped[k - 1];
            let x = seg.phi_start;
            let left = (prev.binding, prev.m);
            let right = (seg.binding, seg.m);
            if (prev.i_end - seg.i_start).abs() <= tol {
                vertices.push(Vertex { phi_ext: x, i_in: 0.5 * (prev.i_end + seg.i_start), left, right });
            } else {
                let (binding, m) = vertical_constraint_at(solver, x).unwrap_or(left);
                vertices.push(Vertex { phi_ext: x, i_in: prev.i_end, left, right: (binding, m) });
                segments.push(Segment {
                    phi_start: x,
                    phi_end: x,
                    i_start: prev.i_end,
                    i_end: seg.i_start,
                    binding,
                    m,
                    kind: SegmentKind::Vertical,
                    reentrant: prev.reentrant || seg.reentrant,
                    constraint: usize::MAX,
                });
                vertices.push(Vertex { phi_ext: x, i_in: seg.i_start, left: (binding, m), right });
            }
        }
        segments.push(seg.clone());
    }
    (segments, vertices)
}

fn vertical_constraint_at(solver: &CriticalSolver, phi: f64) -> Option<(Binding, Option<i64>)> {
    let p = solver.period();
    for h in solver.constraints().iter().filter(|h| h.is_vertical() && h.b_phi != 0.0) {
        for m in solver.m_window(phi) {
            let x = (h.limit - h.b - h.b_q * solver.q(m)) / h.b_phi;
            if (x - phi).abs() <= 1e-9 * p {
                return Some((h.binding, Some(m)));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeStats {
    pub max_ic: f64,
    pub min_ic: f64,
    pub modulation_depth: f64,
}

/// Extrema of the envelope over its first period.
pub fn envelope_stats(pattern: &InterferencePattern) -> Result<EnvelopeStats, PatternError> {
    let (start, stop) = pattern.phi_range;
    let p = pattern.period;
    if stop - start < p * (1.0 - 1e-9) {
        return Err(PatternError::ShortPattern { span: stop - start, period: p });
    }
    let end = start + p;
    let mut max_ic = f64::NEG_INFINITY;
    let mut min_ic = f64::INFINITY;
    for s in pattern.segments.iter().filter(|s| s.kind == SegmentKind::Sloped) {
        if s.phi_start > end {
            break;
        }
        let a = s.i_start;
        let b = s.eval(s.phi_end.min(end));
        max_ic = max_ic.max(a.max(b));
        min_ic = min_ic.min(a.min(b));
    }
    Ok(EnvelopeStats {
        max_ic,
        min_ic,
        modulation_depth: max_ic - min_ic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMap {
    pub phi_ext: Vec<f64>,
    pub i_in: Vec<f64>,
    /// Row-major, one row per `i_in` value.
    pub cells: Vec<CellState>,
    /// Normal-state resistance used for display.
    pub r_n: Option<f64>,
    pub v_gate: Vec<f64>,
}

impl RegionMap {
    pub fn state(&self, row: usize, col: usize) -> CellState {
        self.cells[row * self.phi_ext.len() + col]
    }

    /// Display resistance: 0 when superconducting, `R_n` otherwise.
    pub fn resistance(&self, row: usize, col: usize) -> Option<f64> {
        let r_n = self.r_n?;
        Some(match self.state(row, col) {
            CellState::Superconducting => 0.0,
            CellState::Normal | CellState::GateLimited => r_n,
        })
    }
}

fn check_grid(grid: &[f64], axis: &'static str) -> Result<(), PatternError> {
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PatternError::Grid { axis });
    }
    Ok(())
}

pub fn region_map(
    config: &DeviceConfig,
    phi_grid: &[f64],
    i_in_grid: &[f64],
    v_gate: &[f64],
    r_n: Option<f64>,
) -> Result<RegionMap, PatternError> {
    check_grid(phi_grid, "phi_ext")?;
    check_grid(i_in_grid, "i_in")?;
    let solver = CriticalSolver::new(config, v_gate)?;
    let cells = i_in_grid
        .par_iter()
        .flat_map_iter(|&i| phi_grid.iter().map(move |&phi| (phi, i)))
        .map(|(phi, i)| solver.classify(phi, i))
        .collect();
    Ok(RegionMap {
        phi_ext: phi_grid.to_vec(),
        i_in: i_in_grid.to_vec(),
        cells,
        r_n,
        v_gate: v_gate.to_vec(),
    })
}
