//! Minimal self-contained SVG plots. Coordinates are printed with fixed
//! precision, so the same data always gives the same file.

use std::fmt::Write as _;
use std::path::Path;

use crate::oracle::{ComparisonReport, StabilityRegion};
use crate::pattern::{InterferencePattern, RegionMap};
use crate::solver::CellState;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

const LOBE_COLORS: [&str; 6] = ["#8dd3c7", "#fdb462", "#bebada", "#fb8072", "#80b1d3", "#b3de69"];

/// Linear map from data to pixel coordinates for one panel.
#[derive(Clone, Copy)]
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    px: (f64, f64),
    py: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), top: f64, bottom: f64) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Frame {
            x: pad(x),
            y: pad(y),
            px: (LEFT, W - RIGHT),
            py: (bottom, top),
        }
    }

    fn sx(&self, x: f64) -> f64 {
        self.px.0 + (x - self.x.0) / (self.x.1 - self.x.0) * (self.px.1 - self.px.0)
    }

    fn sy(&self, y: f64) -> f64 {
        self.py.0 + (y - self.y.0) / (self.y.1 - self.y.0) * (self.py.1 - self.py.0)
    }
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn with_margin((lo, hi): (f64, f64)) -> (f64, f64) {
    let d = 0.05 * (hi - lo).abs().max(1e-300);
    (lo - d, hi + d)
}

fn header(out: &mut String, height: f64) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{W}" height="{height}" fill="white"/>"#).unwrap();
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1) = f.px;
    let (yb, yt) = f.py;
    writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{yt:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        yb - yt
    )
    .unwrap();
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, py) = (f.sx(xv), f.sy(yv));
        writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{yb:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            yb + 4.0,
            yb + 16.0,
            tick(xv)
        )
        .unwrap();
        writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick(yv)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        0.5 * (x0 + x1),
        yb + 34.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{ylabel}</text>"#,
        0.5 * (yb + yt),
        0.5 * (yb + yt)
    )
    .unwrap();
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-2..1e4).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], stroke: &str, extra: &str) {
    let mut s = String::new();
    for &(x, y) in pts {
        write!(s, "{:.3},{:.3} ", f.sx(x), f.sy(y)).unwrap();
    }
    writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{extra}/>"#,
        s.trim_end()
    )
    .unwrap();
}

/// Envelope corners in order, flux in units of the period.
fn pattern_points(p: &InterferencePattern) -> Vec<(f64, f64)> {
    if p.segments.is_empty() {
        return p.samples.iter().map(|s| (s.phi_ext / p.period, s.i_c)).collect();
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(p.segments.len() + 1);
    for s in &p.segments {
        let a = (s.phi_start / p.period, s.i_start);
        if pts.last() != Some(&a) {
            pts.push(a);
        }
        pts.push((s.phi_end / p.period, s.i_end));
    }
    pts
}

/// Critical-current envelope drawn as a polyline through its corners.
pub fn pattern_svg(pattern: &InterferencePattern) -> String {
    let pts = pattern_points(pattern);
    let f = Frame::new(
        (pattern.phi_range.0 / pattern.period, pattern.phi_range.1 / pattern.period),
        with_margin(bounds(pts.iter().map(|p| p.1))),
        TOP,
        H - BOTTOM,
    );
    let mut out = String::new();
    header(&mut out, H);
    axes(&mut out, &f, "Φ_ext/Φ₀", "I_in");
    polyline(&mut out, &f, &pts, "#1f77b4", "");
    out.push_str("</svg>\n");
    out
}

fn cell_color(s: CellState) -> &'static str {
    match s {
        CellState::Superconducting => "#2b83ba",
        CellState::Normal => "#f0f0f0",
        CellState::GateLimited => "#fdae61",
    }
}

/// Raster of the superconducting, normal and gate-limited regions.
pub fn map_svg(map: &RegionMap, phi0: f64) -> String {
    let xs: Vec<f64> = map.phi_ext.iter().map(|x| x / phi0).collect();
    let edges = |v: &[f64]| -> Vec<f64> {
        let n = v.len();
        if n == 1 {
            return vec![v[0] - 0.5, v[0] + 0.5];
        }
        let mut e = Vec::with_capacity(n + 1);
        e.push(v[0] - 0.5 * (v[1] - v[0]));
        for w in v.windows(2) {
            e.push(0.5 * (w[0] + w[1]));
        }
        e.push(v[n - 1] + 0.5 * (v[n - 1] - v[n - 2]));
        e
    };
    let ex = edges(&xs);
    let ey = edges(&map.i_in);
    let f = Frame::new(
        (ex[0], ex[ex.len() - 1]),
        (ey[0], ey[ey.len() - 1]),
        TOP + 24.0,
        H - BOTTOM,
    );
    let mut out = String::new();
    header(&mut out, H);
    for r in 0..map.i_in.len() {
        for c in 0..xs.len() {
            let (x0, x1) = (f.sx(ex[c]), f.sx(ex[c + 1]));
            let (y0, y1) = (f.sy(ey[r + 1]), f.sy(ey[r]));
            writeln!(
                out,
                r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                x1 - x0,
                y1 - y0,
                cell_color(map.state(r, c))
            )
            .unwrap();
        }
    }
    axes(&mut out, &f, "Φ_ext/Φ₀", "I_in");
    let states = [CellState::Superconducting, CellState::Normal, CellState::GateLimited];
    for (k, s) in states.into_iter().enumerate() {
        let x = LEFT + 170.0 * k as f64;
        writeln!(
            out,
            r#"<rect x="{x:.1}" y="{TOP:.1}" width="12" height="12" fill="{}" stroke="black"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            cell_color(s),
            x + 16.0,
            TOP + 11.0,
            super::report::cell_name(s)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Exact and linearized curves, stability lobes shaded underneath, and the
/// residual in a lower panel.
pub fn oracle_svg(report: &ComparisonReport, phi0: f64, lobes: &[StabilityRegion]) -> String {
    let height = H + 160.0;
    let xs: Vec<f64> = report.samples.iter().map(|s| s.phi_ext / phi0).collect();
    let x_range = bounds(xs.iter().copied());
    let lobe_y = lobes
        .iter()
        .flat_map(|l| l.bounds.iter().flatten().flat_map(|&(a, b)| [a, b]));
    let y_range = with_margin(bounds(
        report
            .samples
            .iter()
            .flat_map(|s| [s.exact, s.linear])
            .chain(lobe_y),
    ));
    let top = Frame::new(x_range, y_range, TOP, H - BOTTOM);
    let err_range = with_margin(bounds(report.samples.iter().map(|s| s.linear - s.exact).chain([0.0])));
    let bottom = Frame::new(x_range, err_range, H + 10.0, height - BOTTOM);

    let mut out = String::new();
    header(&mut out, height);
    for (k, lobe) in lobes.iter().enumerate() {
        // one closed polygon per contiguous run of flux points
        let mut runs: Vec<Vec<(f64, (f64, f64))>> = Vec::new();
        let mut open = false;
        for (phi, b) in lobe.phi_ext.iter().zip(&lobe.bounds) {
            match b {
                Some(b) => {
                    if !open {
                        runs.push(Vec::new());
                        open = true;
                    }
                    runs.last_mut().unwrap().push((phi / phi0, *b));
                }
                None => open = false,
            }
        }
        let color = LOBE_COLORS[k % LOBE_COLORS.len()];
        for run in runs {
            let mut s = String::new();
            for &(x, (_, hi)) in &run {
                write!(s, "{:.3},{:.3} ", top.sx(x), top.sy(hi)).unwrap();
            }
            for &(x, (lo, _)) in run.iter().rev() {
                write!(s, "{:.3},{:.3} ", top.sx(x), top.sy(lo)).unwrap();
            }
            writeln!(
                out,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.45" stroke="none"><title>m = {}</title></polygon>"#,
                s.trim_end(),
                lobe.m
            )
            .unwrap();
        }
    }
    axes(&mut out, &top, "Φ_ext/Φ₀", "I_in");
    let exact: Vec<(f64, f64)> = report.samples.iter().map(|s| (s.phi_ext / phi0, s.exact)).collect();
    let linear: Vec<(f64, f64)> = report.samples.iter().map(|s| (s.phi_ext / phi0, s.linear)).collect();
    polyline(&mut out, &top, &exact, "black", "");
    polyline(&mut out, &top, &linear, "#d62728", r#" stroke-dasharray="6 3""#);
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}">β_L = {}, {}: exact (black), linearized (red, dashed)</text>"#,
        LEFT + 8.0,
        TOP + 14.0,
        tick(report.beta_l.0),
        tick(report.beta_l.1)
    )
    .unwrap();
    axes(&mut out, &bottom, "Φ_ext/Φ₀", "I_lin − I_exact");
    let resid: Vec<(f64, f64)> = report.samples.iter().map(|s| (s.phi_ext / phi0, s.linear - s.exact)).collect();
    polyline(&mut out, &bottom, &resid, "#2ca02c", "");
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, svg: &str) -> std::io::Result<()> {
    std::fs::write(path, svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::DeviceConfig;
    use crate::pattern::{linspace, region_map, sweep_pattern};

    #[test]
    fn pattern_plot_is_deterministic_and_labeled() {
        let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]);
        let p = sweep_pattern(&c, (0.0, 2.0), 101, &[]).unwrap();
        let a = pattern_svg(&p);
        assert_eq!(a, pattern_svg(&p));
        assert!(a.contains("Φ_ext/Φ₀") && a.contains("I_in") && a.contains("<polyline"));
    }

    #[test]
    fn map_plot_has_legend() {
        let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]);
        let m = region_map(&c, &linspace(0.0, 1.0, 5), &linspace(-3.0, 3.0, 4), &[], None).unwrap();
        let s = map_svg(&m, 1.0);
        assert_eq!(s.matches("<rect").count(), 1 + 1 + 20 + 3);
        for name in ["superconducting", "normal", "gate_limited"] {
            assert!(s.contains(name));
        }
    }
}
