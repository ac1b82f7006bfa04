//! CSV tables and versioned JSON reports.
//!
//! Floats are written in Rust's shortest round-trip form, so identical
//! inputs give byte-identical files.

use serde::Serialize;

use crate::oracle::ComparisonReport;
use crate::pattern::{InterferencePattern, RegionMap};
use crate::solver::CellState;

pub const SCHEMA_VERSION: u32 = 1;

fn table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `phi_ext,i_c,branch,m`, one row per sample.
pub fn pattern_csv(p: &InterferencePattern) -> String {
    table(
        &["phi_ext", "i_c", "branch", "m"],
        p.samples
            .iter()
            .map(|s| vec![s.phi_ext.to_string(), s.i_c.to_string(), s.branch.clone(), opt(s.m)]),
    )
}

/// Envelope corners with the constraints meeting there.
pub fn vertices_csv(p: &InterferencePattern) -> String {
    table(
        &["phi_ext", "i_in", "left", "left_m", "right", "right_m"],
        p.vertices.iter().map(|v| {
            vec![
                v.phi_ext.to_string(),
                v.i_in.to_string(),
                v.left.0.label(),
                opt(v.left.1),
                v.right.0.label(),
                opt(v.right.1),
            ]
        }),
    )
}

pub fn cell_name(s: CellState) -> &'static str {
    match s {
        CellState::Superconducting => "superconducting",
        CellState::Normal => "normal",
        CellState::GateLimited => "gate_limited",
    }
}

/// `phi_ext,i_in,state[,resistance]`, rows ordered by `i_in` then flux.
pub fn map_csv(m: &RegionMap) -> String {
    let mut header = vec!["phi_ext", "i_in", "state"];
    if m.r_n.is_some() {
        header.push("resistance");
    }
    let rows = (0..m.i_in.len()).flat_map(|r| {
        (0..m.phi_ext.len()).map(move |c| {
            let mut row = vec![m.phi_ext[c].to_string(), m.i_in[r].to_string(), cell_name(m.state(r, c)).to_string()];
            if let Some(res) = m.resistance(r, c) {
                row.push(res.to_string());
            }
            row
        })
    });
    table(&header, rows)
}

pub fn comparison_csv(r: &ComparisonReport) -> String {
    table(
        &["phi_ext", "exact", "linear", "error"],
        r.samples
            .iter()
            .map(|s| vec![s.phi_ext.to_string(), s.exact.to_string(), s.linear.to_string(), s.error.to_string()]),
    )
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with `schema_version` and `kind` keys added.
pub fn json_report<T: Serialize>(kind: &str, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        kind,
        body,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::DeviceConfig;
    use crate::pattern::sweep_pattern;

    #[test]
    fn sweep_header_and_rows() {
        let c = DeviceConfig::normalized_ring(&[1.0; 3], &[1.0; 3]);
        let p = sweep_pattern(&c, (0.0, 1.0), 5, &[]).unwrap();
        let csv = pattern_csv(&p);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("phi_ext,i_c,branch,m"));
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn json_has_version() {
        #[derive(Serialize)]
        struct B {
            x: f64,
        }
        let s = json_report("test", &B { x: 1.5 });
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["kind"], "test");
        assert_eq!(v["x"], 1.5);
    }
}
