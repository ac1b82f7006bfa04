//! JSON device files.
//!
//! ```json
//! {
//!   "units": "si",
//!   "theta0": "auto",
//!   "branches": [
//!     { "inductance": "10pH", "critical_current": "20uA" },
//!     { "inductance": "10pH", "critical_current": "20uA" },
//!     { "inductance": "20pH", "critical_current": "20uA" }
//!   ],
//!   "gates": [
//!     { "node": 1, "r_gate": "1kOhm", "r_out": "570Ohm",
//!       "gate_threshold": "50uA", "coupling_alpha": 0.8, "mode": "narrow" }
//!   ]
//! }
//! ```
//!
//! Every number may be written as an SI-suffixed string. `phi0` defaults to
//! the SI flux quantum (1 in normalized units); `mode` defaults to `narrow`
//! when `coupling_alpha > 0`, else `wide`; `topology` defaults to a ring.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{BranchSpec, Cpr, DeviceConfig, GateMode, GateSpec, Theta0Policy, Topology, UnitsMode, ValidationReport};
use crate::units::{self, PHI0_SI};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: invalid device\n{report}")]
    Invalid { path: String, report: ValidationReport },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    #[serde(with = "units::quantity")]
    inductance: f64,
    #[serde(with = "units::quantity")]
    critical_current: f64,
    #[serde(default)]
    cpr: Cpr,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateFile {
    node: usize,
    #[serde(with = "units::quantity")]
    r_gate: f64,
    #[serde(with = "units::quantity")]
    r_out: f64,
    #[serde(with = "units::quantity")]
    gate_threshold: f64,
    #[serde(default, with = "units::quantity")]
    coupling_alpha: f64,
    #[serde(default, with = "units::opt_quantity", skip_serializing_if = "Option::is_none")]
    width_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<GateMode>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    units: UnitsMode,
    #[serde(default = "default_theta0")]
    theta0: Theta0Policy,
    #[serde(default, with = "units::opt_quantity", skip_serializing_if = "Option::is_none")]
    phi0: Option<f64>,
    branches: Vec<BranchFile>,
    #[serde(default)]
    gates: Vec<GateFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    topology: Option<Topology>,
}

fn default_theta0() -> Theta0Policy {
    Theta0Policy::Auto
}

impl From<DeviceFile> for DeviceConfig {
    fn from(f: DeviceFile) -> Self {
        let phi0 = f.phi0.unwrap_or(match f.units {
            UnitsMode::Si => PHI0_SI,
            UnitsMode::Normalized => 1.0,
        });
        DeviceConfig {
            branches: f
                .branches
                .into_iter()
                .enumerate()
                .map(|(k, b)| BranchSpec {
                    index: b.index.unwrap_or(k + 1),
                    inductance: b.inductance,
                    critical_current: b.critical_current,
                    cpr: b.cpr,
                })
                .collect(),
            gates: f
                .gates
                .into_iter()
                .map(|g| GateSpec {
                    node: g.node,
                    r_gate: g.r_gate,
                    r_out: g.r_out,
                    gate_threshold: g.gate_threshold,
                    coupling_alpha: g.coupling_alpha,
                    width_ratio: g.width_ratio,
                    mode: g.mode.unwrap_or(if g.coupling_alpha > 0.0 { GateMode::Narrow } else { GateMode::Wide }),
                })
                .collect(),
            topology: f.topology,
            theta0: f.theta0,
            phi0,
            units: f.units,
        }
    }
}

impl From<&DeviceConfig> for DeviceFile {
    fn from(c: &DeviceConfig) -> Self {
        DeviceFile {
            units: c.units,
            theta0: c.theta0,
            phi0: Some(c.phi0),
            branches: c
                .branches
                .iter()
                .map(|b| BranchFile {
                    index: Some(b.index),
                    inductance: b.inductance,
                    critical_current: b.critical_current,
                    cpr: b.cpr,
                })
                .collect(),
            gates: c
                .gates
                .iter()
                .map(|g| GateFile {
                    node: g.node,
                    r_gate: g.r_gate,
                    r_out: g.r_out,
                    gate_threshold: g.gate_threshold,
                    coupling_alpha: g.coupling_alpha,
                    width_ratio: g.width_ratio,
                    mode: Some(g.mode),
                })
                .collect(),
            topology: c.topology.clone(),
        }
    }
}

/// Parse and validate a device description. `origin` names the source in
/// diagnostics.
pub fn parse_config(text: &str, origin: &str) -> Result<DeviceConfig, ConfigError> {
    let file: DeviceFile = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let config = DeviceConfig::from(file);
    config.validate().map_err(|report| ConfigError::Invalid {
        path: origin.to_string(),
        report,
    })?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<DeviceConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

pub fn config_to_json(config: &DeviceConfig) -> String {
    let mut s = serde_json::to_string_pretty(&DeviceFile::from(config)).expect("device serializes");
    s.push('\n');
    s
}

pub fn save_config(config: &DeviceConfig, path: &Path) -> std::io::Result<()> {
    fs::write(path, config_to_json(config))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
      "units": "si",
      "theta0": "auto",
      "branches": [
        { "inductance": "10pH", "critical_current": "20uA" },
        { "inductance": "10pH", "critical_current": "20uA" },
        { "inductance": "20pH", "critical_current": 2e-5 }
      ],
      "gates": [
        { "node": 1, "r_gate": "1kOhm", "r_out": "570 Ohm", "gate_threshold": "50uA", "coupling_alpha": 0.8 }
      ]
    }"#;

    #[test]
    fn parses_suffixed_numbers() {
        let c = parse_config(EXAMPLE, "example").unwrap();
        assert_eq!(c.branches.len(), 3);
        assert!((c.branches[2].inductance - 20e-12).abs() < 1e-24);
        assert_eq!(c.gates[0].r_gate, 1e3);
        assert_eq!(c.gates[0].mode, GateMode::Narrow);
        assert_eq!(c.theta0, Theta0Policy::Auto);
        assert_eq!(c.phi0, PHI0_SI);
    }

    #[test]
    fn explicit_theta0_number() {
        let text = EXAMPLE.replace("\"auto\"", "0.25");
        assert_eq!(parse_config(&text, "x").unwrap().theta0, Theta0Policy::Explicit(0.25));
    }

    #[test]
    fn round_trip() {
        let c = parse_config(EXAMPLE, "example").unwrap();
        let back = parse_config(&config_to_json(&c), "again").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_config("{\n  \"units\": \"si\",\n  \"branches\": [1,]\n}", "broken.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("broken.json:3:"), "{msg}");
    }

    #[test]
    fn invalid_field_is_named() {
        let text = EXAMPLE.replacen("\"10pH\"", "\"-10pH\"", 1);
        let msg = parse_config(&text, "neg.json").unwrap_err().to_string();
        assert!(msg.contains("branches[1].inductance"), "{msg}");
    }

    #[test]
    fn bad_suffix_reported() {
        let text = EXAMPLE.replacen("\"10pH\"", "\"10 parsecs\"", 1);
        let msg = parse_config(&text, "bad.json").unwrap_err().to_string();
        assert!(msg.contains("cannot parse quantity"), "{msg}");
    }
}
