//! Closed-form critical lines of a gated SQUID and where they bound the
//! superconducting region.

use gated_squid::solver::{critical_current, CriticalLine, GatedSquid};
use gated_squid::{DeviceConfig, GateSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]).with_gate(GateSpec::narrow(1, 1.0, 0.57, 5.0, 0.4));
    let dev = GatedSquid::from_config(&c)?;
    let v_g = 1.5;
    for e in dev.critical_lines(v_g, -1..=1).entries {
        match e.line {
            CriticalLine::Sloped { slope, intercept } => {
                println!("branch {} m={:+}: I = {slope:.4} Φ + {intercept:.4}", e.branch, e.m)
            }
            CriticalLine::Vertical { phi } => println!("branch {} m={:+}: Φ = {phi:.4}", e.branch, e.m),
        }
    }
    println!("envelope max {:.4}, depth {:.4}", dev.envelope_max(v_g), dev.modulation_depth());
    for phi in [0.0, 0.25, 0.5, 0.75] {
        let cp = critical_current(&c, phi, &[v_g])?;
        println!("Φ = {phi:.2}: I_c = {:.4} set by {}", cp.i_c, cp.label());
    }
    Ok(())
}
