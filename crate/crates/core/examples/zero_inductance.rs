//! At the coupling α* one envelope segment turns vertical (zero effective
//! inductance); above it the envelope becomes re-entrant.

use gated_squid::analysis::{alpha_star, effective_inductance};
use gated_squid::pattern::sweep_pattern;
use gated_squid::{DeviceConfig, GateSpec};

fn device(alpha: f64) -> DeviceConfig {
    DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]).with_gate(GateSpec::narrow(1, 1.0, 0.57, 5.0, alpha))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = alpha_star(&device(0.0))?;
    println!("alpha* = {:.10} (quoted for the measured device: {})", a.value, a.measured_estimate);
    for alpha in [0.4, a.value, 0.8] {
        let p = sweep_pattern(&device(alpha), (0.0, 2.0), 801, &[1.3])?;
        println!(
            "alpha = {alpha:.4}: zero-inductance segment {}, re-entrant {}",
            p.has_zero_inductance(),
            p.is_reentrant()
        );
        if let Some(s) = p.segments.iter().find(|s| s.is_zero_inductance()) {
            let l = effective_inductance(&p, s.phi_start)?;
            println!("  vertical at Φ = {:.4}: {:?}", s.phi_start, l);
        }
    }
    Ok(())
}
