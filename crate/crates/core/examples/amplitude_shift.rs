//! Narrow gates suppress the envelope as well as shifting it.

use gated_squid::analysis::amplitude_shift_predicted;
use gated_squid::solver::GatedSquid;
use gated_squid::{DeviceConfig, GateSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for alpha in [0.0, 0.2, 0.4] {
        let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3])
            .with_gate(GateSpec::narrow(1, 1.0, 0.57, 5.0, alpha));
        let dev = GatedSquid::from_config(&c)?;
        let (v0, v1) = (0.5, 1.5);
        let drop = dev.envelope_max(v0) - dev.envelope_max(v1);
        let predicted = amplitude_shift_predicted(&c, v1)? - amplitude_shift_predicted(&c, v0)?;
        println!("alpha = {alpha:.1}: envelope max drops by {drop:.6}, predicted {predicted:.6}");
    }
    Ok(())
}
