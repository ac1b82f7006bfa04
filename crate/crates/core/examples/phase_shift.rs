//! Gate voltage translates the pattern along flux. Compares the measured
//! translation with `L2 V_g / (R_g + R_out)`.

use gated_squid::analysis::{phase_shift_measured, phase_shift_predicted};
use gated_squid::pattern::sweep_pattern;
use gated_squid::{DeviceConfig, GateSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = DeviceConfig::gated_squid(
        [100e-12, 100e-12, 200e-12],
        [20e-6; 3],
        GateSpec::wide(1, 1e3, 570.0, 100e-6),
    );
    let range = (0.0, 3.0 * c.phi0);
    let reference = sweep_pattern(&c, range, 2001, &[0.0])?;
    for v_g in [1e-3, 2e-3, 5e-3] {
        let p = sweep_pattern(&c, range, 2001, &[v_g])?;
        let measured = phase_shift_measured(&reference, &p)?;
        let predicted = phase_shift_predicted(&c, v_g)?;
        println!(
            "V_g = {:.0} mV: predicted {:.5} Φ0 ({:+.4} rad), measured {:.5} Φ0",
            v_g * 1e3,
            predicted.flux / c.phi0,
            predicted.radians,
            measured / c.phi0
        );
    }
    Ok(())
}
