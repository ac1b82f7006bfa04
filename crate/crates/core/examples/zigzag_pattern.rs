//! Ungated three-branch ring: sweep two flux periods and print the envelope
//! corners and segment slopes.

use gated_squid::pattern::{envelope_stats, sweep_pattern};
use gated_squid::DeviceConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ring = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]);
    let p = sweep_pattern(&ring, (0.0, 2.0), 801, &[])?;
    let stats = envelope_stats(&p)?;
    println!(
        "max I_c = {:.4}, min I_c = {:.4}, depth = {:.4}",
        stats.max_ic, stats.min_ic, stats.modulation_depth
    );
    println!("{:>8} {:>8} {:>8}  binding", "phi", "i_c", "slope");
    for s in &p.segments {
        println!(
            "{:8.4} {:8.4} {:8.4}  branch {} (m = {:?})",
            s.phi_start,
            s.i_start,
            s.slope(),
            s.label(),
            s.m
        );
    }
    Ok(())
}
