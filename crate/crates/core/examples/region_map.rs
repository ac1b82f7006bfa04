//! Classify a flux/bias grid and write CSV and SVG next to the working
//! directory.

use gated_squid::io::{report, svg};
use gated_squid::pattern::{linspace, region_map};
use gated_squid::solver::CellState;
use gated_squid::{DeviceConfig, GateSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]).with_gate(GateSpec::narrow(1, 1.0, 0.57, 1.2, 0.4));
    let map = region_map(&c, &linspace(0.0, 2.0, 121), &linspace(-2.5, 2.5, 81), &[1.5], Some(10.0))?;
    let count = |s| map.cells.iter().filter(|&&c| c == s).count();
    println!(
        "superconducting {}, normal {}, gate-limited {}",
        count(CellState::Superconducting),
        count(CellState::Normal),
        count(CellState::GateLimited)
    );
    std::fs::write("region_map.csv", report::map_csv(&map))?;
    svg::write_svg("region_map.svg".as_ref(), &svg::map_svg(&map, c.phi0))?;
    println!("wrote region_map.csv and region_map.svg");
    Ok(())
}
