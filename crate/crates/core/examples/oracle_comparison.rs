//! Exact two-junction loop against the linearized ring for growing β_L.

use gated_squid::io::svg;
use gated_squid::oracle::{compare_linearized, stability_region, TwoJunctionLoop};
use gated_squid::pattern::linspace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phis = linspace(0.0, 1.0, 41);
    for beta in [2.0, 5.0, 20.0, 100.0] {
        let r = compare_linearized(&TwoJunctionLoop::symmetric(beta), &phis)?;
        println!("β_L = {beta:>5}: max error {:.4}, mean {:.4}", r.max_error, r.mean_error);
    }
    let lp = TwoJunctionLoop::symmetric(2.0);
    let grid = linspace(-0.5, 1.5, 161);
    let r = compare_linearized(&lp, &grid)?;
    let lobes = (-1..=2)
        .map(|m| stability_region(&lp, m, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    svg::write_svg("oracle_beta2.svg".as_ref(), &svg::oracle_svg(&r, lp.phi0, &lobes))?;
    println!("wrote oracle_beta2.svg");
    Ok(())
}
