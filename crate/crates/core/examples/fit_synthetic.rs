//! Recover L2, α and Θ₀ from a noisy synthetic pattern.

use gated_squid::fit::{fit_parameters, FitCurve, FitOptions, FitParam, ParamBound};
use gated_squid::pattern::sweep_pattern;
use gated_squid::{DeviceConfig, GateSpec, Theta0Policy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3])
        .with_gate(GateSpec::narrow(1, 1.0, 0.57, 5.0, 0.4))
        .with_theta0(Theta0Policy::Explicit(1.0));
    let p = sweep_pattern(&truth, (0.0, 2.0), 200, &[1.5])?;
    // deterministic 1% ripple standing in for measurement noise
    let data = FitCurve {
        v_gate: vec![1.5],
        phi_ext: p.samples.iter().map(|s| s.phi_ext).collect(),
        i_c: p
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| s.i_c * (1.0 + 0.01 * (k as f64 * 1.7).sin()))
            .collect(),
    };
    let mut template = truth.clone();
    FitParam::Inductance(2).set(&mut template, 1.3);
    FitParam::Alpha.set(&mut template, 0.2);
    FitParam::Theta0.set(&mut template, 0.5);
    let free = [
        ParamBound::new(FitParam::Inductance(2), 0.5, 2.0),
        ParamBound::new(FitParam::Alpha, 0.0, 0.6),
        ParamBound::new(FitParam::Theta0, 0.0, 2.0),
    ];
    let r = fit_parameters(&[data], &template, &free, &FitOptions::default())?;
    for v in &r.params {
        println!("{:>6} = {:.4}  (true {:.4})", v.param.to_string(), v.value, v.param.get(&truth).unwrap());
    }
    println!("rms = {:.3e}, {} iterations, best start {}", r.rms, r.iterations, r.best_start);
    Ok(())
}
