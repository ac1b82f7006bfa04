//! Exit criteria for the library, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed on
//! each `cargo test`. Exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use gated_squid::analysis::{alpha_star, amplitude_shift_predicted, phase_shift_measured, phase_shift_predicted, wrap_half_period};
use gated_squid::cli;
use gated_squid::fit::{fit_parameters, FitCurve, FitOptions, FitParam, ParamBound};
use gated_squid::io::config::load_config;
use gated_squid::oracle::{compare_linearized, exact_critical_current, stability_region, TwoJunctionLoop};
use gated_squid::pattern::{linspace, sweep_pattern, SegmentKind};
use gated_squid::solver::{critical_current, critical_lines, internal_currents_closed, internal_currents_generic, CriticalLine, GatedSquid};
use gated_squid::{DeviceConfig, Drive, GateSpec, Theta0Policy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    if elapsed.as_secs_f64() > limit_s {
        return Err(format!("{what} took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64()));
    }
    Ok(())
}

fn random_device(rng: &mut ChaCha8Rng, gate: impl Fn(f64, f64, f64) -> GateSpec) -> DeviceConfig {
    let l: Vec<f64> = (0..3).map(|_| rng.random_range(0.3..3.0)).collect();
    let ic: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..2.0)).collect();
    let r_g = rng.random_range(0.5..2.0);
    let r_out = rng.random_range(0.2..1.5);
    let i_g = rng.random_range(1.0..10.0);
    DeviceConfig::normalized_ring(&l, &ic).with_gate(gate(r_g, r_out, i_g))
}

fn reduction_identity() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let wide = random_device(&mut rng, |rg, ro, ig| GateSpec::wide(1, rg, ro, ig));
        let mut narrow = wide.clone();
        let g = wide.gates[0].clone();
        narrow.gates[0] = GateSpec::narrow(1, g.r_gate, g.r_out, g.gate_threshold, 0.0);
        let v_g = rng.random_range(-2.0..2.0);
        let a = critical_lines(&wide, v_g, -2..=2).map_err(|e| e.to_string())?;
        let b = critical_lines(&narrow, v_g, -2..=2).map_err(|e| e.to_string())?;
        for (x, y) in a.entries.iter().zip(&b.entries) {
            match (x.line, y.line) {
                (CriticalLine::Sloped { slope: s1, intercept: c1 }, CriticalLine::Sloped { slope: s2, intercept: c2 }) => {
                    worst = worst.max(rel(s1, s2, s1.abs())).max(rel(c1, c2, c1.abs().max(1e-300)));
                }
                (CriticalLine::Vertical { phi: p1 }, CriticalLine::Vertical { phi: p2 }) => {
                    worst = worst.max(rel(p1, p2, p1.abs().max(1.0)));
                }
                _ => return Err(format!("line kinds differ for branch {} m {}", x.branch, x.m)),
            }
        }
    }
    within(t.elapsed(), 1.0, "100 configs")?;
    if worst <= 1e-12 {
        Ok(format!("max coefficient error {worst:.1e} in {:.0?}", t.elapsed()))
    } else {
        Err(format!("max coefficient error {worst:.1e} > 1e-12"))
    }
}

fn generic_matches_closed_form() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let alpha = rng.random_range(0.0..0.9);
        let c = random_device(&mut rng, |rg, ro, ig| GateSpec::narrow(1, rg, ro, ig, alpha))
            .with_theta0(Theta0Policy::Explicit(rng.random_range(-3.0..3.0)));
        let d = Drive::new(rng.random_range(-3.0..3.0), &[rng.random_range(-3.0..3.0)], rng.random_range(-2.0..2.0));
        let m = rng.random_range(-3..=3);
        let a = internal_currents_closed(&c, &d, m).map_err(|e| e.to_string())?;
        let b = internal_currents_generic(&c, &d, &[m]).map_err(|e| e.to_string())?;
        let scale = a.currents.iter().fold(1e-300_f64, |s, x| s.max(x.abs()));
        for (x, y) in a.currents.iter().zip(&b.currents) {
            worst = worst.max(rel(*x, *y, scale));
        }
    }
    within(t.elapsed(), 5.0, "1000 configs")?;
    if worst <= 1e-10 {
        Ok(format!("max relative deviation {worst:.1e} in {:.0?}", t.elapsed()))
    } else {
        Err(format!("max relative deviation {worst:.1e} > 1e-10"))
    }
}

fn periodicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let alpha = rng.random_range(0.0..0.5);
        let c = random_device(&mut rng, |rg, ro, ig| GateSpec::narrow(1, rg, ro, ig, alpha));
        let v = [rng.random_range(-1.0..1.0)];
        for phi in linspace(-1.0, 1.0, 100) {
            let a = critical_current(&c, phi, &v).map_err(|e| e.to_string())?.i_c;
            let b = critical_current(&c, phi + c.phi0, &v).map_err(|e| e.to_string())?.i_c;
            worst = worst.max(rel(a, b, a.abs().max(c.current_scale() * 1e-12)));
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max relative deviation {worst:.1e}"))
    } else {
        Err(format!("max relative deviation {worst:.1e} > 1e-10"))
    }
}

fn example_config() -> Result<DeviceConfig, String> {
    load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/example.json").as_ref()).map_err(|e| e.to_string())
}

fn phase_shift_law() -> Outcome {
    let c = example_config()?;
    let range = (0.0, 3.0 * c.phi0);
    let p0 = sweep_pattern(&c, range, 3001, &[0.0]).map_err(|e| e.to_string())?;
    let p5 = sweep_pattern(&c, range, 3001, &[5e-3]).map_err(|e| e.to_string())?;
    let measured = phase_shift_measured(&p0, &p5).map_err(|e| e.to_string())?;
    let predicted = phase_shift_predicted(&c, 5e-3).map_err(|e| e.to_string())?.flux;
    let err = wrap_half_period(measured - predicted, c.phi0).abs() / c.phi0;
    let detail = format!(
        "predicted {:.5} Φ0, measured {:.5} Φ0, |diff| {err:.1e} Φ0",
        predicted / c.phi0,
        measured / c.phi0
    );
    if err <= 0.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn slope_law() -> Outcome {
    // plain two-junction SQUID with equal arms
    let c = DeviceConfig::normalized_ring(&[5.0, 5.0], &[1.0; 2]);
    let p = sweep_pattern(&c, (0.0, 2.0), 801, &[]).map_err(|e| e.to_string())?;
    let target = 1.0 / c.total_inductance();
    let slopes: Vec<f64> = p
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Sloped)
        .map(|s| s.slope().abs())
        .collect();
    let bad: Vec<f64> = slopes.iter().copied().filter(|s| rel(*s, target, target) > 1e-3).collect();
    let mut distinct: Vec<f64> = slopes.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let detail = format!("target 1/ΣL = {target:.4}, segment slope magnitudes {distinct:.4?}");
    if bad.is_empty() && !slopes.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_convergence() -> Outcome {
    let t = Instant::now();
    let phis = linspace(0.0, 1.0, 41);
    let mut errs = Vec::new();
    for beta in [5.0, 20.0, 100.0] {
        let r = compare_linearized(&TwoJunctionLoop::symmetric(beta), &phis).map_err(|e| e.to_string())?;
        errs.push(r.max_error);
    }
    within(t.elapsed(), 60.0, "oracle comparison")?;
    let detail = format!(
        "max error β5 {:.4}, β20 {:.4}, β100 {:.4} in {:.1?}",
        errs[0],
        errs[1],
        errs[2],
        t.elapsed()
    );
    if errs[2] < errs[1] && errs[1] < errs[0] && errs[2] <= 0.02 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_sanity() -> Outcome {
    let lp = TwoJunctionLoop::new(0.4, 0.4, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let full = exact_critical_current(&lp, 0.0).map_err(|e| e.to_string())?.i_c;
    let tiny = TwoJunctionLoop::symmetric(1e-4);
    let half = exact_critical_current(&tiny, 0.5).map_err(|e| e.to_string())?.i_c;
    let detail = format!("I_c(0) = {full:.9}, I_c(Φ0/2) at β_L=1e-4 = {half:.2e}");
    if rel(full, 2.0, 2.0) <= 1e-6 && half <= 1e-3 * 2.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn amplitude_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 100 {
        let alpha = rng.random_range(0.0..1.0);
        let r_g = rng.random_range(0.5..2.0);
        let r_out = rng.random_range(0.05..3.0);
        if alpha * r_out / r_g >= 0.99 {
            continue;
        }
        n += 1;
        let l: Vec<f64> = (0..3).map(|_| rng.random_range(0.3..3.0)).collect();
        let c = DeviceConfig::normalized_ring(&l, &[1.0; 3]).with_gate(GateSpec::narrow(1, r_g, r_out, 5.0, alpha));
        let dev = GatedSquid::from_config(&c).map_err(|e| e.to_string())?;
        let (v0, v1) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let envelope = dev.envelope_max(v0) - dev.envelope_max(v1);
        let predicted = amplitude_shift_predicted(&c, v1).map_err(|e| e.to_string())?
            - amplitude_shift_predicted(&c, v0).map_err(|e| e.to_string())?;
        worst = worst.max(rel(envelope, predicted, predicted.abs().max(dev.envelope_max(v0).abs())));
    }
    if worst <= 1e-12 {
        Ok(format!("max relative deviation {worst:.1e} over 100 (α, r)"))
    } else {
        Err(format!("max relative deviation {worst:.1e} > 1e-12"))
    }
}

fn zero_inductance() -> Outcome {
    let device = |alpha| DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]).with_gate(GateSpec::narrow(1, 1.0, 0.57, 5.0, alpha));
    let a = alpha_star(&device(0.0)).map_err(|e| e.to_string())?;
    let closed = (2.0 / 0.57 - 1.0) / 4.0;
    let p = sweep_pattern(&device(a.value), (0.0, 2.0), 801, &[1.3]).map_err(|e| e.to_string())?;
    let detail = format!(
        "α* = {:.10} (measured-device estimate {}), zero-inductance segment: {}",
        a.value,
        a.measured_estimate,
        p.has_zero_inductance()
    );
    if (a.value - closed).abs() <= 1e-9 && (a.value - 0.6272).abs() <= 5e-5 && p.has_zero_inductance() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gate_cutoff() -> Outcome {
    let c = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3]).with_gate(GateSpec::wide(1, 1.0, 0.57, 0.1));
    let labels: Vec<String> = linspace(0.0, 1.0, 100)
        .into_iter()
        .map(|phi| critical_current(&c, phi, &[0.0]).map(|cp| cp.label()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let gated = labels.iter().filter(|l| *l == "gate").count();
    let detail = format!("{gated}/100 flux points limited by the gate");
    if gated == labels.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fit_recovery() -> Outcome {
    let t = Instant::now();
    let truth = DeviceConfig::normalized_ring(&[1.0, 1.0, 2.0], &[1.0; 3])
        .with_gate(GateSpec::narrow(1, 1.0, 0.57, 5.0, 0.4))
        .with_theta0(Theta0Policy::Explicit(1.0));
    let v_g = 1.5;
    let p = sweep_pattern(&truth, (0.0, 2.0), 200, &[v_g]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let data = FitCurve {
        v_gate: vec![v_g],
        phi_ext: p.samples.iter().map(|s| s.phi_ext).collect(),
        i_c: p.samples.iter().map(|s| s.i_c * (1.0 + noise.sample(&mut rng))).collect(),
    };
    let mut template = truth.clone();
    FitParam::Inductance(2).set(&mut template, 1.4);
    FitParam::Alpha.set(&mut template, 0.15);
    FitParam::Theta0.set(&mut template, 0.4);
    let free = [
        ParamBound::new(FitParam::Inductance(2), 0.5, 2.0),
        ParamBound::new(FitParam::Alpha, 0.0, 0.6),
        ParamBound::new(FitParam::Theta0, 0.0, 2.0),
    ];
    let opts = FitOptions { seed: 7, ..FitOptions::default() };
    let data = [data];
    let a = fit_parameters(&data, &template, &free, &opts).map_err(|e| e.to_string())?;
    let b = fit_parameters(&data, &template, &free, &opts).map_err(|e| e.to_string())?;
    within(t.elapsed(), 60.0, "two fits")?;
    let mut parts = Vec::new();
    let mut ok = a == b;
    for v in &a.params {
        let want = v.param.get(&truth).unwrap();
        let e = rel(v.value, want, want.abs());
        ok &= e <= 0.05;
        parts.push(format!("{} {:.4} ({:.2}%)", v.param, v.value, 100.0 * e));
    }
    let detail = format!("{}; reruns identical: {}; {:.1?}", parts.join(", "), a == b, t.elapsed());
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn figure_analogues() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |n: &str| dir.path().join(n).display().to_string();
    let narrow = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/narrow.json");
    let code = cli::main_with([
        "gsquid", "sweep", narrow, "--vg", "1.5", "--out", &path("p.csv"), "--vertices", &path("v.csv"), "--svg", &path("p.svg"),
    ]);
    if code != 0 {
        return Err(format!("sweep exited {code}"));
    }
    let code = cli::main_with([
        "gsquid", "oracle", "--beta", "2", "--phi-start", "-0.5", "--phi-stop", "1.5", "--phi-count", "81", "--out", &path("o.csv"), "--svg", &path("o.svg"),
    ]);
    if code != 0 {
        return Err(format!("oracle exited {code}"));
    }
    let read = |n: &str| std::fs::read_to_string(dir.path().join(n)).map_err(|e| e.to_string());
    // zigzag: corners alternate between local maxima and minima
    let corners: Vec<f64> = read("v.csv")?
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .collect();
    let alternating = corners.len() >= 4
        && corners
            .windows(3)
            .all(|w| (w[1] - w[0]).signum() == -(w[2] - w[1]).signum());
    let svg_ok = read("p.svg")?.contains("<polyline") && read("o.svg")?.matches("<polygon").count() >= 2;
    // overlapping lobes: two fluxon states stable at the same flux and bias
    let lp = TwoJunctionLoop::symmetric(2.0);
    let grid = linspace(0.0, 1.0, 41);
    let r0 = stability_region(&lp, 0, &grid).map_err(|e| e.to_string())?;
    let r1 = stability_region(&lp, 1, &grid).map_err(|e| e.to_string())?;
    let overlap = r0
        .bounds
        .iter()
        .zip(&r1.bounds)
        .filter(|(a, b)| matches!((a, b), (Some(a), Some(b)) if a.0.max(b.0) < a.1.min(b.1)))
        .count();
    let detail = format!(
        "{} zigzag corners (alternating {alternating}), plots written {svg_ok}, {overlap} flux points with overlapping lobes",
        corners.len()
    );
    if alternating && svg_ok && overlap > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("narrow gate at zero coupling reduces to wide gate", reduction_identity),
        ("general network solver matches closed-form currents", generic_matches_closed_form),
        ("critical current is flux-periodic", periodicity),
        ("gate voltage translates the pattern by L2·V_g/R", phase_shift_law),
        ("ungated zigzag slope equals 1/ΣL", slope_law),
        ("linearized model converges to exact loop with β_L", oracle_convergence),
        ("exact two-junction loop limits", oracle_sanity),
        ("amplitude shift matches envelope maximum difference", amplitude_consistency),
        ("zero-inductance coupling α*", zero_inductance),
        ("gate-limited regime labels every point", gate_cutoff),
        ("fit recovers L2, α, Θ0", fit_recovery),
        ("zigzag and β_L=2 overlay artifacts", figure_analogues),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
