use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gsquid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsquid")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn sweep_writes_one_row_per_sample() {
    let o = gsquid(&["sweep", &config("example.json"), "--phi-count", "57"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phi_ext,i_c,branch,m"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 57);
    assert!(rows.iter().all(|r| r.split(',').count() == 4));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    for run in 0..2 {
        let tag = |n: &str| path(dir.path(), &format!("{run}_{n}"));
        let o = gsquid(&[
            "sweep", &config("narrow.json"), "--vg", "1.5", "--out", &tag("p.csv"), "--json", &tag("p.json"), "--svg", &tag("p.svg"),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let o = gsquid(&["shift", &config("example.json"), "--vg", "0,5mV", "--out", &tag("s.json")]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(
            ["p.csv", "p.json", "p.svg", "s.json"]
                .iter()
                .map(|n| fs::read(tag(n)).unwrap())
                .collect(),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn shift_reports_predicted_and_measured() {
    let o = gsquid(&["shift", &config("example.json"), "--vg", "0,5mV"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    let row = &v["shifts"][0];
    let predicted = row["phase_predicted"].as_f64().unwrap();
    let measured = row["phase_measured"].as_f64().unwrap();
    let phi0 = v["phi0"].as_f64().unwrap();
    assert!((predicted - 100e-12 * 5e-3 / 1570.0).abs() < 1e-24);
    assert!((measured - predicted).abs() < 0.01 * phi0);
    assert!(row["phase_difference_phi0"].as_f64().unwrap().abs() < 0.01);
}

#[test]
fn negative_inductance_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("example.json")).unwrap().replacen("\"100pH\"", "\"-100pH\"", 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text).unwrap();
    let o = gsquid(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("branches[1].inductance"), "{}", stderr(&o));
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.json");
    fs::write(&bad, "{\n  \"units\": \"si\",\n  \"branches\": [\n").unwrap();
    let o = gsquid(&["sweep", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("broken.json:4:"), "{}", stderr(&o));
}

#[test]
fn no_superconducting_state_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let weak = dir.path().join("weak.json");
    fs::write(
        &weak,
        r#"{"units": "normalized", "branches": [
            {"inductance": 0.1, "critical_current": 1},
            {"inductance": 0.1, "critical_current": 1}]}"#,
    )
    .unwrap();
    let o = gsquid(&["sweep", weak.to_str().unwrap(), "--phi-count", "11"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("no superconducting state"), "{}", stderr(&o));
}

#[test]
fn argument_errors_exit_one() {
    assert_eq!(gsquid(&["sweep", &config("example.json"), "--phi-count", "1"]).status.code(), Some(1));
    assert_eq!(gsquid(&["sweep", &config("example.json"), "--vg", "5 parsecs"]).status.code(), Some(1));
    assert_eq!(gsquid(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gsquid(&["--help"]).status.code(), Some(0));
}

#[test]
fn map_and_oracle_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsquid(&[
        "map", &config("narrow.json"), "--vg", "1.5", "--i-start", "-2", "--i-stop", "2", "--i-count", "9", "--phi-count", "7", "--rn", "10",
        "--out", &path(dir.path(), "m.csv"), "--svg", &path(dir.path(), "m.svg"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(csv.starts_with("phi_ext,i_in,state,resistance\n"));
    assert_eq!(csv.lines().count(), 1 + 9 * 7);
    let svg = fs::read_to_string(dir.path().join("m.svg")).unwrap();
    assert!(svg.contains("Φ_ext/Φ₀") && svg.contains("gate_limited"));

    let o = gsquid(&[
        "oracle", "--config", &config("two_junction.json"), "--phi-count", "21",
        "--out", &path(dir.path(), "o.csv"), "--json", &path(dir.path(), "o.json"), "--svg", &path(dir.path(), "o.svg"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("o.csv")).unwrap();
    assert!(csv.starts_with("phi_ext,exact,linear,error\n"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(json["kind"], "oracle_comparison");
    assert!(json["max_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn alpha_reports_the_zero_inductance_coupling() {
    let o = gsquid(&["alpha", &config("narrow.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.627_192_982_456).abs() < 1e-9);
    assert_eq!(v["measured_estimate"], 0.8);
    assert_eq!(gsquid(&["alpha", &config("ungated.json")]).status.code(), Some(1));
}

#[test]
fn fitted_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "data.csv");
    let o = gsquid(&["sweep", &config("narrow.json"), "--vg", "1.5", "--phi-count", "200", "--out", &data]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // the sweep output has no v_g column; add it so the fit sees the right gate voltage
    let with_vg: String = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(k, l)| if k == 0 { format!("{l},v_g\n") } else { format!("{l},1.5\n") })
        .collect();
    fs::write(&data, with_vg).unwrap();

    let fitted = path(dir.path(), "fitted.json");
    let o = gsquid(&[
        "fit", &config("narrow.json"), "--data", &data, "--free", "alpha:0:0.6", "--starts", "3", "--seed", "5",
        "--out", &path(dir.path(), "fit.json"), "--save-config", &fitted,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(report["kind"], "fit");
    assert!((report["params"][0]["value"].as_f64().unwrap() - 0.4).abs() < 1e-4, "{report}");

    assert_eq!(gsquid(&["validate", &fitted]).status.code(), Some(0));
    let sweep = |cfg: &str| gsquid(&["sweep", cfg, "--vg", "1.5", "--phi-count", "50"]).stdout;
    let a = sweep(&fitted);
    let b = sweep(&config("narrow.json"));
    let max_dev = String::from_utf8(a)
        .unwrap()
        .lines()
        .zip(String::from_utf8(b).unwrap().lines())
        .skip(1)
        .map(|(x, y)| {
            let f = |l: &str| l.split(',').nth(1).unwrap().parse::<f64>().unwrap();
            (f(x) - f(y)).abs()
        })
        .fold(0.0, f64::max);
    assert!(max_dev < 1e-4, "{max_dev}");

    // a written config reproduces itself exactly
    let again = path(dir.path(), "again.json");
    let lib = gated_squid::io::config::load_config(PathBuf::from(&fitted).as_path()).unwrap();
    gated_squid::io::config::save_config(&lib, again.as_ref()).unwrap();
    assert_eq!(fs::read(&fitted).unwrap(), fs::read(&again).unwrap());
    assert_eq!(sweep(&fitted), sweep(&again));
}
