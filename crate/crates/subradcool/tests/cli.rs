use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subradcool"))
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\nstderr: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn chain_array(n: usize, d: f64, trap: Value) -> Value {
    json!({ "geometry": { "kind": "chain", "n": n, "d": d }, "polarization": "y", "trap": trap, "eta": 0.02 })
}

/// Data rows of a CSV written by the runner, header included.
fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn is_17_digit(s: &str) -> bool {
    let (mant, exp) = match s.split_once('e') {
        Some(p) => p,
        None => return false,
    };
    let mant = mant.strip_prefix('-').unwrap_or(mant);
    let digits: Vec<&str> = mant.split('.').collect();
    digits.len() == 2 && digits[0].len() == 1 && digits[1].len() == 16 && exp.trim_start_matches('-').parse::<u32>().is_ok()
}

#[test]
fn spectrum_csv_contract() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": { "kind": "spectrum" },
        "array": chain_array(10, 0.2, json!({ "kind": "uniform", "nu_bar": 20.0 })),
        "drive": { "omega": 1e-3, "detuning": "auto" },
    });
    let out = tmp.path().join("out");
    ok(&run(&write_config(tmp.path(), "c.json", &cfg), &out, &[]));
    let text = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.lines().take_while(|l| l.starts_with('#')).any(|l| l.contains("units")));
    let r = rows(&out.join("spectrum.csv"));
    assert_eq!(r[0], ["mode_index", "J_lambda", "gamma_lambda"]);
    assert_eq!(r.len(), 11);
    let widths: Vec<f64> = r[1..].iter().map(|x| x[2].parse().unwrap()).collect();
    assert!(widths.windows(2).all(|w| w[0] <= w[1]));
    for (k, row) in r[1..].iter().enumerate() {
        assert_eq!(row[0], k.to_string());
        assert!(is_17_digit(&row[1]) && is_17_digit(&row[2]), "{row:?}");
    }
    let sum: f64 = widths.iter().sum();
    assert!((sum - 10.0).abs() < 1e-9);
}

#[test]
fn unknown_keys_are_schema_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": { "kind": "spectrum" },
        "array": chain_array(2, 0.2, json!({ "kind": "uniform", "nu_bar": 20.0 })),
        "drive": { "omega": 1e-3, "detuning": "auto" },
        "colour": "blue",
    });
    let o = run(&write_config(tmp.path(), "c.json", &cfg), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let nested = json!({
        "experiment": { "kind": "spectrum" },
        "array": chain_array(2, 0.2, json!({ "kind": "uniform", "nu_bar": 20.0, "sigma": 1.0 })),
        "drive": { "omega": 1e-3, "detuning": "auto" },
    });
    let o = run(&write_config(tmp.path(), "n.json", &nested), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&tmp.path().join("missing.json"), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn heating_drive_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": { "kind": "cool-effective" },
        "array": chain_array(2, 0.2, json!({ "kind": "gradient", "nu_bar": 20.0, "delta_nu": 1e-3 })),
        "drive": { "omega": 1e-2, "detuning": 20.0 },
    });
    let o = run(&write_config(tmp.path(), "c.json", &cfg), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn summary_round_trips_as_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": { "kind": "ensemble", "sigma": 1e-3, "realizations": 6 },
        "array": chain_array(3, 0.2, json!({ "kind": "uniform", "nu_bar": 20.0 })),
        "drive": { "omega": 1e-3, "detuning": "auto" },
        "seed": 5,
    });
    let a = tmp.path().join("a");
    ok(&run(&write_config(tmp.path(), "c.json", &cfg), &a, &["--seed-override", "11"]));
    let b = tmp.path().join("b");
    ok(&run(&a.join("summary.json"), &b, &["--threads", "1"]));
    let read = |d: &Path, f: &str| std::fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read(&a, "realizations.csv"), read(&b, "realizations.csv"));
    let (sa, sb): (Value, Value) = (serde_json::from_str(&read(&a, "summary.json")).unwrap(), serde_json::from_str(&read(&b, "summary.json")).unwrap());
    assert_eq!(sa["config"]["seed"], 11);
    assert_eq!(sa["results"], sb["results"]);
    assert_eq!(sa["config"]["experiment"], sb["config"]["experiment"]);
    let c = tmp.path().join("c");
    ok(&run(&a.join("summary.json"), &c, &["--seed-override", "12"]));
    assert_ne!(read(&a, "realizations.csv"), read(&c, "realizations.csv"));
}

fn cooling_config(kind: &str, n: usize) -> Value {
    json!({
        "experiment": { "kind": kind, "nu_bar_values": [20.0] },
        "array": chain_array(n, 0.2, json!({ "kind": "gradient", "nu_bar": 20.0, "delta_nu": 1e-3 })),
        "drive": { "omega": 1e-3, "detuning": "auto" },
        "truncation": "shared",
    })
}

fn compare(a: &Path, b: &Path) -> Output {
    bin().arg("compare").arg(a).arg(b).output().unwrap()
}

fn max_deviation(o: &Output) -> f64 {
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().find(|l| l.starts_with("# max relative deviation")).unwrap();
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn effective_and_full_runs_compare_within_ten_percent() {
    let tmp = TempDir::new().unwrap();
    let (eff, full) = (tmp.path().join("eff"), tmp.path().join("full"));
    ok(&run(&write_config(tmp.path(), "e.json", &cooling_config("cool-effective", 3)), &eff, &[]));
    ok(&run(&write_config(tmp.path(), "f.json", &cooling_config("cool-full", 3)), &full, &[]));
    let r = rows(&eff.join("cooling.csv"));
    assert_eq!(r[0][..4], ["nu_bar", "n_ss", "n_ind", "ratio"]);
    let o = compare(&eff, &full);
    ok(&o);
    let text = String::from_utf8_lossy(&o.stdout);
    let n_ss: Vec<f64> = text.lines().filter(|l| l.contains(",n_ss,")).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(n_ss.len(), 1);
    assert!(n_ss[0] <= 0.1, "{text}");
    let same = compare(&eff, &eff);
    ok(&same);
    assert_eq!(max_deviation(&same), 0.0);
}

#[test]
fn compare_rejects_mismatched_grids() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&run(&write_config(tmp.path(), "a.json", &cooling_config("cool-effective", 2)), &a, &[]));
    ok(&run(&write_config(tmp.path(), "b.json", &cooling_config("cool-effective", 3)), &b, &[]));
    let o = compare(&a, &b);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid mismatch"));
}

#[test]
fn regime_map_columns_and_labels() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": { "kind": "regime-map", "delta_nu": [1e-9, 1e-3, 3.0], "omega": [1e-2, 1e-1] },
        "array": chain_array(2, 0.2, json!({ "kind": "uniform", "nu_bar": 20.0 })),
        "drive": { "omega": 1e-2, "detuning": "auto" },
    });
    let out = tmp.path().join("out");
    ok(&run(&write_config(tmp.path(), "c.json", &cfg), &out, &[]));
    let r = rows(&out.join("regime_map.csv"));
    assert_eq!(r[0][..4], ["delta_nu", "Omega", "n_ratio", "regime_label"]);
    assert_eq!(r.len(), 7);
    let labels: Vec<&str> = r[1..].iter().step_by(2).map(|x| x[3].as_str()).collect();
    assert_eq!(labels, ["single_mode", "array_cooling", "single_atom"]);
    let bad = json!({
        "experiment": { "kind": "regime-map", "delta_nu": [1e-3], "omega": [1e-2] },
        "array": chain_array(3, 0.2, json!({ "kind": "uniform", "nu_bar": 20.0 })),
        "drive": { "omega": 1e-2, "detuning": "auto" },
    });
    assert_eq!(run(&write_config(tmp.path(), "b.json", &bad), &out, &[]).status.code(), Some(1));
}

#[test]
fn ring_target_and_sequential_runs() {
    let tmp = TempDir::new().unwrap();
    let ring = json!({
        "experiment": { "kind": "ring-target" },
        "array": { "geometry": { "kind": "ring-plus-center", "n": 7, "radius": 0.2 }, "polarization": "circular", "trap": { "kind": "uniform", "nu_bar": 50.0 }, "eta": 0.02 },
        "drive": { "omega": 1e-2, "detuning": "auto" },
    });
    let out = tmp.path().join("ring");
    ok(&run(&write_config(tmp.path(), "r.json", &ring), &out, &[]));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(s["results"]["reduction"].as_f64().unwrap() >= 10.0);
    assert_eq!(rows(&out.join("target.csv"))[0], ["time", "n_t"]);

    let seq = json!({
        "experiment": { "kind": "sequential", "resonant": [0, 1], "block_detuning": -40.0 },
        "array": chain_array(4, 0.15, json!({ "kind": "gradient", "nu_bar": 20.0, "delta_nu": 1e-3 })),
        "drive": { "omega": 1e-3, "detuning": "auto" },
    });
    let out = tmp.path().join("seq");
    ok(&run(&write_config(tmp.path(), "s.json", &seq), &out, &[]));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(s["results"]["detuned_drift"].as_f64().unwrap() < 0.05);
    assert_eq!(rows(&out.join("occupations.csv"))[0], ["time", "n_0", "n_1", "n_2", "n_3"]);
}

#[test]
fn critical_rate_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "experiment": { "kind": "critical-rate" },
        "array": chain_array(2, 0.2, json!({ "kind": "gradient", "nu_bar": 20.0, "delta_nu": 1e-3 })),
        "drive": { "omega": 1e-3, "detuning": "auto" },
    });
    let out = tmp.path().join("out");
    ok(&run(&write_config(tmp.path(), "c.json", &cfg), &out, &[]));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let gc = s["results"]["gamma_c"]["rate"].as_f64().unwrap();
    let gp = s["results"]["gamma_c_prime"]["rate"].as_f64().unwrap();
    assert!(gp >= gc);
    assert_eq!(rows(&out.join("scan.csv"))[0], ["Omega", "n_ss", "rate", "truncation_unreliable"]);
}
