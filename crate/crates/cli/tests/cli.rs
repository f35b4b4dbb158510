use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmt_core::{Coupling, Measure};
use serde_json::Value;
use tempfile::TempDir;

fn mmt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmt"))
        .args(args)
        .env_remove("MMT_LOG")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("error report is JSON")
}

fn bump_json(sigma: f64, n: usize) -> String {
    let h = 6.0 * sigma / n as f64;
    let raw: Vec<(f64, f64, f64)> = (0..n)
        .map(|k| {
            let l = -3.0 * sigma + k as f64 * h;
            let z = (l + 0.5 * h) / sigma;
            (l, l + h, (-0.5 * z * z).exp())
        })
        .collect();
    let mass: f64 = raw.iter().map(|&(l, r, d)| d * (r - l)).sum();
    let pieces: Vec<[f64; 3]> = raw.into_iter().map(|(l, r, d)| [l, r, d / mass]).collect();
    serde_json::json!({ "atoms": [], "pieces": pieces }).to_string()
}

const TWO_ATOMS: &str = r#"{"atoms": [[-0.5, 0.5], [0.5, 0.5]], "pieces": []}"#;
const UNIFORM: &str = r#"{"atoms": [], "pieces": [[-1.0, 1.0, 0.5]]}"#;

#[test]
fn barcode_writes_coupling_trace_and_picture() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mu = write(d, "mu.json", &bump_json(0.55, 16));
    let nu = write(d, "nu.json", &bump_json(1.0, 16));
    let out = d.join("out");
    let args = [
        "barcode", "--mu", &mu, "--nu", &nu, "--resolution", "256", "--format", "svg", "--out",
        out.to_str().unwrap(),
    ];
    let o = mmt(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c: Coupling = serde_json::from_str(&fs::read_to_string(path(&out, "coupling.json")).unwrap()).unwrap();
    assert!(c.check_martingale(1e-9));
    let nu_m: Measure = serde_json::from_str(&fs::read_to_string(&nu).unwrap()).unwrap();
    assert!(Measure::tv_distance(&c.second_marginal(), &nu_m) < 1e-9);

    let trace: Value = serde_json::from_str(&fs::read_to_string(path(&out, "trace.json")).unwrap()).unwrap();
    let n = trace["iterations"].as_array().unwrap().len();
    assert!(n >= 2);
    let svg = fs::read_to_string(path(&out, "barcode.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let shades: std::collections::BTreeSet<&str> =
        svg.match_indices("fill=\"#").map(|(i, _)| &svg[i + 6..i + 13]).collect();
    // white background plus one gray per iteration
    assert_eq!(shades.len(), n + 1);

    let again = mmt(&args);
    assert!(again.status.success());
    assert_eq!(svg, fs::read_to_string(path(&out, "barcode.svg")).unwrap());
}

#[test]
fn uniqueness_reports_unique_with_shadow_intervals() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mu = write(d, "mu.json", TWO_ATOMS);
    let nu = write(d, "nu.json", UNIFORM);
    let o = mmt(&["uniqueness", "--mu", &mu, "--nu", &nu, "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("Unique\n"));
    let r: Value = serde_json::from_str(&fs::read_to_string(path(d, "uniqueness.json")).unwrap()).unwrap();
    assert_eq!(r["verdict"], "Unique");
    let iv: Vec<(f64, f64)> = r["shadows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s[1]["left"].as_f64().unwrap(), s[1]["right"].as_f64().unwrap()))
        .collect();
    assert_eq!(iv, vec![(-1.0, 0.0), (0.0, 1.0)]);
}

#[test]
fn undominated_shadow_exits_with_order_code() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mu = write(d, "mu.json", r#"{"atoms": [[0.0, 0.5]], "pieces": []}"#);
    let nu = write(d, "nu.json", r#"{"atoms": [], "pieces": [[0, 1, 1]]}"#);
    let o = mmt(&["shadow", "--mu", &mu, "--nu", &nu, "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "NotDominatedE");
    assert_eq!(e["code"], 3);
    assert!(e["detail"]["point"].is_number());
}

#[test]
fn malformed_input_exits_with_parse_code() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mu = write(d, "mu.json", r#"{"atoms": [[0.0, -1.0]], "pieces": []}"#);
    let nu = write(d, "nu.json", "not json");
    let o = mmt(&["left-curtain", "--mu", &mu, "--nu", &nu, "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "Parse");

    let o = mmt(&["left-curtain", "--resolution", "1", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_oracle_problem_exits_with_size_code() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let atoms: Vec<String> = (0..41).map(|k| format!("[{}, {}]", -1.0 + k as f64 / 20.0, 1.0 / 41.0)).collect();
    let mu = write(d, "mu.json", &format!(r#"{{"atoms": [{}], "pieces": []}}"#, atoms.join(",")));
    let nu = write(d, "nu.json", r#"{"atoms": [], "pieces": [[-2, 2, 0.25]]}"#);
    let o = mmt(&["value-gap", "--mu", &mu, "--nu", &nu, "--eps", "0.5", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["error"], "SizeCap");
}

#[test]
fn left_curtain_csv_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mu = write(d, "mu.json", TWO_ATOMS);
    let nu = write(d, "nu.json", UNIFORM);
    let o = mmt(&["left-curtain", "--mu", &mu, "--nu", &nu, "--format", "csv", "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = fs::read_to_string(path(d, "coupling.csv")).unwrap();
    assert!(csv.lines().count() >= 3);

    let o = mmt(&["left-curtain", "--mu", &mu, "--nu", &nu, "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(path(d, "coupling.json")).unwrap();
    let c: Coupling = serde_json::from_str(&text).unwrap();
    assert!(c.check_martingale(1e-12));
    assert_eq!(serde_json::to_string_pretty(&c).unwrap() + "\n", text);

    let sub = d.join("approx");
    let o = mmt(&[
        "approx", "--coupling", path(d, "coupling.json").to_str().unwrap(), "--eps", "0.25", "--out",
        sub.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let a: Coupling = serde_json::from_str(&fs::read_to_string(path(&sub, "coupling.json")).unwrap()).unwrap();
    assert!(a.check_martingale(1e-9));

    let o = mmt(&[
        "weak-cost", "--coupling", path(d, "coupling.json").to_str().unwrap(), "--out", d.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let w: Value = serde_json::from_str(&fs::read_to_string(path(d, "weak_cost.json")).unwrap()).unwrap();
    assert!(w["excess"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn mimic_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let m0 = write(d, "m0.json", r#"{"atoms": [[0.0, 1.0]], "pieces": []}"#);
    let m1 = write(d, "m1.json", UNIFORM);
    let m2 = write(d, "m2.json", r#"{"atoms": [], "pieces": [[-2, 2, 0.25]]}"#);
    let run = |sub: &str| {
        let out = d.join(sub);
        let o = mmt(&[
            "mimic", "--marginal", &m0, "--marginal", &m1, "--marginal", &m2, "--paths", "500", "--seed", "11",
            "--resolution", "512", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("paths.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(a.lines().count(), 501);
    assert!(a.starts_with("x1,x2,x3\n"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.join("a/mimic.json")).unwrap()).unwrap();
    assert!(summary["backward_determinism"].as_array().unwrap().iter().all(|s| s.as_f64().unwrap() < 1e-4));
}

#[test]
fn value_gap_csv() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mu = write(d, "mu.json", TWO_ATOMS);
    let nu = write(d, "nu.json", UNIFORM);
    let o = mmt(&[
        "value-gap", "--mu", &mu, "--nu", &nu, "--eps", "0.5,0.25", "--cost", "square", "--format", "csv",
        "--out", d.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(path(d, "value_gap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("eps,mmt_value,lp_value,gap\n0.5,"));
}
