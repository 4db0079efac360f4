use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_charfol"))
}

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn tmp(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("charfol-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SPHERE: &str = r#"
name = "sphere"
[chart]
coords = ["z", "x", "y"]
[contact]
alpha = ["1", "0", "x"]
[hypersurface]
level = "x^2 + y^2 + z^2"
value = 1.0
[analysis]
zero_seeds = [[0.99, 0.05, 0.02], [-0.99, -0.03, 0.04]]
region = { lower = [-1, -1, -1], upper = [1, 1, 1] }
budget = 6
"#;

#[test]
fn sphere_certificate_passes() {
    let o = run(&["certify", scene("sphere_s2.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["result"]["certificate"]["verdict"], "pass");
    assert_eq!(v["tool"], "charfol");
    assert_eq!(v["scene"]["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn reversed_certificate_swaps_signs() {
    let p = scene("sphere_s2.toml");
    let a = json(&run(&["certify", p.to_str().unwrap()]));
    let b = json(&run(&["certify", "--reverse", p.to_str().unwrap()]));
    let sign = |v: &serde_json::Value, i: usize| v["result"]["certificate"]["elements"][i]["sign"].as_i64().unwrap();
    for i in 0..2 {
        assert_eq!(sign(&a, i), -sign(&b, i));
    }
}

#[test]
fn column_scenes() {
    let o = run(&["certify", scene("mori_column.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["certify", scene("mori_column_flat.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_ne!(json(&o)["result"]["certificate"]["verdict"], "pass");
}

#[test]
fn expression_errors_carry_a_position() {
    let p = tmp("bad.toml", &SPHERE.replace("\"x^2 + y^2 + z^2\"", "\"sin(x\""));
    let o = run(&["classify", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("hypersurface.level"), "{err}");
    assert!(err.contains("bad.toml:8:15:"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let p = tmp("unknown.toml", &format!("bogus = 1\n{SPHERE}"));
    let o = run(&["classify", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field `bogus`"));
}

#[test]
fn missing_files_and_bad_flags_are_input_errors() {
    assert_eq!(run(&["classify", "/nonexistent/scene.toml"]).status.code(), Some(2));
    assert_eq!(run(&["--tolerance-profile", "sloppy", "mori", "perturb"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn output_is_reproducible() {
    let p = tmp("sphere.toml", SPHERE);
    let a = run(&["--seed", "7", "certify", p.to_str().unwrap()]);
    let b = run(&["--seed", "7", "certify", p.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = bin().env("CHARFOL_THREADS", "1").args(["--seed", "7", "certify", p.to_str().unwrap()]).output().unwrap();
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn floats_have_seventeen_digits() {
    let o = run(&["mori", "perturb", "--budget", "4"]);
    let s = String::from_utf8_lossy(&o.stdout);
    let margin = s.lines().find(|l| l.contains("\"margin\"")).unwrap();
    let digits = margin.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    assert_eq!(digits.split('e').next().unwrap().trim_start_matches('-').len(), 18, "{digits}");
}

#[test]
fn foliation_writes_csv() {
    let dir = std::env::temp_dir().join(format!("charfol-csv-{}", std::process::id()));
    let js = dir.join("foliation.json");
    let o = run(&[
        "--grid",
        "3",
        "--csv-dir",
        dir.to_str().unwrap(),
        "--json",
        js.to_str().unwrap(),
        "foliation",
        scene("product_graph.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.join("foliation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3usize.pow(5));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(js).unwrap()).unwrap();
    assert_eq!(v["residual_summary"]["failed"], 0);
}

#[test]
fn convexify_profiles() {
    for (s, n) in [("profile_circle.toml", 1), ("profile_s3.toml", 2), ("profile_r5.toml", 3)] {
        let o = run(&["convexify", scene(s).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{s}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json(&o)["result"]["profile"]["n"], n);
    }
}
