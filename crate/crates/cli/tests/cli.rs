use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn detbox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detbox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is one JSON object")
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn count_small_box() {
    let o = detbox(&["count", "--set", "r=1", "--set", "x=1"]);
    assert!(o.status.success());
    assert_eq!(json_out(&o)["value"], 20);
    let o = detbox(&["count", "--set", "r=-1", "--set", "x=1", "--set", "algorithm=enumerate"]);
    assert_eq!(json_out(&o)["value"], 20);
    let o = detbox(&["count", "--set", "r=1", "--set", "x=2", "--set", "orthant=positive"]);
    assert_eq!(json_out(&o)["value"], 2);
}

#[test]
fn config_file_with_override() {
    let path = tmp("count.json");
    fs::write(&path, r#"{"r": 2, "x": 50, "orthant": "positive", "algorithm": "brute"}"#).unwrap();
    let p = path.to_str().unwrap();
    let base = json_out(&detbox(&["count", "--config", p]))["value"].clone();
    let conv = json_out(&detbox(&["shiftconv", "--set", "m=50", "--set", "r=2"]))["value"].clone();
    assert_eq!(base, conv);
    let o = detbox(&["count", "--config", p, "--set", "algorithm=congruence"]);
    assert_eq!(json_out(&o)["value"], base);
    let o = detbox(&["count", "--config", p, "--set", "x=10"]);
    assert_ne!(json_out(&o)["value"], base);
}

#[test]
fn exit_codes() {
    let o = detbox(&["count", "--set", "r=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = detbox(&["count", "--set", "r=1", "--set", "x=5", "--set", "typo=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = detbox(&["count", "--set", "r=1", "--set", "x=100000"]);
    assert_eq!(o.status.code(), Some(3));
    let o = detbox(&["kloosterman", "--set", "m=1", "--set", "n=1", "--set", "c=0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = detbox(&[
        "poisson-check", "--set", "alpha=1", "--set", "q=3", "--set", "a=2", "--set", "c=3", "--set", "x=40",
        "--set", "h=7", "--set", "n_max=0", "--set", "max_defect=0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "audit_failure");
    let o = detbox(&["scan", "--set", "r_values=[5]", "--set", "x_min=16", "--set", "x_max=64", "--set", "ratio=2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scalar_commands() {
    let o = detbox(&["ramanujan", "--set", "q=12", "--set", "n=8"]);
    assert_eq!(json_out(&o)["value"], -2);
    let o = detbox(&["kloosterman", "--set", "m=1", "--set", "n=1", "--set", "c=7", "--set", "method=direct"]);
    let direct = json_out(&o)["value"].as_f64().unwrap();
    let o = detbox(&["kloosterman", "--set", "m=1", "--set", "n=1", "--set", "c=7"]);
    let crt = json_out(&o)["value"].as_f64().unwrap();
    assert!((direct - crt).abs() < 1e-12);
    let o = detbox(&["mainterm", "--set", "r=0", "--set", "x=100"]);
    assert_eq!(json_out(&o)["variant"], "zero_det");
    let o = detbox(&[
        "stationary-check", "--set", "m=1", "--set", "n=1", "--set", "a1=4", "--set", "x=100", "--set", "lo=10",
        "--set", "hi=35",
    ]);
    assert!(o.status.success());
    assert!((json_out(&o)["report"]["x0"].as_f64().unwrap() - 20.0).abs() < 1e-12);
}

#[test]
fn scan_is_deterministic() {
    let a = tmp("scan_a.csv");
    let b = tmp("scan_b.csv");
    for p in [&a, &b] {
        let out = format!("output={}", p.display());
        let o = detbox(&[
            "scan", "--set", "r_values=[1,2]", "--set", "x_min=16", "--set", "x_max=128", "--set", "ratio=2",
            "--set", &out,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json_out(&o)["rows"], 8);
    }
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("r,X,exact,main,error,abs_error,log10_X,log10_abs_error\n"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn verify_fast_passes() {
    let o = detbox(&["verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 5);
}
