use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nilorbit"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn tmp(dir: &tempfile::TempDir, name: &str, body: &[u8]) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn gowers_agrees() {
    let o = run(&["gowers", "--n", "64", "--l", "2", "--seq", "random", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let r = &v["result"];
    assert!(r["agree"].as_bool().unwrap());
    assert!((r["direct"].as_f64().unwrap() - r["recursive"].as_f64().unwrap()).abs() < 1e-9);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["params"]["seq"], "random");
}

#[test]
fn equidist_on_free_heisenberg_orbit() {
    let o = run(&["equidist", "--spec", &fixture("heis_free.json"), "--N", "65536"]);
    assert_eq!(o.status.code(), Some(0));
    let r = &json(&o)["result"];
    assert_eq!(r["verdict"], "equidistributed");
    assert!(r["witness"].is_null());
    assert_eq!(r["ladder"].as_array().unwrap().last().unwrap(), 65536);
    assert!(r["weyl_table"].as_array().unwrap().iter().all(|w| w["modulus"].as_f64().unwrap() < 0.05));
}

#[test]
fn complexity_of_chain() {
    let o = run(&["complexity", "--spec", &fixture("chain3.json"), "--tree"]);
    assert_eq!(o.status.code(), Some(0));
    let r = &json(&o)["result"];
    assert_eq!(r["bound"], 3);
    assert_eq!(r["size"], 3);
    assert!(r["replayed"].as_bool().unwrap());
    let steps = r["steps"].as_array().unwrap();
    assert_eq!(steps.iter().filter(|s| s["kind"] == "reduce").count(), 3);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["gowers", "--n", "many"]).status.code(), Some(1));
    assert_eq!(run(&["gowers", "--l", "9"]).status.code(), Some(1));
    assert_eq!(run(&["equidist", "--spec", "/nonexistent.json"]).status.code(), Some(1));
    // chain3 has three maps
    assert_eq!(run(&["equidist", "--spec", &fixture("chain3.json")]).status.code(), Some(1));
    // a window shorter than the shift range
    assert_eq!(run(&["vdc", "--k", "50", "--window", "10"]).status.code(), Some(1));
}

#[test]
fn every_output_validates() {
    let dir = tempfile::tempdir().unwrap();
    let heis = fixture("heis_free.json");
    let chain = fixture("chain3.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["complexity", "--spec", &chain, "--tree"],
        vec!["orbit", "--spec", &heis, "--N", "50", "--a", "3", "--b", "1"],
        vec!["equidist", "--spec", &heis, "--N", "4096"],
        vec!["gowers", "--n", "16", "--l", "3", "--seq", "character", "--freq", "5"],
        vec!["vdc", "--k", "4", "--window", "100", "--seq", "rotation"],
        vec!["vn", "--eps", "0.3", "--atoms", "5"],
        vec!["ww", "--from", "8", "--to", "10", "--net", "8"],
        vec!["bfko", "--w", "200", "--seq", "period3"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        let p = tmp(&dir, "doc.json", &o.stdout);
        let v = run(&["validate", p.to_str().unwrap()]);
        assert_eq!(v.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&v.stdout));
        let r = &json(&v)["result"];
        assert_eq!(r["command"], args[0]);
        // the validator's own output validates too
        let q = tmp(&dir, "val.json", &v.stdout);
        assert_eq!(run(&["validate", q.to_str().unwrap()]).status.code(), Some(0));
    }
}

#[test]
fn validation_rejects_edits() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gowers", "--n", "8"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let extra = text.replacen("\"seed\"", "\"extra\": 1,\n  \"seed\"", 1);
    let p = tmp(&dir, "a.json", extra.as_bytes());
    let v = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(2));
    assert_eq!(json(&v)["result"]["valid"], false);
    // a float no longer in 17-digit form
    let mut doc: Value = serde_json::from_str(&text).unwrap();
    doc["result"]["direct"] = Value::from(0.5);
    let p = tmp(&dir, "b.json", serde_json::to_string_pretty(&doc).unwrap().as_bytes());
    assert_eq!(run(&["validate", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn floats_have_17_significant_digits() {
    let o = run(&["gowers", "--n", "8", "--seq", "ones"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"direct\": 1.0000000000000000e0"), "{text}");
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = br#"{"schema_version": 1, "command": "vdc", "seed": 5, "args": {"k": 4, "window": 60, "seq": "random"}}"#;
    let p = tmp(&dir, "cfg.json", cfg);
    let a = run(&["run", "--config", p.to_str().unwrap()]);
    let b = run(&["vdc", "--k", "4", "--window", "60", "--seq", "random", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let bad = tmp(&dir, "bad.json", br#"{"command": "vdc", "colour": "red"}"#);
    assert_eq!(run(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    let nested = tmp(&dir, "nested.json", br#"{"command": "run"}"#);
    assert_eq!(run(&["run", "--config", nested.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn csv_output() {
    let o = run(&["orbit", "--spec", &fixture("heis_free.json"), "--N", "4", "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "coords.0,coords.1,coords.2,m,on_boundary");
    assert_eq!(lines.len(), 5);
    assert!(lines[2].starts_with("4.1421356237309515e-1,"));

    let o = run(&["gowers", "--n", "8", "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("path,value\n"));
    assert!(text.contains("result.agree,true"));
}

#[test]
fn out_flag_and_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.json");
    let o = run(&["bfko", "--w", "300", "--seed", "2", "--threads", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let env = bin().args(["bfko", "--w", "300", "--seed", "2"]).env("NILORBIT_THREADS", "3").output().unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), env.stdout);
    let bad = bin().args(["bfko", "--w", "300"]).env("NILORBIT_THREADS", "lots").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
