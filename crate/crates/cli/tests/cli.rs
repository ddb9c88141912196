use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decdim")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV result, without the preamble and header.
fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o).lines().skip(2).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn ddim_on_the_bandit_fixture() {
    let class = fixture("mab10.json");
    let o = run(&["ddim", "--class", class.to_str().unwrap(), "--delta", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# decdim "));
    assert_eq!(text.lines().nth(1), Some("kind,delta,value,slack,witness_model"));
    let r = &rows(&o)[0];
    assert_eq!(r[..2], ["ddim", "0.1"]);
    assert!((r[2].parse::<f64>().unwrap() - 10.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{").unwrap();
    assert_eq!(run(&["ddim", "--class", bad.to_str().unwrap(), "--delta", "0.1"]).status.code(), Some(2));
    let class = fixture("mab10.json");
    let class = class.to_str().unwrap();
    assert_eq!(run(&["ddim", "--class", class, "--delta", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["ddim", "--class", class]).status.code(), Some(2));
    assert_eq!(run(&["dec", "--class", class, "--kind", "nope", "--delta", "0.1"]).status.code(), Some(2));
    let o = run(&["ddim", "--class", fixture("unlearnable.json").to_str().unwrap(), "--delta", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no Δ-optimal decision"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let class = fixture("mab10.json");
    let go = |sub: &str| {
        let out = dir.path().join(sub);
        let o = run(&[
            "simulate", "--class", class.to_str().unwrap(), "--algorithm", "ucb", "--T", "200", "--seeds", "2",
            "--master-seed", "17", "--traces", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let a = go("a");
    let b = go("b");
    assert!(a.len() >= 3, "summary plus one trace per seed");
    assert_eq!(a, b);
}

#[test]
fn sweep_on_the_worked_instance() {
    let class = fixture("worked.json");
    let o = run(&["sweep", "--class", class.to_str().unwrap(), "--grid", "0.05:0.45:0.05", "--c-kl", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let header = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(header.starts_with("delta,tdec,"));
    let rows = rows(&o);
    assert_eq!(rows.len(), 9);
    for r in rows {
        let gap: f64 = r[0].parse().unwrap();
        let tdec: f64 = r[1].parse().unwrap();
        assert!((tdec - 1.0 / gap).abs() <= 1e-6 / gap, "Δ = {gap}: {tdec}");
    }
}

#[test]
fn mixmix_on_the_two_point_fixture() {
    let o = run(&["bound", "--kind", "mixmix", "--input", fixture("lecam.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = &rows(&o)[0];
    assert_eq!(r[0], "mixmix");
    assert_eq!(r[3].parse::<f64>().unwrap(), 0.5 / 4.0);
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("mab10.json"), dir.path().join("mab10.json")).unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, r#"{"class": "mab10.json", "delta": 0.1, "format": "json"}"#).unwrap();
    let o = run(&["ddim", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["result"]["params"]["delta"], 0.1);
    let o = run(&["ddim", "--config", cfg.to_str().unwrap(), "--delta", "0.9"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["result"]["params"]["delta"], 0.9);
    assert!((doc["result"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    std::fs::write(&cfg, r#"{"class": "mab10.json", "dleta": 0.1}"#).unwrap();
    assert_eq!(run(&["ddim", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let class = dir.path().join("tiny.json");
    std::fs::copy(fixture("tiny.json"), &class).unwrap();
    let before = std::fs::read(&class).unwrap();
    let o = run(&["dec", "--class", class.to_str().unwrap(), "--kind", "offset", "--gamma", "2", "--reference", "member:0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&class).unwrap(), before);
}
