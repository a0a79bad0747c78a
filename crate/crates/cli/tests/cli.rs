use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn wavespec(args: &[&str]) -> Output {
    wavespec_in(Path::new("."), args)
}

fn wavespec_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavespec")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PATH: &str = r#"{
  "schema_version": 1,
  "graph": {
    "vertices": ["p0", "p1", "p2", "p3"],
    "edges": [["p0", "p1", 1.0], ["p1", "p2", 2.0], ["p2", "p3", 1.5]],
    "boundary": ["p0", "p3"]
  }
}"#;

const INTERVAL: &str = r#"{
  "schema_version": 1,
  "model": { "kind": "interval_spectral", "length": 1.0, "modes": 64 },
  "route": "ip3",
  "horizon": 0.5
}"#;

/// Hash of every file in `dir`, by name.
fn digest(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let h = Sha256::digest(std::fs::read(&p).unwrap());
            (p.file_name().unwrap().to_string_lossy().into_owned(), h.iter().map(|b| format!("{b:02x}")).collect::<String>())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn spectrum_of_asymmetric_path_is_its_metric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "path.json", PATH);
    let out = dir.path().join("out");
    let o = wavespec(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let tau = std::fs::read_to_string(out.join("tau.csv")).unwrap();
    let d = std::fs::read_to_string(out.join("distance.csv")).unwrap();
    assert_eq!(tau, d);
}

#[test]
fn unknown_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &PATH.replace("\"graph\"", "\"grpah\""));
    let o = wavespec(&["spectrum", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grpah"), "{}", stderr(&o));
}

#[test]
fn bad_values_and_versions_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases = [
        (INTERVAL.replace("\"horizon\": 0.5", "\"horizon\": -1.0"), "horizon"),
        (INTERVAL.replace("\"modes\": 64", "\"modes\": \"many\""), "invalid type"),
        (INTERVAL.replace("\"schema_version\": 1", "\"schema_version\": 9"), "schema_version"),
        (INTERVAL.replace("\"schema_version\": 1,", ""), "schema_version"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.json"), text);
        let o = wavespec(&["respond", "--config", &cfg, "--out", out]);
        assert_eq!(o.status.code(), Some(2), "case {i}");
        assert!(stderr(&o).contains(needle), "case {i}: {}", stderr(&o));
    }
}

#[test]
fn reconstruct_rejects_a_model_spec() {
    let dir = tempfile::tempdir().unwrap();
    for (key, needle) in [("model_spec", "model_spec"), ("model", "kind")] {
        let text = format!(
            r#"{{"schema_version": 1, "route": "ip3", "data": "s.csv", "cell": 0.04, "horizon": 0.5,
                "{key}": {{"kind": "interval_spectral", "length": 1.0, "modes": 24}}}}"#
        );
        let cfg = write(dir.path(), "r.json", &text);
        let o = wavespec(&["reconstruct", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{key}");
        assert!(stderr(&o).contains(needle), "{key}: {}", stderr(&o));
    }
}

#[test]
fn respond_and_reconstruct_are_deterministic() {
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "interval.json", INTERVAL);
        let o = wavespec_in(dir.path(), &["respond", "--config", "interval.json", "--out", "data"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let o = wavespec_in(dir.path(), &["reconstruct", "--config", "data/reconstruct.json", "--out", "rec"]);
        assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", stderr(&o));
        assert!(dir.path().join("rec/isometry.json").exists());
        hashes.push((digest(&dir.path().join("data")), digest(&dir.path().join("rec"))));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn verify_runs_named_checks() {
    let o = wavespec(&["verify", "--check", "metric_lattice", "weyl_equivalence", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);

    let o = wavespec(&["verify", "--check", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nonsense"));
}

#[test]
fn simulate_reports_structural_identities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "interval.json", INTERVAL);
    let out = dir.path().join("sim");
    let o = wavespec(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("axioms.json").exists());
    assert!(out.join("response_sample.csv").exists());
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = wavespec(&["respond", "--out", "/tmp"]);
    assert_eq!(o.status.code(), Some(2));
}
