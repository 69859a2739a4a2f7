use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mcgraph::config::RunConfig;
use mcgraph::dump::FieldMeta;

const SMALL: &str = r#"
[grid]
points = 32
padding = 3
[source]
preset = "gaussian"
amplitude = 1.0
width = 0.9
[solver]
order = 2
[output]
directory = "small"
"#;

fn mcgraph(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcgraph"))
        .args(args)
        .env("MCGRAPH_OUTPUT_ROOT", root)
        .current_dir(root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn print_config_is_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = mcgraph(dir.path(), &["print-config"]);
    assert_eq!(out.status.code(), Some(0));
    RunConfig::parse(&stdout(&out)).unwrap();
}

#[test]
fn coefficients_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = mcgraph(dir.path(), &["coeffs", "--K", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,R,value");
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("2,9/8,"));
    assert_eq!(mcgraph(dir.path(), &["coeffs", "--K", "100000"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mcgraph(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(mcgraph(dir.path(), &["run"]).status.code(), Some(2));
    assert_eq!(mcgraph(dir.path(), &["verify", "nowhere"]).status.code(), Some(2));
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in ["[grid]\npoints = 9\n[output]\ndirectory = \"bad\"\n", "[grid\n", "[solver]\norder = \"four\"\n"]
        .iter()
        .enumerate()
    {
        let path = dir.path().join(format!("bad{i}.toml"));
        fs::write(&path, text).unwrap();
        let out = mcgraph(dir.path(), &["run", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!dir.path().join("bad").exists());
    assert!(!dir.path().join("mcgraph-run").exists());
}

#[test]
fn minimal_run_and_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    fs::write(&path, SMALL).unwrap();
    let out = mcgraph(dir.path(), &["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));

    let run = dir.path().join("small");
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(run.join("manifest.json")).unwrap()).unwrap();
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.len() >= 8);
    for a in artifacts {
        assert!(run.join(a.as_str().unwrap()).is_file());
    }
    let meta = FieldMeta::parse(&fs::read_to_string(run.join("u.json")).unwrap()).unwrap();
    assert_eq!(meta.points, 32);
    let csv = fs::read_to_string(run.join("profiles.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 32);

    let again = mcgraph(dir.path(), &["verify", run.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0), "{}", stdout(&again));
    assert!(stdout(&again).contains("run reproduced"));

    let mut bytes = fs::read(run.join("v.mcg")).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(run.join("v.mcg"), bytes).unwrap();
    let tampered = mcgraph(dir.path(), &["verify", run.to_str().unwrap()]);
    assert_eq!(tampered.status.code(), Some(1));
    assert!(stdout(&tampered).contains("mismatch: v.mcg"));
}

#[test]
fn run_outside_the_certified_radius_still_completes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("large.toml");
    let text = SMALL.replace("amplitude = 1.0", "amplitude = 5.0").replace("\"small\"", "\"large\"")
        + "[geometry]\nepsilon = 0.1\n";
    fs::write(&path, text).unwrap();
    let out = mcgraph(dir.path(), &["run", path.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(2));
    let run = dir.path().join("large");
    let cert: serde_json::Value = serde_json::from_slice(&fs::read(run.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["inside"], false);
    let report = fs::read_to_string(run.join("report.json")).unwrap();
    assert!(report.contains("certificate outside"));
}

#[test]
fn born_infeld_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bi.toml");
    fs::write(
        &path,
        "[geometry]\nmode = \"born_infeld\"\nbeta = 0.2\n[grid]\npoints = 32\npadding = 3\n[solver]\norder = 2\n[output]\ndirectory = \"bi\"\ndump_terms = false\n",
    )
    .unwrap();
    let out = mcgraph(dir.path(), &["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let run = dir.path().join("bi");
    for name in ["d.mcg", "e.mcg", "rho.mcg"] {
        assert!(run.join(name).is_file(), "{name}");
    }
    assert!(!run.join("term_1.mcg").exists());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(run.join("report.json")).unwrap()).unwrap();
    assert!(report["born_infeld"]["gauss_defect"].as_f64().unwrap() < 1e-6);
}
