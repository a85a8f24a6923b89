use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fracount(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracount"))
        .args(args)
        .env("FRACOUNT_OUT", out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn zero_rate_npp_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "zero.json",
        r#"{"name":"zero","seed":7,"n_paths":1000,"horizon":1.0,
            "process":{"kind":"npp","rate":{"type":"constant","lambda":0.0}},
            "probes":{"u_values":[1.0],"time_pairs":[[0.5,1.0]]},
            "checks":[{"check":"exponential_martingale"}]}"#,
    );
    let out = dir.path().join("out");
    let res = fracount(&["run", "--config", &config], &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = fs::read_to_string(out.join("zero").join("report.csv")).unwrap();
    assert!(report.lines().count() >= 2);
    assert!(!out.join("zero").join("paths.csv").exists());
}

#[test]
fn bundled_weighted_vs_marked_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/ngcp_weighted_vs_marked.json");
    let res = fracount(&["run", "--config", config, "--threads", "1"], dir.path());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(res.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS"));
}

#[test]
fn out_of_range_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{"name":"bad","seed":1,"n_paths":1000,"horizon":1.0,
            "process":{"kind":"npp","rate":{"type":"constant","lambda":1.0},
                       "time_change":{"kind":"inverse_stable","alpha":1.5}},
            "probes":{"u_values":[1.0],"time_pairs":[[0.5,1.0]]},
            "checks":[{"check":"exponential_martingale"}]}"#,
    );
    let res = fracount(&["run", "--config", &config], &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("process.time_change.alpha"));
    assert!(!dir.path().join("out").join("bad").exists());
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let res = fracount(&["run", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn list_names_bundled_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let res = fracount(&["list"], dir.path());
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    for name in ["npp_watanabe", "ngcp_equivalence", "ntfpp_moments", "skellam_mgf"] {
        assert!(stdout.contains(name), "{name} missing from {stdout}");
    }
}
