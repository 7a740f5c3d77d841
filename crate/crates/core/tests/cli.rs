//! Runs the `comb-qmc` binary end to end.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_comb-qmc"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn params_row_at_theta_two() {
    let (code, out, _) = run(&["params", "--beta", "0.3466", "--J", "1"]);
    assert_eq!(code, 0);
    let tau1: f64 = column(&out, "tau1")[0].parse().unwrap();
    let tau3: f64 = column(&out, "tau3")[0].parse().unwrap();
    let alpha: f64 = column(&out, "alpha")[0].parse().unwrap();
    assert!((tau1 - 3.5).abs() < 1e-3);
    assert!((tau3 - 3.0).abs() < 1e-3);
    assert!((alpha - 0.2857).abs() < 1e-4);
}

#[test]
fn solve_at_beta_zero_has_one_disordered_branch() {
    let (code, out, _) = run(&["solve", "--beta", "0", "--J", "1"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let branches = v["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 1);
    assert_eq!(branches[0]["tag"], "Disordered");
    assert_eq!(branches[0]["h"], serde_json::json!([1.0, 0.0, 0.0, 1.0]));
}

#[test]
fn correlate_writes_table_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("decay.csv");
    let (code, out, err) = run(&["correlate", "--beta", "0.5", "--J", "1", "--d-max", "4", "--output", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("d,correlation,defect,ratio"));
    assert_eq!(text.lines().count(), 5);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
}

#[test]
fn sweep_is_deterministic() {
    let args = ["sweep", "--grid-beta", "0.1:0.5:0.2", "--grid-J", "0.5:1.5:0.5", "--d-max", "4"];
    let (code, first, _) = run(&args);
    assert_eq!(code, 0);
    let (_, second, _) = run(&args);
    assert_eq!(first, second);
    assert_eq!(first.lines().count(), 1 + 3 * 3);
    assert!(column(&first, "matched").iter().all(|m| m == "direct"));
    // 17 significant digits
    assert!(column(&first, "tau1").iter().all(|x| x.split('e').next().unwrap().len() == 18));
}

#[test]
fn evaluate_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.json");
    std::fs::write(&obs, r#"{"factors": [{"site": [0, 0], "op": "sz"}, {"site": [1, 0], "op": "sz"}]}"#).unwrap();
    let (code, out, err) = run(&["evaluate", "--beta", "0.3", "--J", "2", "--observable", obs.to_str().unwrap(), "--oracle"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["value_oracle"].is_array());
    assert!(v["max_cross_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "params", "beta": 0.2, "J": 3.0, "format": "json"}"#).unwrap();
    let (code, out, _) = run(&["params", "--config", cfg.to_str().unwrap(), "--J", "1"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["beta"], 0.2);
    assert_eq!(v["J"], 1.0);
}

#[test]
fn invalid_input_gives_one_line_and_nonzero_exit() {
    for args in [
        vec!["params", "--beta", "-1", "--J", "1"],
        vec!["params", "--J", "1"],
        vec!["solve", "--beta", "1", "--J", "1", "--grid-beta", "0:1:0.5"],
        vec!["sweep", "--grid-beta", "1:0:0.5", "--grid-J", "1:1:1"],
        vec!["nonsense"],
    ] {
        let (code, out, err) = run(&args);
        assert_ne!(code, 0, "{args:?}");
        assert!(out.is_empty());
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
}

#[test]
fn oracle_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.json");
    std::fs::write(&obs, r#"{"factors": [{"site": [1, 1], "op": "sz"}]}"#).unwrap();
    let out = bin()
        .args(["evaluate", "--beta", "0.3", "--J", "1", "--observable", obs.to_str().unwrap(), "--oracle", "--n", "2"])
        .env("COMB_QMC_MAX_SITES", "6")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle volume too large"));
}
