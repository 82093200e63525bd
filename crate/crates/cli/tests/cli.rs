use std::path::Path;
use std::process::{Command, Output};

fn entgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entgen"))
        .args(args)
        .env_remove("PARITY_SEED")
        .output()
        .expect("run entgen")
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn trajectory_from_mixed_state_starts_at_minus_half() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = entgen(&["trajectory", "--k", "0.3", "--state", "mixed", "--duration", "12", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out, "trajectory.csv");
    let lambda = column(&csv, "lambda");
    assert_eq!(lambda[0].parse::<f64>().unwrap(), -0.5);
    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "trajectory");
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["outputs"][0], "trajectory.csv");

    // The manifest reproduces the run byte for byte.
    let again = tmp.path().join("again");
    let m = out.join("manifest.json");
    let o = entgen(&["trajectory", "--config", m.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&again, "trajectory.csv"), csv);
    assert_eq!(read(&again, "manifest.json"), read(&out, "manifest.json"));
}

#[test]
fn stationary_bell_state_keeps_unit_concurrence() {
    let tmp = tempfile::tempdir().unwrap();
    let o = entgen(&["trajectory", "--state", "bell-u4", "--k", "1", "--duration", "2", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let c = column(&read(tmp.path(), "trajectory.csv"), "concurrence");
    assert!(c.iter().all(|v| v.parse::<f64>().unwrap() == 1.0));
}

#[test]
fn ensemble_of_one_equals_the_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let (t, e) = (tmp.path().join("t"), tmp.path().join("e"));
    let common = ["--k", "1", "--duration", "3", "--seed", "7"];
    let mut a = vec!["trajectory"];
    a.extend(common);
    a.extend(["--out", t.to_str().unwrap()]);
    assert_eq!(entgen(&a).status.code(), Some(0));
    let mut b = vec!["ensemble", "--runs", "1"];
    b.extend(common);
    b.extend(["--out", e.to_str().unwrap()]);
    assert_eq!(entgen(&b).status.code(), Some(0));
    let traj = read(&t, "trajectory.csv");
    let avg = read(&e, "avg_lambda.csv");
    assert_eq!(column(&traj, "lambda"), column(&avg, "mean_lambda"));
    assert_eq!(column(&traj, "concurrence"), column(&avg, "mean_concurrence"));
    for f in ["stats.json", "genesis_hist.csv", "events.csv", "manifest.json"] {
        assert!(e.join(f).exists(), "{f}");
    }
    let stats: serde_json::Value = serde_json::from_str(&read(&e, "stats.json")).unwrap();
    assert_eq!(stats["n_runs"], 1);
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = entgen(&["trajectory", "--duration", "1", "--seed", "42", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_entgen"))
        .args(["trajectory", "--duration", "1", "--out", b.to_str().unwrap()])
        .env("PARITY_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&a, "trajectory.csv"), read(&b, "trajectory.csv"));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"k": 3.0, "duration": 0.5, "seed": 5}"#).unwrap();
    let out = tmp.path().join("o");
    let o = entgen(&["trajectory", "--config", cfg.to_str().unwrap(), "--duration", "0.25", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(m["config"]["k"], 3.0);
    assert_eq!(m["config"]["duration"], 0.25);
    assert_eq!(m["master_seed"], 5);

    std::fs::write(&cfg, r#"{"k": 3.0, "bogus": 1}"#).unwrap();
    let o = entgen(&["trajectory", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two_and_name_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = entgen(&["trajectory", "--dt", "0.5", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--dt"));
    let o = entgen(&["trajectory", "--state", "nonsense", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--state"));
    let o = entgen(&["ensemble", "--runs", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = entgen(&["trajectory", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    let o = entgen(&["projective", "--delta-angle=-1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--delta-angle"));
}

#[test]
fn predict_worked_example_and_blocked_state() {
    let o = entgen(&["predict", "--state", "0.25,0.25,0.49,0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["p_cross"].as_f64().unwrap() - 0.98).abs() < 1e-12);
    assert!((v["t_c"].as_f64().unwrap() - 0.0204).abs() < 1e-4);
    assert_eq!(v["time_unit"], "T_M");

    let o = entgen(&["predict", "--state", "0.25,0.25,0.25,0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["t_c"], "inf");

    let o = entgen(&["predict", "--state", "0.1,0.2,0.3,0.4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho11 = rho22"));
}

#[test]
fn predict_grid_covers_the_plane() {
    let o = entgen(&["predict", "--grid", "101"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "rho33,rho44,p_cross,t_c_over_t_m");
    assert_eq!(lines.count(), 101 * 101);
}

#[test]
fn projective_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let o = entgen(&["projective", "--k", "30", "--n-max", "100", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let curve = read(&a, "projective_analytic.csv");
    let v = column(&curve, "avg_concurrence");
    assert_eq!(v.len(), 100);
    assert_eq!(v[0].parse::<f64>().unwrap(), 0.0);

    let b = tmp.path().join("b");
    let o = entgen(&["projective", "--delta-angle", "0", "--n-max", "10", "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = column(&read(&b, "projective_analytic.csv"), "avg_concurrence");
    assert!(v.iter().all(|x| x.parse::<f64>().unwrap() == 0.0));

    let c = tmp.path().join("c");
    let o = entgen(&["projective", "--k", "30", "--runs", "100000", "--out", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mc = read(&c, "projective_mc.csv");
    let an = column(&mc, "analytic");
    let mean = column(&mc, "mean");
    let se = column(&mc, "se");
    for k in 0..an.len() {
        let (a, m, s): (f64, f64, f64) = (an[k].parse().unwrap(), mean[k].parse().unwrap(), se[k].parse().unwrap());
        assert!((a - m).abs() <= 3.0 * s + 1e-15, "n = {}: {m} vs {a} ± {s}", k + 1);
    }
}

#[test]
fn help_lists_defaults() {
    for sub in ["trajectory", "ensemble", "predict", "projective", "validate"] {
        let o = entgen(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(text.contains("[default:"), "{sub} help lacks defaults");
        assert!(text.contains("--jobs") && text.contains("--config"));
    }
}
