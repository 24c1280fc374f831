use std::path::Path;
use std::process::{Command, Output};

fn adaptree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptree")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = adaptree(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lists_targets() {
    let out = ok(&["targets", "--list"]);
    assert!(out.starts_with("name\td\tpredicted_s"));
    assert!(out.lines().any(|l| l.starts_with("onedisc\t1\t2\t")));
    assert!(out.lines().any(|l| l.starts_with("disk2d\t2\t")));
}

#[test]
fn unknown_target_fails() {
    let out = adaptree(&["boundary-dim", "--target", "nope"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn approximate_compile_eval() {
    let dir = tempfile::tempdir().unwrap();
    let part = dir.path().join("partition.json");
    let net = dir.path().join("net.json");
    let pts = dir.path().join("pts.csv");
    ok(&["approximate", "--target", "onedisc", "--theta", "1", "--size", "16", "--j-max", "12", "--out", path(&part)]);
    let stored: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&part).unwrap()).unwrap();
    assert!(stored["s_hat"].as_f64().unwrap() > 1.0);
    assert_eq!(stored["source_tree_size"], 16);

    let report: serde_json::Value =
        serde_json::from_str(&ok(&["compile", "--in", path(&part), "--eps", "1e-2", "--out", path(&net), "--mc-points", "1000"])).unwrap();
    assert!(report["stats"]["K"].as_u64().unwrap() > 0);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&net).unwrap()).unwrap();
    assert_eq!(meta["meta"]["K"], report["stats"]["K"]);

    std::fs::write(&pts, "x\n0.1\n0.3\n0.9\n").unwrap();
    let vals: Vec<f64> = ok(&["eval-net", "--net", path(&net), "--points", path(&pts)]).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    // onedisc is sin(2πx) + 1 left of 1/2 and sin(2πx) - 1 right of it
    assert!((vals[0] - (1.0 + (0.2 * std::f64::consts::PI).sin())).abs() < 0.05, "{vals:?}");
    assert!(vals[2] < -1.0);
}

#[test]
fn rate_curve_csv() {
    let out = ok(&["approximate", "--target", "onedisc", "--eta-grid", "0.1,0.01,0.001", "--j-max", "12"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "eta,tree_size,cells,error_sq,depth_capped");
    assert_eq!(lines.len(), 4);
    let semi = ok(&["seminorm", "--target", "onedisc", "--grid", "0.1,0.01,0.001", "--j-max", "12"]);
    assert!(semi.starts_with("eta,tree_size,eta_m_T\n"));
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("mlp.json");
    let hist = dir.path().join("hist.csv");
    let out = ok(&[
        "train", "--target", "onedisc", "--n", "32", "--epochs", "30", "--hidden", "8,8", "--n-test", "100", "--out", path(&net),
        "--history", path(&hist),
    ]);
    assert!(out.contains("test_mse"));
    assert_eq!(std::fs::read_to_string(&hist).unwrap().lines().count(), 32);
    let pts = dir.path().join("p.csv");
    std::fs::write(&pts, "0.25\n0.75\n").unwrap();
    assert_eq!(ok(&["eval-net", "--net", path(&net), "--points", path(&pts)]).lines().count(), 2);
}

#[test]
fn sweep_resumes_and_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"mode":"train","targets":["onedisc"],"n_train":[16,32,64],"trials":2,"n_test":200,"epochs":20,"widths":[1,8,1],"output_dir":{:?}}}"#,
            path(&out_dir)
        ),
    )
    .unwrap();
    ok(&["sweep", "--config", path(&cfg)]);
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("mode,target,x,sigma,trial,metric,seconds,seed\n"));
    assert!(out_dir.join("train_sigma0.1.svg").exists());
    assert!(out_dir.join("summary.txt").exists());

    let again = adaptree(&["sweep", "--config", path(&cfg)]);
    assert!(again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("resuming with 6 existing rows"));
    assert_eq!(std::fs::read_to_string(out_dir.join("results.csv")).unwrap(), csv);

    let rates = ok(&["rates", "--table", path(&out_dir.join("results.csv")), "--x", "n_train", "--y", "test_mse", "--group", "sigma"]);
    let line = rates.lines().nth(1).unwrap();
    assert!(line.starts_with("0.1,"));
    assert!(line.ends_with(",3"));
}

#[test]
fn boundary_dimension_of_circle() {
    let est: serde_json::Value = serde_json::from_str(&ok(&["boundary-dim", "--target", "disk2d"])).unwrap();
    assert!((est["dim"].as_f64().unwrap() - 1.0).abs() < 0.15);
}
