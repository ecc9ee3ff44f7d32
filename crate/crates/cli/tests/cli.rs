use std::process::{Command, Output};

fn multiprice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multiprice"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn valuefn_reports_limits_and_ratio() {
    let v = json(&multiprice(&["valuefn", "--prices", "1,3", "--grid", "4"]));
    let alphas = v["alphas"].as_array().unwrap();
    let total: f64 = alphas.iter().map(|a| a.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!((v["f"].as_f64().unwrap() - 0.466215).abs() < 1e-5);
    assert_eq!(v["samples"].as_array().unwrap().len(), 5);
}

#[test]
fn invalid_prices_exit_two() {
    let out = multiprice(&["valuefn", "--prices", "3,-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("price"));
    // clap parse errors share the code
    assert_eq!(multiprice(&["valuefn"]).status.code(), Some(2));
}

#[test]
fn perturb_verify_holds_at_default_bound() {
    let v = json(&multiprice(&["perturb", "verify", "--prices", "1,3", "--k", "3"]));
    assert_eq!(v["report"]["holds"], true);
    let out = multiprice(&["perturb", "verify", "--prices", "1,3", "--k", "2", "--procedure", "single-unit"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn emitted_instance_round_trips_through_lp_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let p = path.to_str().unwrap();
    let out = multiprice(&["adversary", "--prices", "1,3", "--n", "6", "--seed", "4", "--emit", "--out", p]);
    assert!(out.status.success());

    let lp = json(&multiprice(&["lp-bound", p]));
    let obj = lp["objective"].as_f64().unwrap();
    assert!((obj - lp["dual_objective"].as_f64().unwrap()).abs() < 1e-7);

    let sim = json(&multiprice(&["simulate", p, "--trials", "3", "--seed", "9"]));
    assert_eq!(sim["lp_bound"].as_f64().unwrap(), obj);
    let row = &sim["policies"][0];
    assert!(row["mean_revenue"].as_f64().unwrap() <= obj + 1e-9);
    // same seed, same bytes
    let again = multiprice(&["simulate", p, "--trials", "3", "--seed", "9"]);
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&again.stdout).unwrap(), sim);
}

#[test]
fn adversary_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = multiprice(&[
        "adversary",
        "--prices",
        "1,3",
        "--n",
        "20",
        "--trials",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("# multiprice-report v1"));
    assert!(stdout.lines().any(|l| l.starts_with("adversary,,ranking,")));
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(table, stdout);
    assert!(dir.path().join("figure.csv").exists());
}

#[test]
fn missing_instance_file_exits_two() {
    let out = multiprice(&["lp-bound", "/nonexistent/instance.json"]);
    assert_eq!(out.status.code(), Some(2));
}
