use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delayed-hedge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn csv(args: &[&str]) -> (String, Vec<Vec<f64>>) {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# command="));
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn solve_without_delay() {
    let v = json(&["solve", "--n", "4", "--delay", "0", "--mu", "0", "--sigma", "1", "--sigma-hat", "2"]);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["a"], -0.75);
    assert_eq!(v["config"]["n"], 4);
    assert_eq!(v["b"].as_array().unwrap().len(), 3);
}

#[test]
fn solve_consistent_market() {
    let v = json(&["solve", "--n", "5", "--delay", "2", "--mu", "0.2", "--sigma-hat", "1"]);
    assert_eq!(v["a"], 0.0);
    let want = -(-5.0 * 0.04 / 2.0f64).exp();
    assert!((v["value"].as_f64().unwrap() - want).abs() < 1e-15);
}

#[test]
fn domain_error_exits_two() {
    let out = run(&["solve", "--n", "4", "--delay", "4", "--sigma-hat", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delay must be < n"));
    let out = run(&["kernel", "--H", "1.5", "--ratio", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve", "--n", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let v = json(&["verify", "--suite", "matrix", "--grid-size", "8"]);
    assert_eq!(v["passed"], true);
    let names: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"det_closed_form_vs_dense_det"));
    let v = json(&["verify", "--suite", "kernel"]);
    assert!(v["checks"][0]["name"].as_str().unwrap().starts_with("c_k"));
    let out = run(&["verify", "--suite", "all"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["verify", "--suite", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate", "--n", "5", "--delay", "2", "--mu", "0.1", "--sigma-hat", "1.3", "--paths",
        "2000", "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "1"]);
    assert_eq!(run(&threaded).stdout, a.stdout);
}

#[test]
fn simulate_consistent_market_analytic() {
    let v = json(&["simulate", "--n", "3", "--delay", "1", "--mu", "0.2", "--sigma-hat", "1", "--paths", "500"]);
    let want = -(-3.0 * 0.04 / 2.0f64).exp();
    assert!((v["analytic"].as_f64().unwrap() - want).abs() < 1e-14);
    assert!((v["optimal_value"].as_f64().unwrap() - want).abs() < 1e-14);
}

#[test]
fn simulate_perturbed_is_not_better() {
    let v = json(&[
        "simulate", "--n", "5", "--delay", "2", "--mu", "0.1", "--sigma-hat", "1.3", "--paths",
        "20000", "--perturb", "1.5",
    ]);
    let opt = v["optimal_value"].as_f64().unwrap();
    let emp = v["empirical_mean"].as_f64().unwrap();
    let se = v["std_error"].as_f64().unwrap();
    assert!(emp <= opt + 4.0 * se);
    let out = run(&["simulate", "--n", "5", "--delay", "2", "--sigma-hat", "1.3", "--paths", "50"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_csv() {
    let (header, rows) = csv(&["kernel", "--H", "0.2", "--ratio", "1", "--grid", "50"]);
    assert_eq!(header, "t,kappa,gamma_kernel");
    assert_eq!(rows.len(), 51);
    assert!(rows.iter().all(|r| r[1] == 0.0));
    let (_, rows) = csv(&["kernel", "--H", "0.2", "--ratio", "2", "--grid", "100"]);
    assert!(rows.iter().filter(|r| r[0] < 0.2).all(|r| r[2] == 0.0));
}

#[test]
fn limit_values() {
    let v = json(&["limit", "--H", "0.3", "--vsigma", "1", "--vsigma-hat", "1", "--theta", "0"]);
    assert_eq!(v["limit_value"], -1.0);
    let v = json(&["limit", "--H", "0.3", "--theta", "0.5", "--vsigma", "1", "--vsigma-hat", "1"]);
    assert!((v["limit_value"].as_f64().unwrap() + (-0.125f64).exp()).abs() < 1e-15);

    let lim = json(&["limit", "--H", "0.2", "--vsigma", "1", "--vsigma-hat", "1.3"]);
    let disc = json(&["solve", "--n", "10000", "--delay", "2000", "--sigma", "0.01", "--sigma-hat", "0.013"]);
    let (u, w) = (lim["limit_value"].as_f64().unwrap(), disc["value"].as_f64().unwrap());
    assert!((u - w).abs() < 0.01 * u.abs());
}

#[test]
fn figure_tables() {
    let (header, rows) = csv(&["fig1"]);
    assert_eq!(header, "t,kappa_shifted,n100,n1000");
    assert_eq!(rows.len(), 501);
    let sup = rows.iter().map(|r| r[1].abs()).fold(0.0, f64::max);
    let gap = rows.iter().map(|r| (r[1] - r[3]).abs()).fold(0.0, f64::max);
    assert!(gap < 0.05 * sup);

    let (header, _) = csv(&["fig1", "--ns", "50", "--grid", "10", "--unshifted"]);
    assert_eq!(header, "t,kappa_shifted,n50,kappa,nb50");

    let (header, rows) = csv(&["fig2", "--h-grid", "0.1,0.5", "--logratio-grid", "-1,0,1"]);
    assert_eq!(header, "H,log_ratio,U");
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().filter(|r| r[1] == 0.0).all(|r| r[2] == -1.0));
}

#[test]
fn matrix_dump_round_trips() {
    let out = run(&["matrix", "--n", "3", "--delay", "1", "--sigma-hat", "1.3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][1], rows[1][2]);
    let v = json(&["solve", "--n", "3", "--delay", "1", "--sigma-hat", "1.3"]);
    assert_eq!(rows[0][0], v["a"].as_f64().unwrap() + 1.0);
}

#[test]
fn writes_to_file() {
    let path = std::env::temp_dir().join(format!("delayed-hedge-{}.json", std::process::id()));
    let out = run(&["limit", "--H", "0.5", "--vsigma-hat", "2", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "limit");
    std::fs::remove_file(path).ok();
}
