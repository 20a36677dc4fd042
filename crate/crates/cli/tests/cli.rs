use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sierpinski"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("sierpinski-cli-{}-{name}", std::process::id()))
}

#[test]
fn build_prints_counts() {
    let o = run(&["build", "--N", "3", "--m", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("vertices=15 edges=27 cells=9"), "{}", stdout(&o));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["build", "--N", "1"]).status.code(), Some(2));
    assert_eq!(run(&["build", "--m", "40"]).status.code(), Some(3));
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--lambda", "1e-3", "--f", "exp(("]).status.code(), Some(2));
    // a > 0 violates the sign hypothesis
    assert_eq!(run(&["lambda-star", "--a", "1"]).status.code(), Some(2));
    let corrupt = run(&["verify", "--m", "3", "--fields", "50", "--corrupt-energy-factor", "1.01"]);
    assert_eq!(corrupt.status.code(), Some(1));
    assert!(stdout(&corrupt).contains("FAIL"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let cfg = temp("config.json");
    std::fs::write(&cfg, r#"{"N": 2, "m": 3}"#).unwrap();
    let o = run(&["build", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).contains("vertices=9 "), "{}", stdout(&o));
    let o = run(&["build", "--config", cfg.to_str().unwrap(), "--m", "1"]);
    assert!(stdout(&o).contains("vertices=3 "), "{}", stdout(&o));
    std::fs::write(&cfg, r#"{"N": 2, "bogus": 1}"#).unwrap();
    assert_eq!(run(&["build", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_file(&cfg).unwrap();
}

#[test]
fn lambda_star_reports_infinity_for_subquadratic_primitive() {
    // F = 1 - cos u is bounded, so λ*(γ) keeps growing
    let o = run(&["lambda-star", "--f", "sin(u)", "--F", "1 - cos(u)", "--gamma-max", "5"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("lambda_star=+inf"), "{}", stdout(&o));
}

#[test]
fn solve_linear_fixture_json() {
    let out = temp("solve.json");
    let o = bin()
        .args(["solve", "--N", "2", "--m", "6", "--a", "0", "--f", "1", "--F", "u", "--lambda", "2"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    std::fs::remove_file(&out).unwrap();
    let sup = json["result"]["sup_norm"].as_f64().unwrap();
    assert!((sup - 0.25).abs() < 1e-10, "sup {sup}");
    assert_eq!(json["config"]["N"], 2);
}

#[test]
fn sweep_writes_csv() {
    let out = temp("sweep.json");
    let o = bin()
        .args(["sweep", "--m", "3", "--lambda-grid", "1e-4,5e-4,1e-3"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,norm_u,I_lambda,nontrivial,grad_norm,residual"));
    assert_eq!(lines.count(), 3);
    std::fs::remove_file(&out).unwrap();
    std::fs::remove_file(out.with_extension("csv")).unwrap();

    let o = run(&["sweep", "--m", "3", "--lambda-grid", "1e-3,1e-4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eigen_interval_and_decimation() {
    let o = run(&["eigen", "--N", "2", "--m", "6", "-k", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let first: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("eigenvalue[1]="))
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((first - std::f64::consts::PI.powi(2)).abs() < 0.01 * 9.87, "{text}");

    let o = run(&["eigen", "--N", "3", "--m", "3", "--decimation"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("decimation"));
}

#[test]
fn json_to_stdout_is_parseable() {
    let o = run(&["lambda-star", "--out", "-"]);
    assert!(o.status.success());
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(json["lambda_star"]["value"].as_f64().unwrap() > 3.99e-3);
}
