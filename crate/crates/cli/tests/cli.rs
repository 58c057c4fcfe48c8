use std::process::Command;

use bsd_cli::{parse_args, run, run_to, CliConfig, CliError, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

fn config(args: &[&str]) -> CliConfig {
    parse_args(std::iter::once("bsd").chain(args.iter().copied())).unwrap()
}

fn output(args: &[&str]) -> (i32, String) {
    let mut buf = Vec::new();
    let code = run_to(&config(args), &mut buf).unwrap();
    (code, String::from_utf8(buf).unwrap())
}

fn bsd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bsd"))
}

#[test]
fn eval_reports_gradient_length() {
    let (code, out) = output(&["eval", "--domain", "ball:2", "--K", "1", "--potential", "standard", "--point", "0.5,0,0,0"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert!((v["gradient_length_sq"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert!((v["dc_length_sq"].as_f64().unwrap() - 0.375).abs() < 1e-9);
}

#[test]
fn eval_rejects_wrong_point_dimension() {
    let cfg = config(&["eval", "--domain", "ball:2", "--point", "0.5,0"]);
    assert!(matches!(run_to(&cfg, Vec::new()), Err(CliError::Usage(_))));
}

#[test]
fn suite_passes_with_json_reports() {
    let (code, out) = output(&["suite", "--seed", "42"]);
    assert_eq!(code, EXIT_OK);
    let reports: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(reports.len() >= 12);
    assert!(reports.iter().all(|r| r["passed"] == true));
}

#[test]
fn genus_override_fails_the_suite() {
    let (code, out) = output(&["suite", "--genus-override", "typeI:2,2=5"]);
    assert_eq!(code, EXIT_FAILED);
    let failed: Vec<serde_json::Value> = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|r| r["passed"] == false)
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["statement_id"], "kahler-einstein");
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reports.csv");
    let p = path.to_str().unwrap();
    let cfg = config(&["check", "rigidity", "--domain", "polydisc:3", "--potential", "ko", "--format", "csv", "--output", p]);
    assert_eq!(run(&cfg), EXIT_OK);
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, bsd_geometry::verify::CheckReport::COLUMNS);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "rigidity");
    assert_eq!(&rows[0][1], "polydisc:3");
    assert!(rows[0][3].parse::<f64>().unwrap() <= 1e-5);
    assert_eq!(&rows[0][7], "true");
}

#[test]
fn tolerance_override_can_fail_a_check() {
    let (code, out) = output(&["check", "kahler-einstein", "--domain", "disc", "--samples", "5", "--tol", "0"]);
    assert_eq!(code, EXIT_FAILED);
    let r: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(r["tolerance"], 0.0);
}

#[test]
fn flow_writes_trajectory_csv() {
    let (code, out) = output(&[
        "flow", "--domain", "polydisc:2", "--potential", "ko", "--start", "0.7,0.05,0.7,0.05", "--t-max", "0.1", "--dt", "0.01",
    ]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,re1,im1,re2,im2");
    assert_eq!(lines.len(), 12);
}

#[test]
fn escaping_flow_signals_failure() {
    let (code, out) = output(&["flow", "--domain", "disc", "--potential", "ko", "--start", "0.3,0.2", "--t-max", "50"]);
    assert_eq!(code, EXIT_FAILED);
    assert!(out.lines().count() > 2);
}

#[test]
fn binary_exit_codes() {
    let ok = bsd().args(["eval", "--domain", "disc", "--point", "0.1,0.2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let bad_k = bsd().args(["suite", "--K", "-1"]).output().unwrap();
    assert_eq!(bad_k.status.code(), Some(EXIT_USAGE));
    let bad_flag = bsd().args(["suite", "--frobnicate"]).output().unwrap();
    assert_eq!(bad_flag.status.code(), Some(EXIT_USAGE));
    let bad_domain = bsd().args(["list-domains", "--domain", "torus:2"]).output().unwrap();
    assert_eq!(bad_domain.status.code(), Some(EXIT_USAGE));
    let help = bsd().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(EXIT_OK));
}

#[test]
fn seed_falls_back_to_environment() {
    let out = bsd()
        .args(["check", "schwarz-pick", "--samples", "3"])
        .env("BSD_SEED", "7")
        .output()
        .unwrap();
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["seed"], 7);
}
