use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn patchflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patchflow")).args(args).output().expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn run_into(dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let mut args: Vec<String> = vec!["run".into(), fixture(scenario).to_str().unwrap().to_owned(), "--out".into(), dir.to_str().unwrap().into()];
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    patchflow(&refs)
}

#[test]
fn ball_run_writes_artifacts_and_reports_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), "ball.json", &["--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["series.json", "trajectories.csv", "radius_report.json", "law_checks.json", "boundary.svg", "coefficients.svg", "gap.svg"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("radius_report.json")).unwrap()).unwrap();
    let tau = report["stages"][0]["tau_empirical"].as_f64().unwrap();
    assert!((tau - 1.0).abs() < 0.1, "tau_empirical {tau}");
    let csv = std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 12);
    assert!(csv.starts_with("engine,probe,t,x0,x1,psi0,psi1,det_j,rho"));
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_into(a.path(), "ball_empty_t.json", &["--no-plots", "--seed", "5"]).status.success());
    assert!(run_into(b.path(), "ball_empty_t.json", &["--no-plots", "--seed", "5"]).status.success());
    for f in ["series.json", "radius_report.json", "law_checks.json", "trajectories.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    assert!(!a.path().join("boundary.svg").exists());
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), "malformed.json", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "parse");
}

#[test]
fn time_past_horizon_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), "past_horizon.json", &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_json(&out);
    assert_eq!(err["error"], "blow-up horizon");
    assert_eq!(err["exit_code"], 3);
}

#[test]
fn missing_file_is_reported_as_json() {
    let out = patchflow(&["verify", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "io");
}

#[test]
fn verify_ball_passes() {
    let out = patchflow(&["verify", fixture("ball.json").to_str().unwrap()]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(!table.contains("FAIL"));
    for name in ["trace", "curl", "jump", "laws series", "laws ode", "oracle series", "majorant"] {
        assert!(table.contains(name), "no {name} row in\n{table}");
    }
}

#[test]
fn verify_ball_with_restart_passes() {
    let out = patchflow(&["verify", fixture("ball_restart.json").to_str().unwrap()]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}\n{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn flipped_kernel_sign_fails_the_trace_check() {
    let out = patchflow(&["verify", fixture("ball_flipped_sign.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8_lossy(&out.stdout);
    let trace = table.lines().find(|l| l.starts_with("trace")).expect("trace row");
    assert!(trace.contains("FAIL"), "{table}");
    assert_eq!(error_json(&out)["error"], "verify");
}

#[test]
fn empty_t_list_is_vacuous_but_structural_checks_run() {
    let out = patchflow(&["verify", fixture("ball_empty_t.json").to_str().unwrap()]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}");
    assert!(table.contains("vacuous"));
    assert!(table.lines().any(|l| l.starts_with("trace") && l.contains("PASS")));
}

#[test]
fn oracle_fixtures_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = patchflow(&["oracle-fixtures", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let mut names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["ball_coefficients.csv", "ball_flow.csv", "ball_riesz.csv", "disk_pv_bruteforce.csv"]);
}
