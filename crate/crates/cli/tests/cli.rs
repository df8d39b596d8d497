use assert_cmd::Command;
use predicates::prelude::*;

fn skly() -> Command {
    Command::cargo_bin("skly").unwrap()
}

#[test]
fn list_enumerates_checks_in_name_order() {
    let out = skly().arg("list").assert().success();
    let text = String::from_utf8(out.get_output().stdout.clone()).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert!(names.contains(&"specfun.theta_three_term"));
    assert!(names.contains(&"kernel.identity_r"));
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn check_orders_reports_by_name_and_passes() {
    skly()
        .args(["check", "specfun.theta_three_term", "kernel.e8_sum"])
        .assert()
        .success()
        .stdout(
            predicate::str::is_match("(?s)PASS kernel\\.e8_sum.*PASS specfun\\.theta_three_term")
                .unwrap(),
        );
}

#[test]
fn unknown_check_is_a_config_error() {
    skly().args(["check", "no.such.check"]).assert().code(2);
}

#[test]
fn bad_complex_literal_is_a_config_error() {
    skly()
        .args(["eval", "theta1", "--z", "0.3+xi"])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("a+bi"));
}

#[test]
fn bad_tolerance_env_is_a_config_error() {
    skly()
        .env("SKLY_TOL", "not-a-number")
        .args(["check", "specfun.theta_three_term"])
        .assert()
        .code(2);
}

#[test]
fn degenerate_eta_yields_failing_reports_and_exit_one() {
    // eta on a low-order rational lattice point trips the genericity guard.
    skly()
        .args(["check", "sklyanin.relations", "--eta", "0.45i"])
        .assert()
        .code(1)
        .stdout(predicate::str::contains("FAIL"));
}

#[test]
fn same_seed_reproduces_the_report_byte_for_byte() {
    let run = || {
        let out = skly()
            .args(["check", "kernel.identity_r", "--seed", "11"])
            .assert()
            .success();
        String::from_utf8(out.get_output().stdout.clone()).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.txt");
    skly()
        .args(["check", "specfun.theta_three_term", "--out"])
        .arg(&path)
        .assert()
        .success()
        .stdout(predicate::str::is_empty());
    let body = std::fs::read_to_string(&path).unwrap();
    assert!(body.contains("PASS specfun.theta_three_term"));
}

#[test]
fn eval_prints_value_for_each_function() {
    for f in ["theta1", "theta3", "gamma", "rplus", "rminus"] {
        skly()
            .args(["eval", f, "--z", "0.21+0.08i"])
            .assert()
            .success()
            .stdout(predicate::str::contains(f));
    }
}

#[test]
fn rep_emits_matrices_with_small_residuals() {
    skly()
        .args(["rep", "--n", "1", "--delta", "plus"])
        .assert()
        .success()
        .stdout(predicate::str::contains("dim=2").and(predicate::str::contains("D3")));
}

#[test]
fn mu_flag_replaces_nu() {
    skly()
        .args(["eval", "theta1", "--z", "0.2", "--mu", "0.8+0.1i"])
        .assert()
        .success();
    // --nu and --mu together conflict.
    skly()
        .args(["eval", "theta1", "--z", "0.2", "--mu", "0.8", "--nu", "0.1"])
        .assert()
        .code(2);
}
