use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbmo-lab")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = cli(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn k_coeff_reports_value_steps_and_terms() {
    let r = report(&["k-coeff", "--measure", "lebesgue:1000", "--q", "0.5@0.015625", "--r", "0.5@0.25"]);
    let k = &r["result"];
    assert_eq!(k["N"], 4);
    assert_eq!(k["terms"].as_array().unwrap().len(), 4);
    assert!((k["value"].as_f64().unwrap() - 5.0).abs() < 0.1);
    assert_eq!(r["subcommand"], "k-coeff");
    assert_eq!(r["measure"]["atoms"], 1000);
    assert_eq!(r["measure"]["hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["config"]["q"], "0.5@0.015625");

    let alone = report(&["k-coeff", "--measure", "lebesgue:1000", "--q", "0.5@0.015625"]);
    assert_eq!(alone["result"]["r"], Value::Null);
    assert_eq!(alone["result"]["N"], 6);
}

#[test]
fn t1_check_on_lebesgue_512_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "t1-check",
        "--kernel",
        "cauchy1d",
        "--measure",
        "lebesgue:512",
        "--csv-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let cert = &r["result"]["certificate"];
    assert!(cert["best_C"].as_f64().unwrap().is_finite());
    assert_eq!(cert["cancellation_warning"], false);
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some("epsilon,best_C"));
    assert_eq!(sweep.lines().count(), 1 + cert["epsilon_grid"].as_array().unwrap().len());
    let table = std::fs::read_to_string(dir.path().join("certificate.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("epsilon,K,osc_times_K"));
}

#[test]
fn validation_failures_exit_2() {
    for args in [
        vec!["doubling-scan", "--measure", "lebesgue:64", "--alpha", "2", "--beta", "2"],
        vec!["doubling-scan", "--measure", "lebesgue:64", "--alpha", "2", "--beta", "1.5"],
        vec!["k-coeff", "--measure", "lebesgue:64"],
        vec!["growth-check", "--measure", "nowhere.json"],
        vec!["apply-czo", "--measure", "lebesgue:64", "--kernel", "sinc"],
        vec!["growth-check", "--measure", "lebesgue:64", "--levels", "0"],
        vec!["growth-check", "--measure", "lebesgue:64", "--bogus"],
    ] {
        let out = cli(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn refuse_policy_rejects_unsigned_kernel() {
    let args = ["t1-check", "--measure", "lebesgue:1024", "--kernel", "unsigned-power", "--eps-count", "2"];
    let warn = report(&args);
    assert_eq!(warn["result"]["certificate"]["cancellation_warning"], true);
    let mut refuse = args.to_vec();
    refuse.extend(["--cancellation-policy", "refuse"]);
    assert_eq!(cli(&refuse).status.code(), Some(2));
}

#[test]
fn phi_table_matches_log_profile() {
    let dir = tempfile::tempdir().unwrap();
    let radii = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625];
    let list = radii.map(|r| r.to_string()).join(",");
    report(&[
        "test-family",
        "--measure",
        "lebesgue:1000",
        "--base-points",
        "0",
        "--radii",
        &list,
        "--csv-dir",
        dir.path().to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(dir.path().join("phi_vs_k.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("base,radius,phi,K"));
    let mut seen = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (r, phi) = (v[1], v[2]);
        // the sum is a midpoint rule for the integral of 1/t over [r, 1] with step 1/1000
        let expected = 1.0 + (1.0 / r).ln();
        assert!((phi - expected).abs() <= 1e-3 / r, "r = {r}: {phi} vs {expected}");
        seen += 1;
    }
    assert_eq!(seen, radii.len());
}

#[test]
fn empty_section_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"measure": "lebesgue:64", "base-points": []}"#).unwrap();
    let out = cli(&["test-family", "--config", config.to_str().unwrap(), "--csv-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("phi_vs_k.csv")).unwrap();
    assert_eq!(csv, "base,radius,phi,K\n");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"measure": "lebesgue:64", "alpha": 4.0, "levels": 5}"#).unwrap();
    let path = config.to_str().unwrap();
    let r = report(&["doubling-scan", "--config", path, "--alpha", "6"]);
    assert_eq!(r["config"]["alpha"], 6.0);
    assert_eq!(r["config"]["levels"], 5);
    assert_eq!(r["config"]["beta"], 12.0);

    std::fs::write(&config, r#"{"measure": "lebesgue:64", "alpha_typo": 4.0}"#).unwrap();
    assert_eq!(cli(&["doubling-scan", "--config", path]).status.code(), Some(2));
}

#[test]
fn gen_measure_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("mu.json");
    let f = file.to_str().unwrap();
    let a = report(&["gen-measure", "--measure", "cantor:4", "--measure-out", f]);
    let b = report(&["growth-check", "--measure", f]);
    assert_eq!(a["measure"]["hash"], b["measure"]["hash"]);
    assert_eq!(b["measure"]["atoms"], 16);
}
