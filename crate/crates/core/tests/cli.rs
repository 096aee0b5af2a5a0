use std::path::PathBuf;
use std::process::Command;

use sfverify::harness::*;
use sfverify::refine::MatchMode;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sfverify-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn verify_cfg(implementation: &str) -> RunConfig {
    let mut cfg = RunConfig::new(corpus("absolute_value.sfc"));
    cfg.implementation = Some(corpus(implementation));
    cfg.trace_count = 100;
    cfg
}

#[test]
fn validate_exit_codes() {
    assert_eq!(cmd_validate(&RunConfig::new(corpus("absolute_value.sfc"))).code, EXIT_OK);
    let missing = scratch("nodefault.sfc", "chart D { state A {} state B {} transition t { source A; target B; } }");
    let out = cmd_validate(&RunConfig::new(missing));
    assert_eq!(out.code, EXIT_FAIL);
    assert_eq!(out.stderr.lines().count(), 1, "{}", out.stderr);
    assert_eq!(cmd_validate(&RunConfig::new("/nonexistent/chart.sfc")).code, EXIT_IO);
}

#[test]
fn simulate_streams_json_lines() {
    let mut cfg = RunConfig::new(corpus("absolute_value.sfc"));
    cfg.trace = Some(scratch("two.trace", "u=5\nu=5\n"));
    let out = cmd_simulate(&cfg);
    assert_eq!(out.code, EXIT_OK);
    let ys: Vec<i64> = out
        .stdout
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["outputs"]["y"].as_i64().unwrap())
        .collect();
    assert_eq!(ys, [0, 5]);
    assert!(out.stdout.starts_with("{\"step\":1,\"outputs\""));

    cfg.trace = Some(scratch("empty.trace", ""));
    let out = cmd_simulate(&cfg);
    assert_eq!((out.code, out.stdout.as_str()), (EXIT_OK, ""));

    cfg.trace = Some(scratch("bad.trace", "u=1\nevents=[nope] u=2\n"));
    let out = cmd_simulate(&cfg);
    assert_eq!(out.code, EXIT_FAIL);
    assert_eq!(out.stdout.lines().count(), 1);
}

#[test]
fn generate_shapes() {
    let out = cmd_generate(&RunConfig::new(corpus("absolute_value.sfc")));
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("fn AbsoluteValue_output(tid)") && out.stdout.contains("DWork.is_c1 == IN_N"));

    let single = scratch("single.sfc", "chart One { state S {} transition d { target S; } }");
    let out = cmd_generate(&RunConfig::new(single));
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("const IN_S = 1;"));

    let out = cmd_generate(&RunConfig::new(corpus("parallel.sfc")));
    assert!(out.stdout.contains("is_active_Heater: byte;") && out.stdout.contains("is_active_Fan: byte;"));

    let mut cfg = RunConfig::new(corpus("absolute_value.sfc"));
    cfg.emit = ImplFormat::C;
    let out = cmd_generate(&cfg);
    assert!(out.stdout.contains("void AbsoluteValue_output(int_T tid)"));
}

#[test]
fn generated_c_reads_back_and_verifies() {
    let mut cfg = RunConfig::new(corpus("history.sfc"));
    cfg.emit = ImplFormat::C;
    let c_path = scratch("gearbox.c", "");
    cfg.output = Some(c_path.clone());
    assert_eq!(cmd_generate(&cfg).code, EXIT_OK);
    let mut v = RunConfig::new(corpus("history.sfc"));
    v.implementation = Some(c_path);
    v.trace_count = 100;
    let out = cmd_verify(&v);
    assert_eq!(out.code, EXIT_OK, "{}", out.stdout);
}

#[test]
fn retrieve_dumps_the_relation() {
    let out = cmd_retrieve(&RunConfig::new(corpus("absolute_value.sfc")));
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("v_u = U.u") && out.stdout.contains("0 counterexample(s)"));
    let mut cfg = RunConfig::new(corpus("history.sfc"));
    cfg.report_format = ReportFormat::Json;
    let out = cmd_retrieve(&cfg);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["schema"], "sfverify/1");
    assert!(v["relation"]["history_map"]["fields"]["s_Drive"].is_object());
}

#[test]
fn verify_exit_codes() {
    assert_eq!(cmd_verify(&verify_cfg("absolute_value.c")).code, EXIT_OK);
    assert_eq!(cmd_verify(&verify_cfg("absolute_value_edited.sfi")).code, EXIT_OK);
    let mut exact = verify_cfg("absolute_value_edited.sfi");
    exact.match_mode = MatchMode::Exact;
    assert_eq!(cmd_verify(&exact).code, EXIT_FAIL);
    let out = cmd_verify(&verify_cfg("absolute_value_wrong_sign.sfi"));
    assert_eq!(out.code, EXIT_FAIL);
    assert!(out.stdout.contains("first divergence in AbsoluteValue_output"));
    for f in ["loop.c", "pointer.c"] {
        let out = cmd_verify(&verify_cfg(f));
        assert_eq!(out.code, EXIT_NONCONFORMANT);
        assert!(out.stderr.contains(&format!("{f}:57:")), "{}", out.stderr);
    }
    assert_eq!(cmd_verify(&verify_cfg("missing.sfi")).code, EXIT_IO);
    let mut bad = verify_cfg("absolute_value.c");
    (bad.domain_lo, bad.domain_hi) = (3, -3);
    assert_eq!(cmd_verify(&bad).code, EXIT_IO);
}

#[test]
fn json_reports_are_reproducible() {
    let mut cfg = verify_cfg("absolute_value_wrong_sign.sfi");
    cfg.report_format = ReportFormat::Json;
    cfg.seed = 7;
    let a = cmd_verify(&cfg);
    cfg.workers = 3;
    let b = cmd_verify(&cfg);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&a.stdout).unwrap();
    assert_eq!((v["schema"].as_str(), v["outcome"].as_str()), (Some("sfverify/1"), Some("FAIL")));
}

#[test]
fn binary_exit_codes() {
    let run = |args: &[&str]| Command::new(env!("CARGO_BIN_EXE_sfverify")).args(args).output().unwrap();
    let chart = corpus("absolute_value.sfc");
    let chart = chart.to_str().unwrap();
    assert_eq!(run(&["validate", chart]).status.code(), Some(0));
    assert_eq!(run(&["validate", "/nonexistent.sfc"]).status.code(), Some(2));
    let wrong = corpus("absolute_value_wrong_sign.sfi");
    let out = run(&["verify", chart, wrong.to_str().unwrap(), "--traces", "50", "--format", "json", "--lo", "-3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"schema\": \"sfverify/1\""));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
