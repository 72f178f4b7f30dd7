use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CANONICAL: &str = r#"{"p":2,"n":3,"weight":{"family":"matukuma","params":{"sigma":2}},"nonlinearity":{"family":"power_diff","params":{"q1":3,"q2":0.5}}}"#;

const AB: &str = r#"{"p":2,"n":4,"a":{"family":"power","params":{"coef":1,"exponent":2}},"b":{"family":"weighted","params":{"exponent":2,"weight":{"family":"matukuma","params":{"sigma":2}}}},"nonlinearity":{"family":"power_diff","params":{"q1":3,"q2":0.5}}}"#;

fn workdir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("plshoot-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plshoot")).args(args).output().unwrap()
}

fn stderr_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error record");
    serde_json::from_str(line).expect("single-line JSON")
}

#[test]
fn check_passes_on_canonical_model() {
    let d = workdir("check");
    let cfg = write(&d, "m.json", CANONICAL);
    let out = run(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn check_fails_for_bad_weight() {
    let d = workdir("check-bad");
    let cfg = write(&d, "m.json", &CANONICAL.replace(r#""sigma":2"#, r#""sigma":3"#));
    let out = run(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let rec = stderr_record(&out);
    assert_eq!(rec["code"], "precondition");
    assert!(rec["witness"]["at"].is_number());
}

#[test]
fn low_alpha_is_a_domain_exit() {
    let d = workdir("low");
    let cfg = write(&d, "m.json", CANONICAL);
    let out = run(&["classify", "--alpha", "0.5", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let rec = stderr_record(&out);
    assert_eq!(rec["code"], "precondition");
    assert_eq!(rec["witness"]["at"], 0.5);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_record(&out)["code"], "usage");

    let d = workdir("strict");
    let cfg = write(&d, "m.json", &CANONICAL.replace(r#""p":2"#, r#""p":2,"extra":1"#));
    let out = run(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_record(&out)["code"], "json");
}

#[test]
fn integrate_writes_profile_and_summary() {
    let d = workdir("integrate");
    let cfg = write(&d, "m.json", CANONICAL);
    let csv = d.join("traj.csv");
    let out = run(&["integrate", "--config", &cfg, "--alpha", "6", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,u,du,m,E"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 5);
    // 17 significant digits
    assert_eq!(first[1], "6.0000000000000000e0");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("traj.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "crossing");
    assert_eq!(summary["stop_event"], "u_hit_zero");
}

#[test]
fn sweep_csv_is_independent_of_threads() {
    let d = workdir("threads");
    let cfg = write(&d, "m.json", CANONICAL);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = run(&["--threads", threads, "classify", "--config", &cfg, "--alpha-range", "1.01:50:24", "--out", "-"]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("alpha,kind,R,u_R,du_R,E_R,r0,crossing_measure\n"));
    assert_eq!(text.lines().count(), 25);
}

#[test]
fn ground_state_and_dirichlet() {
    let d = workdir("gs");
    let cfg = write(&d, "m.json", CANONICAL);
    let out = run(&["ground-state", "--config", &cfg, "--bracket", "4.2", "4.4", "--tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(0));
    let b: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(b["width"].as_f64().unwrap() < 1e-8);

    let out = run(&["ground-state", "--config", &cfg, "--bracket", "10", "20"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["dirichlet", "--config", &cfg, "--radius", "1.0", "--seed", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((s["radius"].as_f64().unwrap() - 1.0).abs() < 1e-10);

    let out = run(&["dirichlet", "--config", &cfg, "--radius", "1e4", "--seed", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_record(&out)["code"], "out_of_range");
}

#[test]
fn variational_csv_and_fd_report() {
    let d = workdir("var");
    let cfg = write(&d, "m.json", CANONICAL);
    let csv = d.join("var.csv");
    let rep = d.join("var.json");
    let out = run(&[
        "variational",
        "--config",
        &cfg,
        "--alpha",
        "6",
        "--out",
        csv.to_str().unwrap(),
        "--fd-check",
        "1e-6",
        "--report",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(fs::read_to_string(&csv).unwrap().starts_with("r,phi,dphi,theta\n"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert!(r["fd_check"]["phi_max_rel_err"].as_f64().unwrap() < 1e-4);
}

#[test]
fn transformed_config_is_accepted_everywhere() {
    let d = workdir("transform");
    let ab = write(&d, "ab.json", AB);
    let k = d.join("k.json");
    let table = d.join("map.csv");
    let out = run(&["transform", "--config", &ab, "--out", k.to_str().unwrap(), "--table", table.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&table).unwrap().starts_with("r,t,h,K_tilde\n"));
    let k = k.to_str().unwrap();
    for args in [
        vec!["check", "--config", k],
        vec!["integrate", "--config", k, "--alpha", "6"],
        vec!["classify", "--config", k, "--alpha", "6"],
        vec!["variational", "--config", k, "--alpha", "6"],
        vec!["dirichlet", "--config", k, "--radius", "1.0", "--seed", "10"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn verify_all_passes_and_is_deterministic() {
    let d = workdir("verify");
    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let path = d.join(format!("report-{threads}.json"));
        let out = run(&["--threads", threads, "verify", "--suite", "all", "--report", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(fs::read(&path).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let r: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(r["pass"], true);
    for c in r["checks"].as_array().unwrap() {
        assert!(c.get("delta_tested").is_some() && c["witnesses"].is_array());
        assert_eq!(c["pass"], true, "{c}");
    }
}

#[test]
fn failing_suite_exits_3() {
    // hypotheses fail for this weight, so the report is negative
    let d = workdir("verify-fail");
    let cfg = write(&d, "m.json", &CANONICAL.replace(r#""sigma":2"#, r#""sigma":3"#));
    let out = run(&["verify", "--suite", "hypotheses", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["pass"], false);
}
