use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smart-tgpn"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_nominal_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = repo("scenarios/robot-nominal.json");
    let o = run(&[
        "simulate",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    for f in [
        "robot-nominal.trace.jsonl",
        "robot-nominal.report.json",
        "robot-nominal.report.txt",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("robot-nominal.report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["outcome"], "pass");
    assert_eq!(report["propositions"].as_array().unwrap().len(), 5);
}

#[test]
fn shipped_scenarios_resolve_by_name() {
    let o = run(&["simulate", "robot-nominal.scenario"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("outcome: pass"));
}

#[test]
fn verify_on_mutant_reports_bounded_autonomy_violation() {
    let o = run(&["verify", "robot-mutant-no-sm", "--json"]);
    assert_eq!(code(&o), 1);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p1 = report["propositions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|v| v["check"].as_str().unwrap().starts_with("P1"))
        .unwrap();
    assert_eq!(p1["outcome"], "violation");
}

#[test]
fn verify_stored_trace_matches_inline_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        code(&run(&["simulate", "robot-escalation", "--out", out])),
        0
    );
    let trace = dir.path().join("robot-escalation.trace.jsonl");
    let stored = run(&[
        "verify",
        "robot-escalation",
        "--trace",
        trace.to_str().unwrap(),
        "--json",
    ]);
    let inline = run(&["verify", "robot-escalation", "--json"]);
    let mut a: serde_json::Value = serde_json::from_str(&stdout(&stored)).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout(&inline)).unwrap();
    a.as_object_mut().unwrap().remove("trace");
    assert_eq!(a, b);
}

#[test]
fn same_seed_gives_identical_trace_files() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let args = [
            "simulate",
            "robot-escalation",
            "--policy",
            "random",
            "--seed",
            "7",
            "--out",
            d.path().to_str().unwrap(),
        ];
        assert_eq!(code(&run(&args)), 0);
    }
    let read = |d: &tempfile::TempDir| {
        std::fs::read(d.path().join("robot-escalation.trace.jsonl")).unwrap()
    };
    assert_eq!(read(&d1), read(&d2));
}

#[test]
fn seed_env_var_is_a_fallback() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let sim = |d: &tempfile::TempDir, env: Option<&str>| {
        let mut c = bin();
        c.args([
            "simulate",
            "robot-escalation",
            "--policy",
            "random",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        match env {
            Some(v) => c.env("SMART_TGPN_SEED", v),
            None => c.env_remove("SMART_TGPN_SEED"),
        };
        assert_eq!(code(&c.output().unwrap()), 0);
        std::fs::read_to_string(d.path().join("robot-escalation.trace.jsonl")).unwrap()
    };
    let with_env = sim(&d1, Some("11"));
    assert!(with_env.lines().next().unwrap().contains("\"seed\":11"));
    let without = sim(&d2, None);
    assert!(without.lines().next().unwrap().contains("\"seed\":0"));
}

#[test]
fn validate_dangling_arc_is_an_input_error() {
    let o = run(&["validate", repo("nets/dangling-arc.json").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn validate_builder_net_passes() {
    let o = run(&["validate", repo("nets/robot-pair.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn zeno_scenario_is_a_violation() {
    let o = run(&["simulate", "zeno-loop"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("Zeno"));
}

#[test]
fn unknown_subcommand_and_flag_exit_3() {
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&run(&["simulate", "robot-nominal", "--bogus"])), 3);
    assert_eq!(code(&run(&["simulate", "no-such-scenario"])), 3);
}

#[test]
fn explore_reports_states_and_formulas() {
    let o = run(&["explore", "robot-anomaly", "--json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["complete"].as_bool().unwrap());
    assert_eq!(v["formulas"].as_array().unwrap().len(), 2);
}

#[test]
fn report_summarizes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&run(&[
            "simulate",
            "robot-ur-spike",
            "--out",
            dir.path().to_str().unwrap()
        ])),
        0
    );
    let o = run(&[
        "report",
        dir.path()
            .join("robot-ur-spike.trace.jsonl")
            .to_str()
            .unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("quiescence"), "{s}");
}

#[test]
fn build_writes_a_valid_net() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    assert_eq!(code(&run(&["build", "--out", path.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["validate", path.to_str().unwrap()])), 0);
}

#[test]
fn reference_suite_passes() {
    let o = run(&["suite"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
}
