//! End-to-end checks of the command-line surface: the generate → plan →
//! simulate round trip, exit codes, and the machine-readable error channel.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn planner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planner"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("planner-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn generate_plan_simulate_round_trip() {
    let scenario = tmp("scenario.json");
    let policy = tmp("policy.json");
    let report = tmp("report.json");

    let out = planner(&[
        "gen-scenario",
        "--machines",
        "4",
        "--exploits",
        "4",
        "--days",
        "30",
        "--seed",
        "7",
        "--out",
        scenario.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");

    let out = planner(&[
        "plan",
        "--scenario",
        scenario.to_str().unwrap(),
        "--policy-out",
        policy.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("value"), "{stdout}");
    let report_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(report_json["total_value"].as_f64().is_some());
    assert!(report_json["cache"]["solves"].as_u64().is_some());

    let out = planner(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--policy",
        policy.to_str().unwrap(),
        "--runs",
        "200",
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{out:?}");
    let sim: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(sim["runs"].as_u64(), Some(200));

    for path in [scenario, policy, report] {
        let _ = fs::remove_file(path);
    }
}

#[test]
fn global_solve_and_simulate_with_dump() {
    let scenario = tmp("global-scenario.json");
    let policy = tmp("global-policy.json");
    let dump = tmp("model.dump");

    assert!(planner(&[
        "gen-scenario",
        "--machines",
        "2",
        "--exploits",
        "2",
        "--days",
        "20",
        "--out",
        scenario.to_str().unwrap(),
    ])
    .status
    .success());

    let out = planner(&[
        "solve-global",
        "--scenario",
        scenario.to_str().unwrap(),
        "--policy-out",
        policy.to_str().unwrap(),
        "--dump-pomdp",
        dump.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let dump_text = fs::read_to_string(&dump).unwrap();
    assert!(dump_text.starts_with("pomdp 1"));
    assert!(dump_text.trim_end().ends_with("end"));

    let out = planner(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--policy",
        policy.to_str().unwrap(),
        "--runs",
        "100",
    ]);
    assert!(out.status.success(), "{out:?}");

    for path in [scenario, policy, dump] {
        let _ = fs::remove_file(path);
    }
}

#[test]
fn cap_exceeded_exits_with_category() {
    let scenario = tmp("cap-scenario.json");
    assert!(planner(&[
        "gen-scenario",
        "--machines",
        "6",
        "--exploits",
        "6",
        "--out",
        scenario.to_str().unwrap(),
    ])
    .status
    .success());

    let out = planner(&[
        "solve-global",
        "--scenario",
        scenario.to_str().unwrap(),
        "--cap-states",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stderr)).unwrap();
    assert_eq!(err["error"]["category"].as_str(), Some("cap-exceeded"));

    let _ = fs::remove_file(scenario);
}

#[test]
fn invalid_scenario_exits_with_invalid_input() {
    let scenario = tmp("broken.json");
    fs::write(&scenario, "{\"elapsed_days\": 1}").unwrap();
    let out = planner(&["plan", "--scenario", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stderr)).unwrap();
    assert_eq!(err["error"]["category"].as_str(), Some("invalid-input"));
    let _ = fs::remove_file(scenario);
}

#[test]
fn missing_file_exits_with_io() {
    let out = planner(&["plan", "--scenario", "/nonexistent/nope.json"]);
    assert_eq!(out.status.code(), Some(9));
}
