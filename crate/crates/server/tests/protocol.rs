//! Request/response/event-stream transcripts against recorded goldens.

mod support;

use support::{check_scenario, SCENARIOS};

fn run(name: &str) {
    let (_, scenario) = SCENARIOS.iter().find(|(n, _)| *n == name).unwrap();
    if let Err(e) = check_scenario(name, *scenario) {
        panic!("{e}");
    }
}

#[test]
fn models() {
    run("models");
}

#[test]
fn tracks() {
    run("tracks");
}

#[test]
fn training_and_backlog_replay() {
    run("training");
}

#[test]
fn model_busy_and_cancel() {
    run("busy_cancel");
}

#[test]
fn run_test_and_validation() {
    run("run_test");
}

#[test]
fn restart_fails_inflight_jobs() {
    run("restart");
}

#[test]
fn every_endpoint_has_a_golden() {
    let mut text = String::new();
    for (name, _) in SCENARIOS {
        text.push_str(&std::fs::read_to_string(support::golden_dir().join(format!("{name}.json"))).unwrap());
    }
    for ep in trackpilot_server::ENDPOINTS {
        assert!(text.contains(&format!("\"endpoint\": \"{ep}\"")), "no golden exchange for {ep}");
    }
    for ev in ["job_started", "episode_completed", "job_done", "job_cancelled", "job_failed"] {
        assert!(text.contains(&format!("\"event\": \"{ev}\"")), "no golden event {ev}");
    }
    for kind in ["ModelBusy", "ValidationFailed", "UnknownId", "BadRequest", "UnknownEndpoint"] {
        assert!(text.contains(&format!("\"kind\": \"{kind}\"")), "no golden error {kind}");
    }
}
