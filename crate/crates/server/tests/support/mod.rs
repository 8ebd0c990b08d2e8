//! Protocol contract harness: a real HTTP server on an ephemeral port, a
//! blocking client, and scripted scenarios whose request/response/event
//! transcripts are compared against golden files.
//!
//! Set `UPDATE_GOLDENS=1` to rewrite the golden files.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use trackpilot_core::dsl::{bus_route_objective, REFERENCE_BUS_SOLUTION};
use trackpilot_core::policy::NetConfig;
use trackpilot_core::ppo::TrainHyper;
use trackpilot_core::sim::SimParams;
use trackpilot_core::track::bus_route;
use trackpilot_server::{serve_on, FixedClock, Server, ServerConfig};

pub const CREATED_AT: &str = "2024-05-01T12:00:00Z";

/// Lets a test hold the training thread right after an episode is published.
#[derive(Default)]
pub struct Gate {
    state: Mutex<(bool, Option<(String, u64)>)>,
    cv: Condvar,
}

impl Gate {
    fn hook(&self, job: &str, ordinal: u64) {
        let mut s = self.state.lock().unwrap();
        while s.0 {
            s.1 = Some((job.to_string(), ordinal));
            self.cv.notify_all();
            s = self.cv.wait(s).unwrap();
        }
        s.1 = None;
    }

    pub fn close(&self) {
        self.state.lock().unwrap().0 = true;
    }

    pub fn open(&self) {
        self.state.lock().unwrap().0 = false;
        self.cv.notify_all();
    }

    /// Blocks until the training thread is parked; returns (job, ordinal).
    pub fn wait_parked(&self) -> (String, u64) {
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(p) = s.1.clone() {
                return p;
            }
            let (next, timeout) = self.cv.wait_timeout(s, Duration::from_secs(60)).unwrap();
            assert!(!timeout.timed_out(), "training thread never parked");
            s = next;
        }
    }
}

pub fn test_config(gate: Arc<Gate>) -> ServerConfig {
    ServerConfig {
        net: NetConfig::shrunken(),
        hyper: TrainHyper {
            rollout: 64,
            minibatch: 16,
            epochs: 1,
            ..TrainHyper::default()
        },
        sim: SimParams {
            max_steps: 40,
            ..SimParams::default()
        },
        clock: Arc::new(FixedClock(CREATED_AT.into())),
        install_builtins: true,
        episode_hook: Some(Arc::new(move |job: &str, ordinal: u64| gate.hook(job, ordinal))),
    }
}

pub struct Harness {
    pub root: PathBuf,
    pub base: String,
    pub gate: Arc<Gate>,
    client: reqwest::blocking::Client,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl Harness {
    pub fn start(root: &Path) -> Harness {
        let gate = Arc::new(Gate::default());
        let server = Server::open(root, test_config(gate.clone())).expect("server opens");
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                serve_on(server, listener, async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
            });
        });
        Harness {
            root: root.to_path_buf(),
            base,
            gate,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .unwrap(),
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    /// Stops the HTTP server. Training threads are left as they are.
    pub fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }

    pub fn call_raw(&self, endpoint: &str, body: &str) -> (u16, Value) {
        let resp = self
            .client
            .post(format!("{}/api/{endpoint}", self.base))
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .expect("request sent");
        let status = resp.status().as_u16();
        (status, resp.json().expect("JSON response"))
    }

    pub fn call(&self, endpoint: &str, body: Value) -> (u16, Value) {
        self.call_raw(endpoint, &body.to_string())
    }

    /// Reads a job's event stream to its end. Each event is checked for
    /// consistency between the SSE framing and its JSON payload.
    pub fn events(&self, job_id: &str, last_event_id: Option<u64>) -> (u16, Vec<Value>) {
        let mut req = self.client.get(format!("{}/api/events/{job_id}", self.base));
        if let Some(id) = last_event_id {
            req = req.header("Last-Event-ID", id.to_string());
        }
        let resp = req.send().expect("stream opened");
        let status = resp.status().as_u16();
        let text = resp.text().expect("stream read");
        if status != 200 {
            return (status, vec![serde_json::from_str(&text).expect("JSON error body")]);
        }
        (status, parse_sse(&text))
    }
}

impl Drop for Harness {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn parse_sse(text: &str) -> Vec<Value> {
    let mut out = Vec::new();
    for block in text.split("\n\n") {
        let (mut name, mut id, mut data) = (None, None, String::new());
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                name = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("id:") {
                id = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push_str(v.trim_start());
            }
        }
        if data.is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&data).expect("event data is JSON");
        assert_eq!(name.as_deref(), v["event"].as_str(), "SSE event name matches payload");
        assert_eq!(id, Some(v["seq"].to_string()), "SSE id matches seq");
        out.push(v);
    }
    out
}

/// Recorded exchanges of one scenario.
#[derive(Default)]
pub struct Transcript {
    pub entries: Vec<Value>,
}

impl Transcript {
    pub fn call(&mut self, h: &Harness, endpoint: &str, body: Value) -> Value {
        let (status, response) = h.call(endpoint, body.clone());
        self.entries.push(json!({
            "endpoint": endpoint,
            "request": body,
            "status": status,
            "response": response,
        }));
        response
    }

    pub fn call_raw(&mut self, h: &Harness, endpoint: &str, body: &str) -> Value {
        let (status, response) = h.call_raw(endpoint, body);
        self.entries.push(json!({
            "endpoint": endpoint,
            "rawRequest": body,
            "status": status,
            "response": response,
        }));
        response
    }

    pub fn stream(&mut self, h: &Harness, job_id: &str, last_event_id: Option<u64>) -> Vec<Value> {
        let (status, events) = h.events(job_id, last_event_id);
        self.entries.push(json!({
            "stream": job_id,
            "lastEventId": last_event_id,
            "status": status,
            "events": events,
        }));
        events
    }

    pub fn note(&mut self, text: &str) {
        self.entries.push(json!({ "note": text }));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Value::Array(self.entries.clone())).unwrap() + "\n"
    }
}

pub fn golden_dir() -> PathBuf {
    // Resolved through the workspace so other crates can reuse this harness.
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../server/tests/goldens")
}

/// Compares against `<name>.json`, or rewrites it when `UPDATE_GOLDENS` is
/// set. Returns a description of the first difference.
pub fn compare_golden(name: &str, t: &Transcript) -> Result<(), String> {
    let path = golden_dir().join(format!("{name}.json"));
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, t.to_json()).unwrap();
        return Ok(());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let golden: Vec<Value> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if golden.len() != t.entries.len() {
        return Err(format!(
            "{name}: {} exchanges recorded, golden has {}",
            t.entries.len(),
            golden.len()
        ));
    }
    for (i, (g, a)) in golden.iter().zip(&t.entries).enumerate() {
        if g != a {
            return Err(format!(
                "{name}: exchange {i} differs\n  golden: {}\n  actual: {}",
                truncate(&g.to_string()),
                truncate(&a.to_string())
            ));
        }
    }
    Ok(())
}

fn truncate(s: &str) -> String {
    if s.len() > 600 {
        format!("{}...", &s[..600])
    } else {
        s.to_string()
    }
}

fn v1(mut body: Value) -> Value {
    body["v"] = json!(1);
    body
}

pub fn scenario_models(root: &Path) -> Transcript {
    let h = Harness::start(root);
    let mut t = Transcript::default();
    t.call(&h, "create_model", v1(json!({"name": "School Bus"})));
    t.call(&h, "create_model", v1(json!({"name": "Racer", "seed": 3})));
    t.call(&h, "list_models", v1(json!({})));
    t.call(&h, "get_model", v1(json!({"modelId": "model-1", "extra": "ignored"})));
    t.call(&h, "get_model", v1(json!({"modelId": "model-99"})));
    t.call(&h, "create_model", v1(json!({"name": "   "})));
    t.call(&h, "create_model", json!({"name": "No Version"}));
    t.call(&h, "create_model", json!({"v": 2, "name": "Future"}));
    t.call(&h, "create_model", v1(json!({})));
    t.call(&h, "launch_rocket", v1(json!({})));
    t.call_raw(&h, "list_models", "{not json");
    t
}

pub fn scenario_tracks(root: &Path) -> Transcript {
    let h = Harness::start(root);
    let mut t = Transcript::default();
    t.call(&h, "list_tracks", v1(json!({})));
    t.call(&h, "get_track", v1(json!({"trackId": "rapid-1"})));
    let stroke: Vec<[f64; 2]> = (0..=10).map(|i| [i as f64 * 6.0, (i as f64 * 0.7).sin() * 3.0]).collect();
    t.call(
        &h,
        "create_track",
        v1(json!({"track": {
            "name": "Wiggle",
            "width": 6.0,
            "closed": false,
            "points": stroke,
            "waypoints": [{"name": "gate", "kind": "custom", "position": [30.0, 0.0]}]
        }})),
    );
    t.call(&h, "get_track", v1(json!({"trackId": "track-1"})));
    t.call(
        &h,
        "create_track",
        v1(json!({"track": {
            "name": "Twins",
            "width": 6.0,
            "points": stroke,
            "waypoints": [
                {"name": "a", "kind": "pickup", "position": [6.0, 0.0]},
                {"name": "a", "kind": "dropoff", "position": [48.0, 0.0]}
            ]
        }})),
    );
    t.call(
        &h,
        "create_track",
        v1(json!({"track": {"name": "Dot", "width": 6.0, "points": [[1.0, 1.0]]}})),
    );
    t.call(
        &h,
        "create_track",
        v1(json!({"track": {"id": "oval", "name": "Copy", "width": 6.0, "points": stroke}})),
    );
    t.call(
        &h,
        "create_track",
        v1(json!({"track": {
            "id": "exact",
            "name": "Exact",
            "width": 4.0,
            "smooth": false,
            "tileCount": 5,
            "points": [[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]]
        }})),
    );
    t.call(&h, "get_track", v1(json!({"trackId": "nowhere"})));
    t
}

fn wait_done(h: &Harness, job: &str) {
    // The stream only ends after the terminal event.
    let (status, events) = h.events(job, None);
    assert_eq!(status, 200);
    assert!(events.last().is_some_and(|e| e["event"] != "job_started"));
}

pub fn scenario_training(root: &Path) -> Transcript {
    let h = Harness::start(root);
    let mut t = Transcript::default();
    t.call(&h, "create_model", v1(json!({"name": "Trainee"})));
    t.call(
        &h,
        "start_training",
        v1(json!({"modelId": "model-1", "trackId": "oval", "episodes": 3, "seed": 5})),
    );
    t.note("live subscription while the job runs");
    let live = t.stream(&h, "job-1", None);
    t.note("late subscription replays the backlog and closes");
    let replay = t.stream(&h, "job-1", None);
    assert_eq!(live, replay);
    t.stream(&h, "job-1", Some(2));
    t.stream(&h, "job-1", Some(4));
    t.call(&h, "get_job", v1(json!({"jobId": "job-1"})));
    t.call(&h, "get_model", v1(json!({"modelId": "model-1"})));
    t.call(&h, "list_episodes", v1(json!({"modelId": "model-1", "trackId": "oval"})));
    t.call(&h, "get_reward_curve", v1(json!({"modelId": "model-1", "trackId": "oval"})));
    t.call(&h, "get_reward_curve", v1(json!({"modelId": "model-1", "trackId": "bus-route"})));
    t.call(&h, "get_overlay", v1(json!({"modelId": "model-1", "trackId": "oval"})));
    t.call(&h, "get_overlay", v1(json!({"modelId": "model-1", "trackId": "oval", "episodeId": 2})));
    t.call(&h, "get_overlay", v1(json!({"modelId": "model-1", "trackId": "oval", "episodeId": 77})));
    t.call(&h, "get_episode", v1(json!({"episodeId": 1})));
    t.call(&h, "get_episode", v1(json!({"episodeId": 404})));
    t.call(&h, "cancel_training", v1(json!({"jobId": "job-1"})));
    t.call(&h, "cancel_training", v1(json!({"jobId": "job-9"})));
    t.stream(&h, "job-9", None);
    t.call(
        &h,
        "start_training",
        v1(json!({"modelId": "model-1", "trackId": "oval", "episodes": 0})),
    );
    t.call(
        &h,
        "start_training",
        v1(json!({"modelId": "model-1", "trackId": "nowhere", "episodes": 2})),
    );
    t.call(
        &h,
        "start_training",
        v1(json!({"modelId": "model-7", "trackId": "oval", "episodes": 2})),
    );
    t
}

pub fn scenario_busy_cancel(root: &Path) -> Transcript {
    let h = Harness::start(root);
    let mut t = Transcript::default();
    t.call(&h, "create_model", v1(json!({"name": "Busy"})));
    h.gate.close();
    t.call(
        &h,
        "start_training",
        v1(json!({"modelId": "model-1", "trackId": "oval", "episodes": 50})),
    );
    let parked = h.gate.wait_parked();
    assert_eq!(parked, ("job-1".to_string(), 1));
    t.note("job-1 is held after its first episode");
    t.call(&h, "get_model", v1(json!({"modelId": "model-1"})));
    t.call(
        &h,
        "start_training",
        v1(json!({"modelId": "model-1", "trackId": "oval", "episodes": 5})),
    );
    t.call(&h, "cancel_training", v1(json!({"jobId": "job-1"})));
    h.gate.open();
    let events = t.stream(&h, "job-1", None);
    assert!(events.iter().all(|e| e["event"] != "job_done"));
    t.call(&h, "get_job", v1(json!({"jobId": "job-1"})));
    t.call(&h, "list_episodes", v1(json!({"modelId": "model-1", "trackId": "oval"})));
    t.note("the model is free again");
    t.call(
        &h,
        "start_training",
        v1(json!({"modelId": "model-1", "trackId": "oval", "episodes": 2, "seed": 1})),
    );
    wait_done(&h, "job-2");
    t.stream(&h, "job-2", None);
    t.call(&h, "get_model", v1(json!({"modelId": "model-1"})));
    t
}

pub fn scenario_run_test(root: &Path) -> Transcript {
    let h = Harness::start(root);
    let mut t = Transcript::default();
    t.call(&h, "create_model", v1(json!({"name": "School Bus"})));
    t.call(&h, "run_test", v1(json!({"modelId": "model-1", "trackId": "oval", "seed": 7})));
    t.call(
        &h,
        "run_test",
        v1(json!({
            "modelId": "model-1",
            "trackId": "bus-route",
            "seed": 7,
            "programSource": "on start {\n  setColor(\"yellow\"\n}\n"
        })),
    );
    t.call(
        &h,
        "run_test",
        v1(json!({
            "modelId": "model-1",
            "trackId": "bus-route",
            "seed": 7,
            "programSource": "at \"nowhere\" { flashLights(2) }\non step { honk() }\n"
        })),
    );
    let objective = bus_route_objective(&bus_route());
    t.call(
        &h,
        "run_test",
        v1(json!({
            "modelId": "model-1",
            "trackId": "bus-route",
            "seed": 7,
            "programSource": REFERENCE_BUS_SOLUTION,
            "objective": objective,
        })),
    );
    t.call(&h, "get_episode", v1(json!({"episodeId": 2})));
    t.call(
        &h,
        "run_test",
        v1(json!({
            "modelId": "model-1",
            "trackId": "oval",
            "seed": 7,
            "objective": objective,
        })),
    );
    t.call(
        &h,
        "run_test",
        v1(json!({
            "modelId": "model-1",
            "trackId": "oval",
            "seed": 7,
            "programSource": "on start { setColor(\"mauve\") }"
        })),
    );
    t.call(&h, "run_test", v1(json!({"modelId": "model-5", "trackId": "oval", "seed": 7})));
    t
}

/// Server restart with a job held mid-run: the job comes back failed and the
/// episode it finished is still stored.
pub fn scenario_restart(root: &Path) -> Transcript {
    let mut t = Transcript::default();
    let first = Harness::start(root);
    t.call(&first, "create_model", v1(json!({"name": "Survivor"})));
    first.gate.close();
    t.call(
        &first,
        "start_training",
        v1(json!({"modelId": "model-1", "trackId": "oval", "episodes": 50})),
    );
    first.gate.wait_parked();
    t.note("server restarts while job-1 is held after its first episode");
    // The held thread stays parked for the rest of the process, standing in
    // for a process that died.
    first.stop();
    let second = Harness::start(root);
    t.call(&second, "get_job", v1(json!({"jobId": "job-1"})));
    t.stream(&second, "job-1", None);
    t.call(&second, "list_episodes", v1(json!({"modelId": "model-1", "trackId": "oval"})));
    t.call(&second, "get_model", v1(json!({"modelId": "model-1"})));
    t.call(
        &second,
        "start_training",
        v1(json!({"modelId": "model-1", "trackId": "oval", "episodes": 1})),
    );
    wait_done(&second, "job-2");
    t.stream(&second, "job-2", None);
    t
}

pub type Scenario = fn(&Path) -> Transcript;

pub const SCENARIOS: [(&str, Scenario); 6] = [
    ("models", scenario_models),
    ("tracks", scenario_tracks),
    ("training", scenario_training),
    ("busy_cancel", scenario_busy_cancel),
    ("run_test", scenario_run_test),
    ("restart", scenario_restart),
];

/// Runs one scenario in a fresh store and checks it against its golden.
pub fn check_scenario(name: &str, scenario: Scenario) -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let t = scenario(dir.path());
    compare_golden(name, &t)
}
