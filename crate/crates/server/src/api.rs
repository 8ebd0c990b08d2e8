//! Endpoint dispatch. Everything here is transport independent; the HTTP
//! layer only moves JSON in and out of [`Server::handle`].

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::thread;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use trackpilot_core::dsl::{check, evaluate_objective, has_errors, parse_with_diagnostics, Objective};
use trackpilot_core::policy::{ModelMeta, NetConfig, PolicyNet};
use trackpilot_core::ppo::{train, TrainError, TrainHyper, TrainOptions};
use trackpilot_core::sim::{run_episode_with, Episode, RunMode, SimParams};
use trackpilot_core::store::{validate_id, Store, StoreError};
use trackpilot_core::track::{
    build_track, default_tile_count, smooth_polyline, Point, TrackSpec, Waypoint, DEFAULT_SPACING,
};

use crate::clock::{Clock, SystemClock};
use crate::error::{dsl_diagnostic, ApiError, ErrorKind};
use crate::jobs::{EventKind, JobHandle, JobRecord, JobState, JobView};

/// Called on the training thread after each published episode with the job
/// id and the episode's ordinal within the job.
pub type EpisodeHook = Arc<dyn Fn(&str, u64) + Send + Sync>;

/// Largest episode count one job may request.
pub const MAX_JOB_EPISODES: usize = 100_000;

pub const ENDPOINTS: [&str; 14] = [
    "create_model",
    "list_models",
    "get_model",
    "create_track",
    "list_tracks",
    "get_track",
    "start_training",
    "cancel_training",
    "get_job",
    "run_test",
    "get_overlay",
    "get_reward_curve",
    "get_episode",
    "list_episodes",
];

#[derive(Clone)]
pub struct ServerConfig {
    pub net: NetConfig,
    pub hyper: TrainHyper,
    pub sim: SimParams,
    pub clock: Arc<dyn Clock>,
    pub install_builtins: bool,
    pub episode_hook: Option<EpisodeHook>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            net: NetConfig::default(),
            hyper: TrainHyper::default(),
            sim: SimParams::default(),
            clock: Arc::new(SystemClock),
            install_builtins: true,
            episode_hook: None,
        }
    }
}

struct Inner {
    store: Store,
    config: ServerConfig,
    jobs: Mutex<BTreeMap<u64, Arc<JobHandle>>>,
    /// Serializes id allocation and the one-active-job-per-model check.
    ids: Mutex<()>,
}

/// Cheap to clone; clones share the store and job table.
#[derive(Clone)]
pub struct Server {
    inner: Arc<Inner>,
}

fn req<T: DeserializeOwned>(body: &Value) -> Result<T, ApiError> {
    serde_json::from_value(body.clone()).map_err(|e| ApiError::bad_request(format!("invalid request: {e}")))
}

fn invalid(message: impl Into<String>) -> ApiError {
    ApiError::new(ErrorKind::ValidationFailed, message)
}

/// Numeric suffix of ids shaped like `<prefix>-<n>`.
fn id_number(id: &str, prefix: &str) -> Option<u64> {
    id.strip_prefix(prefix)?.strip_prefix('-')?.parse().ok()
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CreateModel {
    name: String,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ModelRef {
    model_id: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct TrackRef {
    track_id: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct JobRef {
    job_id: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct EpisodeRef {
    episode_id: u64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PairRef {
    model_id: String,
    track_id: String,
    episode_id: Option<u64>,
}

fn default_true() -> bool {
    true
}

/// A drawn track. `points` is the raw stroke unless `smooth` is false, in
/// which case it is used as the centerline directly.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct NewTrack {
    id: Option<String>,
    name: String,
    width: f64,
    #[serde(default)]
    closed: bool,
    #[serde(alias = "centerline")]
    points: Vec<Point>,
    tile_count: Option<usize>,
    #[serde(default)]
    waypoints: Vec<Waypoint>,
    #[serde(default = "default_true")]
    smooth: bool,
}

#[derive(Deserialize)]
struct CreateTrack {
    track: NewTrack,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct StartTraining {
    model_id: String,
    track_id: String,
    episodes: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RunTest {
    model_id: String,
    track_id: String,
    #[serde(default)]
    seed: u64,
    program_source: Option<String>,
    objective: Option<Objective>,
}

fn polyline_length(pts: &[Point], closed: bool) -> f64 {
    let open: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
    match (closed, pts.first(), pts.last()) {
        (true, Some(a), Some(b)) => open + a.distance(*b),
        _ => open,
    }
}

fn track_summary(spec: &TrackSpec, length: f64) -> Value {
    json!({
        "id": spec.id,
        "name": spec.name,
        "width": spec.width,
        "closed": spec.closed,
        "tileCount": spec.tile_count,
        "length": length,
        "waypoints": spec.waypoints,
    })
}

impl Server {
    /// Opens the store at `root`, loads the job table and marks jobs that
    /// were still queued or running as failed.
    pub fn open(root: impl Into<PathBuf>, config: ServerConfig) -> Result<Server, StoreError> {
        let store = Store::open_with(root, config.net)?;
        if config.install_builtins {
            store.install_builtin_tracks()?;
        }
        let server = Server {
            inner: Arc::new(Inner {
                store,
                config,
                jobs: Mutex::new(BTreeMap::new()),
                ids: Mutex::new(()),
            }),
        };
        server.load_jobs()?;
        Ok(server)
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    fn jobs_dir(&self) -> PathBuf {
        self.inner.store.root().join("jobs")
    }

    fn load_jobs(&self) -> Result<(), StoreError> {
        let dir = self.jobs_dir();
        let io = |e| StoreError::Io {
            path: dir.clone(),
            source: e,
        };
        fs::create_dir_all(&dir).map_err(io)?;
        let mut table = self.inner.jobs.lock().expect("job table lock");
        for entry in fs::read_dir(&dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let record: JobRecord = match fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
            {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("skipping unreadable job record {}: {e}", path.display());
                    continue;
                }
            };
            let Some(n) = id_number(&record.job.job_id, "job") else {
                continue;
            };
            let handle = Arc::new(JobHandle::new(record));
            if !handle.view().state.is_terminal() {
                handle.push(
                    EventKind::JobFailed {
                        error: "server restarted before the job finished".into(),
                    },
                    |r| self.persist_job(r),
                );
            }
            table.insert(n, handle);
        }
        Ok(())
    }

    fn persist_job(&self, record: &JobRecord) {
        let path = self.jobs_dir().join(format!("{}.json", record.job.job_id));
        let text = serde_json::to_string(record).expect("job record serializes");
        if let Err(e) = self.inner.store.write_atomic(&path, text.as_bytes()) {
            log::error!("failed to persist job {}: {e}", record.job.job_id);
        }
    }

    pub fn job(&self, job_id: &str) -> Option<Arc<JobHandle>> {
        let n = id_number(job_id, "job")?;
        self.inner.jobs.lock().expect("job table lock").get(&n).cloned()
    }

    fn active_job(&self, model_id: &str) -> Option<String> {
        self.inner
            .jobs
            .lock()
            .expect("job table lock")
            .values()
            .map(|j| j.view())
            .find(|v| v.model_id == model_id && !v.state.is_terminal())
            .map(|v| v.job_id)
    }

    fn model_json(&self, meta: &ModelMeta) -> Value {
        json!({
            "modelId": meta.model_id,
            "name": meta.name,
            "trainedEpisodes": meta.trained_episodes,
            "createdAt": meta.created_at,
            "activeJob": self.active_job(&meta.model_id),
        })
    }

    /// Answers one request. `body` must be a JSON object with `"v": 1`;
    /// unknown fields are ignored.
    pub fn handle(&self, endpoint: &str, body: &Value) -> Result<Value, ApiError> {
        let obj = body
            .as_object()
            .ok_or_else(|| ApiError::bad_request("request body must be a JSON object"))?;
        match obj.get("v") {
            Some(v) if v == 1 => {}
            Some(v) => return Err(ApiError::bad_request(format!("unsupported protocol version {v}"))),
            None => return Err(ApiError::bad_request("missing protocol version \"v\": 1")),
        }
        match endpoint {
            "create_model" => self.create_model(req(body)?),
            "list_models" => self.list_models(),
            "get_model" => self.get_model(req(body)?),
            "create_track" => self.create_track(req(body)?),
            "list_tracks" => self.list_tracks(),
            "get_track" => self.get_track(req(body)?),
            "start_training" => self.start_training(req(body)?),
            "cancel_training" => self.cancel_training(req(body)?),
            "get_job" => self.get_job(req(body)?),
            "run_test" => self.run_test(req(body)?),
            "get_overlay" => self.get_overlay(req(body)?),
            "get_reward_curve" => self.get_reward_curve(req(body)?),
            "get_episode" => self.get_episode(req(body)?),
            "list_episodes" => self.list_episodes(req(body)?),
            other => Err(ApiError::new(
                ErrorKind::UnknownEndpoint,
                format!("unknown endpoint `{other}`"),
            )),
        }
    }

    fn create_model(&self, r: CreateModel) -> Result<Value, ApiError> {
        let name = r.name.trim();
        if name.is_empty() || name.chars().count() > 100 {
            return Err(invalid("model name must be 1 to 100 characters"));
        }
        let _ids = self.inner.ids.lock().expect("id lock");
        let store = &self.inner.store;
        let n = store
            .list_models()
            .iter()
            .filter_map(|m| id_number(&m.model_id, "model"))
            .max()
            .unwrap_or(0)
            + 1;
        let meta = ModelMeta {
            model_id: format!("model-{n}"),
            name: name.to_string(),
            trained_episodes: 0,
            created_at: self.inner.config.clock.now(),
        };
        let net = PolicyNet::<f32>::new(self.inner.config.net, r.seed.unwrap_or(n))
            .map_err(|e| ApiError::internal(e.to_string()))?;
        store.create_model(&meta, &net)?;
        Ok(json!({"v": 1, "model": self.model_json(&meta)}))
    }

    fn list_models(&self) -> Result<Value, ApiError> {
        let mut models = self.inner.store.list_models();
        models.sort_by_key(|m| (id_number(&m.model_id, "model").unwrap_or(u64::MAX), m.model_id.clone()));
        let models: Vec<Value> = models.iter().map(|m| self.model_json(m)).collect();
        Ok(json!({"v": 1, "models": models}))
    }

    fn get_model(&self, r: ModelRef) -> Result<Value, ApiError> {
        let meta = self.inner.store.model_meta(&r.model_id)?;
        Ok(json!({"v": 1, "model": self.model_json(&meta)}))
    }

    fn create_track(&self, r: CreateTrack) -> Result<Value, ApiError> {
        let t = r.track;
        let centerline = if t.smooth {
            smooth_polyline(&t.points, DEFAULT_SPACING, t.closed).map_err(|e| ApiError::track(&e))?
        } else {
            t.points
        };
        let tile_count = t
            .tile_count
            .unwrap_or_else(|| default_tile_count(polyline_length(&centerline, t.closed)));
        let _ids = self.inner.ids.lock().expect("id lock");
        let store = &self.inner.store;
        let id = match t.id {
            Some(id) => {
                validate_id(&id).map_err(|_| invalid(format!("invalid track id `{id}`")))?;
                if store.has_track(&id) {
                    return Err(invalid(format!("track `{id}` already exists")));
                }
                id
            }
            None => {
                let n = store
                    .track_ids()
                    .iter()
                    .filter_map(|id| id_number(id, "track"))
                    .max()
                    .unwrap_or(0)
                    + 1;
                format!("track-{n}")
            }
        };
        let track = build_track(TrackSpec {
            id,
            name: t.name,
            width: t.width,
            closed: t.closed,
            tile_count,
            centerline,
            waypoints: t.waypoints,
        })
        .map_err(|e| ApiError::track(&e))?;
        store.put_track(&track)?;
        Ok(json!({"v": 1, "track": track.to_spec(), "length": track.length()}))
    }

    fn list_tracks(&self) -> Result<Value, ApiError> {
        let (tracks, warnings) = self.inner.store.list_tracks();
        let tracks: Vec<Value> = tracks.iter().map(|t| track_summary(&t.to_spec(), t.length())).collect();
        Ok(json!({"v": 1, "tracks": tracks, "warnings": warnings}))
    }

    fn get_track(&self, r: TrackRef) -> Result<Value, ApiError> {
        let track = self.inner.store.get_track(&r.track_id)?;
        Ok(json!({"v": 1, "track": track.to_spec(), "length": track.length()}))
    }

    fn start_training(&self, r: StartTraining) -> Result<Value, ApiError> {
        if r.episodes == 0 || r.episodes > MAX_JOB_EPISODES {
            return Err(invalid(format!("episodes must be between 1 and {MAX_JOB_EPISODES}")));
        }
        let store = &self.inner.store;
        store.model_meta(&r.model_id)?;
        if !store.has_track(&r.track_id) {
            return Err(ApiError::unknown("track", &r.track_id));
        }
        let _ids = self.inner.ids.lock().expect("id lock");
        if let Some(active) = self.active_job(&r.model_id) {
            return Err(ApiError::new(
                ErrorKind::ModelBusy,
                format!("model `{}` is already training in {active}", r.model_id),
            ));
        }
        let handle = {
            let mut table = self.inner.jobs.lock().expect("job table lock");
            let n = table.keys().next_back().copied().unwrap_or(0) + 1;
            let record = JobRecord {
                job: JobView {
                    job_id: format!("job-{n}"),
                    model_id: r.model_id,
                    track_id: r.track_id,
                    episodes: r.episodes,
                    seed: r.seed,
                    state: JobState::Queued,
                    progress: 0,
                    created_at: self.inner.config.clock.now(),
                },
                events: Vec::new(),
            };
            self.persist_job(&record);
            let handle = Arc::new(JobHandle::new(record));
            table.insert(n, handle.clone());
            handle
        };
        let view = handle.view();
        let server = self.clone();
        thread::Builder::new()
            .name(view.job_id.clone())
            .spawn(move || server.run_job(&handle))
            .map_err(|e| ApiError::internal(format!("cannot start training thread: {e}")))?;
        Ok(json!({"v": 1, "job": view}))
    }

    fn run_job(&self, job: &JobHandle) {
        let view = job.view();
        let persist = |r: &JobRecord| self.persist_job(r);
        job.push(
            EventKind::JobStarted {
                model_id: view.model_id.clone(),
                track_id: view.track_id.clone(),
                episodes: view.episodes,
            },
            persist,
        );
        let terminal = match self.train_job(job, &view) {
            Ok(k) => k,
            Err(error) => {
                log::error!("{} failed: {error}", view.job_id);
                EventKind::JobFailed { error }
            }
        };
        job.push(terminal, persist);
    }

    fn train_job(&self, job: &JobHandle, view: &JobView) -> Result<EventKind, String> {
        let store = &self.inner.store;
        let (mut net, mut meta) = store.load_model(&view.model_id).map_err(|e| e.to_string())?;
        let track = store.get_track(&view.track_id).map_err(|e| e.to_string())?;
        let opts = TrainOptions {
            episodes: view.episodes,
            seed: view.seed,
            hyper: self.inner.config.hyper.clone(),
            sim: self.inner.config.sim.clone(),
        };
        let mut store_error = None;
        let mut sink = |ep: &Episode| {
            if store_error.is_some() {
                return;
            }
            match store.put_episode(&view.model_id, ep, None) {
                Ok(id) => {
                    job.push(
                        EventKind::EpisodeCompleted {
                            ordinal: ep.id,
                            episode_id: id,
                            total_reward: ep.total_reward,
                            outcome: ep.outcome,
                            steps: ep.steps.len(),
                        },
                        |r| self.persist_job(r),
                    );
                    if let Some(hook) = &self.inner.config.episode_hook {
                        hook(&view.job_id, ep.id);
                    }
                }
                Err(e) => {
                    store_error = Some(format!("storing episode: {e}"));
                    job.cancel.store(true, Ordering::SeqCst);
                }
            }
        };
        let result = train(&mut net, &track, &opts, &mut sink, &job.cancel);
        if let Some(e) = store_error {
            return Err(e);
        }
        let (trained, kind) = match result {
            Ok(s) => (
                s.trained_episodes,
                EventKind::JobDone {
                    trained_episodes: s.trained_episodes,
                },
            ),
            Err(TrainError::Cancelled(s)) => (
                s.trained_episodes,
                EventKind::JobCancelled {
                    completed_episodes: s.episodes.len() as u64,
                },
            ),
            Err(e) => return Err(e.to_string()),
        };
        meta.trained_episodes += trained;
        store.save_model(&meta, &net).map_err(|e| e.to_string())?;
        Ok(kind)
    }

    fn cancel_training(&self, r: JobRef) -> Result<Value, ApiError> {
        let job = self.job(&r.job_id).ok_or_else(|| ApiError::unknown("job", &r.job_id))?;
        let view = job.view();
        let requested = !view.state.is_terminal();
        if requested {
            job.cancel.store(true, Ordering::SeqCst);
        }
        Ok(json!({"v": 1, "job": view, "cancelRequested": requested}))
    }

    fn get_job(&self, r: JobRef) -> Result<Value, ApiError> {
        let job = self.job(&r.job_id).ok_or_else(|| ApiError::unknown("job", &r.job_id))?;
        Ok(json!({"v": 1, "job": job.view()}))
    }

    fn run_test(&self, r: RunTest) -> Result<Value, ApiError> {
        let store = &self.inner.store;
        let (mut net, _) = store.load_model(&r.model_id)?;
        let track = store.get_track(&r.track_id)?;
        let mut warnings = Vec::new();
        let program = match &r.program_source {
            Some(src) => {
                let (program, mut diags) = parse_with_diagnostics(src);
                if !has_errors(&diags) {
                    diags.extend(check(&program, &track));
                }
                if has_errors(&diags) {
                    return Err(ApiError::program(&diags));
                }
                warnings = diags.iter().map(dsl_diagnostic).collect();
                Some(program)
            }
            None => None,
        };
        if let Some(obj) = &r.objective {
            if obj.track_id != track.id() {
                return Err(invalid(format!(
                    "objective is for track `{}`, not `{}`",
                    obj.track_id,
                    track.id()
                )));
            }
        }
        let mode = match &program {
            Some(p) => RunMode::Programmed(p),
            None => RunMode::Test,
        };
        let obs_cfg = net.config().obs_config();
        let run = run_episode_with(&mut net, &track, r.seed, mode, &self.inner.config.sim, &obs_cfg)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let report = match &r.objective {
            Some(obj) => Some(
                evaluate_objective(&run.episode, &run.effect_log, obj, &track)
                    .map_err(|e| invalid(e.to_string()))?,
            ),
            None => None,
        };
        let effects = program.as_ref().map(|_| &run.effect_log);
        let id = store.put_episode(&r.model_id, &run.episode, effects)?;
        let ep = &run.episode;
        Ok(json!({
            "v": 1,
            "episodeId": id,
            "modelId": r.model_id,
            "trackId": r.track_id,
            "seed": r.seed,
            "totalReward": ep.total_reward,
            "outcome": ep.outcome,
            "steps": ep.steps.len(),
            "tilesVisited": ep.tiles_visited(),
            "tileCount": track.tile_count(),
            "endpoint": ep.endpoint,
            "effects": program.as_ref().map(|_| &run.effects),
            "runtimeDiagnostics": run.diagnostics.iter().map(dsl_diagnostic).collect::<Vec<_>>(),
            "warnings": warnings,
            "report": report,
        }))
    }

    fn get_overlay(&self, r: PairRef) -> Result<Value, ApiError> {
        let overlay = self.inner.store.overlay(&r.model_id, &r.track_id, r.episode_id)?;
        Ok(json!({"v": 1, "overlay": overlay}))
    }

    fn get_reward_curve(&self, r: PairRef) -> Result<Value, ApiError> {
        let curve = self.inner.store.reward_curve(&r.model_id, &r.track_id)?;
        Ok(json!({"v": 1, "modelId": r.model_id, "trackId": r.track_id, "curve": curve}))
    }

    fn list_episodes(&self, r: PairRef) -> Result<Value, ApiError> {
        let (episodes, warnings) = self.inner.store.list_episodes(&r.model_id, &r.track_id)?;
        Ok(json!({"v": 1, "episodes": episodes, "warnings": warnings}))
    }

    fn get_episode(&self, r: EpisodeRef) -> Result<Value, ApiError> {
        let store = &self.inner.store;
        let (model_id, ep) = store.get_episode(r.episode_id)?;
        let effects = store.get_effects(r.episode_id)?;
        Ok(json!({
            "v": 1,
            "modelId": model_id,
            "header": ep.header(),
            "steps": ep.steps,
            "effects": effects,
        }))
    }
}
