//! Episode execution and the JSON-lines episode log.

use std::collections::HashSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::observe::{render_observation, FrameStack, ObsConfig, Observation};
use super::reward::{check_termination, check_waypoints, compute_reward, TileSet};
use super::{step_dynamics, Action, SimError, SimParams, VehicleState, ACTION_COUNT};
use crate::dsl::{self, Diagnostic, EffectLog, Event, PauseRequest, Program, VehicleEffects};
use crate::policy::dist;
use crate::track::{Point, Track};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    OffTrack,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Completed => "completed",
            Outcome::OffTrack => "off_track",
            Outcome::Timeout => "timeout",
        })
    }
}

/// State after step `t` together with the action that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub t: usize,
    #[serde(rename = "pos")]
    pub position: Point,
    pub heading: f64,
    pub speed: f64,
    pub action: Action,
    pub reward: f64,
    pub new_tiles: Vec<usize>,
    /// Waypoints triggered on this step.
    pub events: Vec<String>,
}

/// First line of an episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeHeader {
    pub id: u64,
    pub track_id: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub total_reward: f64,
    pub endpoint: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub id: u64,
    pub track_id: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub total_reward: f64,
    pub outcome: Outcome,
    pub endpoint: Point,
}

#[derive(Debug, Error)]
pub enum EpisodeFormatError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl Episode {
    pub fn header(&self) -> EpisodeHeader {
        EpisodeHeader {
            id: self.id,
            track_id: self.track_id.clone(),
            seed: self.seed,
            outcome: self.outcome,
            total_reward: self.total_reward,
            endpoint: self.endpoint,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header()).expect("header serializes");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Episode, EpisodeFormatError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| EpisodeFormatError::Invalid("empty episode log".into()))?;
        let header: EpisodeHeader = serde_json::from_str(first)
            .map_err(|source| EpisodeFormatError::Json { line: 1, source })?;
        let steps = lines
            .map(|(i, l)| {
                serde_json::from_str::<StepRecord>(l)
                    .map_err(|source| EpisodeFormatError::Json { line: i + 1, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ep = Episode {
            id: header.id,
            track_id: header.track_id,
            seed: header.seed,
            steps,
            total_reward: header.total_reward,
            outcome: header.outcome,
            endpoint: header.endpoint,
        };
        ep.validate().map_err(EpisodeFormatError::Invalid)?;
        Ok(ep)
    }

    /// Checks the record invariants: non-empty, increasing `t`, consistent
    /// total reward and endpoint.
    pub fn validate(&self) -> Result<(), String> {
        let last = self.steps.last().ok_or("episode has no steps")?;
        if self.steps.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err("step indices are not strictly increasing".into());
        }
        let sum = self.recomputed_total();
        if (sum - self.total_reward).abs() > 1e-6 {
            return Err(format!(
                "totalReward {} disagrees with step sum {sum}",
                self.total_reward
            ));
        }
        if last.position != self.endpoint {
            return Err("endpoint differs from the last position".into());
        }
        Ok(())
    }

    pub fn recomputed_total(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tiles_visited(&self) -> usize {
        self.steps.iter().map(|s| s.new_tiles.len()).sum::<usize>() + 1
    }
}

/// Result of a single [`Environment::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: Option<Outcome>,
    pub events: Vec<String>,
    pub paused: bool,
}

/// One track, one vehicle, one episode at a time. Shared by the episode
/// runner and the trainer's rollout collector.
pub struct Environment<'a> {
    track: &'a Track,
    params: SimParams,
    obs_cfg: ObsConfig,
    state: VehicleState,
    frames: FrameStack,
    obs: Observation,
    visited: TileSet,
    triggered: HashSet<String>,
    steps: Vec<StepRecord>,
    total: f64,
    seed: u64,
    done: Option<Outcome>,
    rng: ChaCha8Rng,
}

impl<'a> Environment<'a> {
    pub fn new(track: &'a Track, params: SimParams, obs_cfg: ObsConfig) -> Result<Self, SimError> {
        params.validate()?;
        let (pos, heading) = track.start_pose();
        let frames = FrameStack::new(obs_cfg.clone());
        let obs = frames.observation();
        Ok(Environment {
            track,
            visited: TileSet::new(track.tile_count()),
            params,
            obs_cfg,
            state: VehicleState::at_rest(pos, heading),
            frames,
            obs,
            triggered: HashSet::new(),
            steps: Vec::new(),
            total: 0.0,
            seed: 0,
            done: None,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    /// Places the vehicle at rest on the start pose. The start tile counts
    /// as visited; `seed` reseeds the action-sampling stream.
    pub fn reset(&mut self, seed: u64) -> &Observation {
        let (pos, heading) = self.track.start_pose();
        self.state = VehicleState::at_rest(pos, heading);
        self.frames = FrameStack::new(self.obs_cfg.clone());
        self.visited = TileSet::new(self.track.tile_count());
        self.visited.insert(self.track.project(pos).tile_index);
        self.triggered.clear();
        self.steps.clear();
        self.total = 0.0;
        self.seed = seed;
        self.done = None;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.obs = render_observation(self.track, &self.state, &mut self.frames);
        &self.obs
    }

    pub fn track(&self) -> &Track {
        self.track
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn steps_taken(&self) -> usize {
        self.steps.len()
    }

    pub fn visited(&self) -> &TileSet {
        &self.visited
    }

    pub fn done(&self) -> Option<Outcome> {
        self.done
    }

    /// Advances one step. While paused the action is replaced by Brake and
    /// the step neither earns reward nor visits tiles.
    pub fn step(&mut self, action: Action) -> StepOutcome {
        assert!(self.done.is_none(), "step called on a finished episode");
        let paused = self.state.is_paused();
        let action = if paused { Action::Brake } else { action };
        self.state = step_dynamics(&self.state, action, &self.params);
        let proj = self.track.project(self.state.position);
        let fresh = !paused && !self.visited.contains(proj.tile_index);
        let done = check_termination(
            self.visited.len() + usize::from(fresh),
            self.track.tile_count(),
            proj.lateral,
            self.track.width() / 2.0,
            self.steps.len() + 1,
            &self.params,
        );
        let (reward, new_tiles) = if paused {
            (0.0, Vec::new())
        } else {
            compute_reward(self.track, &self.visited, &proj, done, &self.params)
        };
        for &tile in &new_tiles {
            self.visited.insert(tile);
        }
        let events = check_waypoints(self.track, self.state.position, &self.triggered);
        self.triggered.extend(events.iter().cloned());
        self.total += reward;
        self.steps.push(StepRecord {
            t: self.steps.len(),
            position: self.state.position,
            heading: self.state.heading,
            speed: self.state.speed,
            action,
            reward,
            new_tiles,
            events: events.clone(),
        });
        self.done = done;
        if done.is_none() {
            self.obs = render_observation(self.track, &self.state, &mut self.frames);
        }
        StepOutcome {
            reward,
            done,
            events,
            paused,
        }
    }

    pub fn request_pause(&mut self, req: PauseRequest) {
        self.state.paused_until = match req {
            PauseRequest::Pause(secs) => Some(self.state.time + secs),
            PauseRequest::Resume => None,
        };
    }

    /// Finished episode record. Panics if the episode has not terminated.
    pub fn take_episode(&mut self, id: u64) -> Episode {
        let outcome = self.done.expect("episode has not terminated");
        let steps = std::mem::take(&mut self.steps);
        let endpoint = steps.last().map_or(self.state.position, |s| s.position);
        Episode {
            id,
            track_id: self.track.id().to_string(),
            seed: self.seed,
            steps,
            total_reward: self.total,
            outcome,
            endpoint,
        }
    }
}

/// Anything that maps the current observation to action logits.
pub trait Driver {
    fn logits(
        &mut self,
        obs: &Observation,
        state: &VehicleState,
        track: &Track,
    ) -> Result<[f64; ACTION_COUNT], SimError>;

    /// Input shape `(frames, height, width)` the driver expects, if fixed.
    fn input_shape(&self) -> Option<(usize, usize, usize)> {
        None
    }
}

#[derive(Clone, Copy, Debug)]
pub enum RunMode<'p> {
    /// Sample from the policy distribution.
    Train,
    /// Greedy actions.
    Test,
    /// Greedy actions with a callback program attached.
    Programmed(&'p Program),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRun {
    pub episode: Episode,
    pub effect_log: EffectLog,
    pub effects: VehicleEffects,
    /// Runtime faults raised by the program.
    pub diagnostics: Vec<Diagnostic>,
}

/// Runs one full episode. Deterministic in (driver, track, seed, mode, params).
pub fn run_episode(
    driver: &mut dyn Driver,
    track: &Track,
    seed: u64,
    mode: RunMode<'_>,
    params: &SimParams,
) -> Result<EpisodeRun, SimError> {
    run_episode_with(driver, track, seed, mode, params, &ObsConfig::default())
}

pub fn run_episode_with(
    driver: &mut dyn Driver,
    track: &Track,
    seed: u64,
    mode: RunMode<'_>,
    params: &SimParams,
    obs_cfg: &ObsConfig,
) -> Result<EpisodeRun, SimError> {
    let program = match mode {
        RunMode::Programmed(p) => {
            let diags = dsl::check(p, track);
            if dsl::has_errors(&diags) {
                return Err(SimError::ProgramError(diags));
            }
            Some(p)
        }
        _ => None,
    };
    let mut env = Environment::new(track, params.clone(), obs_cfg.clone())?;
    if let Some(expected) = driver.input_shape() {
        let actual = (obs_cfg.frames, obs_cfg.size, obs_cfg.size);
        if expected != actual {
            return Err(SimError::ShapeMismatch { expected, actual });
        }
    }
    env.reset(seed);
    let mut effects = VehicleEffects::default();
    let mut log = EffectLog::default();
    let mut diagnostics = Vec::new();
    let mut fire = |env: &mut Environment, event: Event, t: usize, fx: &mut VehicleEffects, log: &mut EffectLog| {
        if let Some(p) = program {
            let d = dsl::dispatch_event(p, &event, t, env.state(), fx, log);
            if let Some(req) = d.pause {
                env.request_pause(req);
            }
            diagnostics.extend(d.diagnostics);
        }
    };
    fire(&mut env, Event::Start, 0, &mut effects, &mut log);
    loop {
        let logits = driver.logits(env.observation(), env.state(), track)?;
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(SimError::NonFinite);
        }
        let index = match mode {
            RunMode::Train => dist::sample_action(&logits, env.rng()).0,
            RunMode::Test | RunMode::Programmed(_) => dist::argmax(&logits),
        };
        let action = Action::from_index(index).expect("index below ACTION_COUNT");
        let t = env.steps_taken();
        let out = env.step(action);
        for name in out.events {
            fire(&mut env, Event::Waypoint(name), t, &mut effects, &mut log);
        }
        fire(&mut env, Event::Step, t, &mut effects, &mut log);
        if out.done.is_some() {
            fire(&mut env, Event::End, t, &mut effects, &mut log);
            break;
        }
    }
    Ok(EpisodeRun {
        episode: env.take_episode(0),
        effect_log: log,
        effects,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{builtin_track, oval};

    struct Fixed(usize);

    impl Driver for Fixed {
        fn logits(&mut self, _: &Observation, _: &VehicleState, _: &Track) -> Result<[f64; 5], SimError> {
            let mut l = [0.0; 5];
            l[self.0] = 1.0;
            Ok(l)
        }
    }

    struct Uniform;

    impl Driver for Uniform {
        fn logits(&mut self, _: &Observation, _: &VehicleState, _: &Track) -> Result<[f64; 5], SimError> {
            Ok([0.0; 5])
        }
    }

    #[test]
    fn idle_driver_times_out() {
        let params = SimParams::default();
        let run = run_episode(&mut Fixed(4), &oval(), 3, RunMode::Test, &params).unwrap();
        let ep = run.episode;
        assert_eq!(ep.outcome, Outcome::Timeout);
        assert_eq!(ep.steps.len(), params.max_steps);
        assert!((ep.total_reward - (-0.1 * params.max_steps as f64)).abs() < 1e-6);
    }

    #[test]
    fn sampling_is_deterministic() {
        let params = SimParams::default();
        let track = builtin_track("rapid-7").unwrap();
        let a = run_episode(&mut Uniform, &track, 11, RunMode::Train, &params).unwrap();
        let b = run_episode(&mut Uniform, &track, 11, RunMode::Train, &params).unwrap();
        assert_eq!(a.episode.to_jsonl(), b.episode.to_jsonl());
        let c = run_episode(&mut Uniform, &track, 12, RunMode::Train, &params).unwrap();
        assert_ne!(a.episode.to_jsonl(), c.episode.to_jsonl());
    }

    #[test]
    fn jsonl_round_trip() {
        let params = SimParams::default();
        let track = builtin_track("rapid-1").unwrap();
        let run = run_episode(&mut Uniform, &track, 5, RunMode::Train, &params).unwrap();
        let text = run.episode.to_jsonl();
        let back = Episode::from_jsonl(&text).unwrap();
        assert_eq!(back, run.episode);
        assert!(text.starts_with(r#"{"id":0,"trackId":"rapid-1","seed":5,"outcome":"#));
        let truncated = &text[..text.len() / 2];
        assert!(Episode::from_jsonl(truncated).is_err());
    }

    #[test]
    fn accelerating_straight_leaves_track_or_completes() {
        let params = SimParams::default();
        let run = run_episode(&mut Fixed(0), &oval(), 0, RunMode::Test, &params).unwrap();
        assert_eq!(run.episode.outcome, Outcome::OffTrack);
        let last = run.episode.steps.last().unwrap();
        assert!(last.reward <= -100.0 + 50.0);
    }
}
