//! Declarative objectives graded against an episode and its effect log.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::interp::{EffectLog, EffectRow, Event};
use crate::sim::{Episode, Outcome};
use crate::track::{Track, WaypointKind};

fn default_max_speed() -> f64 {
    0.1
}

fn default_within_steps() -> usize {
    10
}

/// One gradeable requirement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Requirement {
    /// The body color after the start handler equals `color`.
    StartColor { color: String },
    /// Speed drops below `max_speed` within `within_steps` steps of the
    /// waypoint triggering.
    #[serde(rename_all = "camelCase")]
    Stop {
        waypoint: String,
        #[serde(default = "default_max_speed")]
        max_speed: f64,
        #[serde(default = "default_within_steps")]
        within_steps: usize,
    },
    /// The waypoint handler calls `function`.
    Calls { waypoint: String, function: String },
    /// The waypoint handler's final pause request lasts at least
    /// `min_seconds`.
    #[serde(rename_all = "camelCase")]
    Pause { waypoint: String, min_seconds: f64 },
    /// The waypoint handler unloads and leaves no passengers aboard.
    UnloadAll { waypoint: String },
    /// The episode ends with `outcome`.
    Outcome { outcome: Outcome },
}

impl Requirement {
    pub fn id(&self) -> String {
        match self {
            Requirement::StartColor { .. } => "start_color".into(),
            Requirement::Stop { waypoint, .. } => format!("stop@{waypoint}"),
            Requirement::Calls { waypoint, function } => format!("{function}@{waypoint}"),
            Requirement::Pause { waypoint, .. } => format!("pause@{waypoint}"),
            Requirement::UnloadAll { waypoint } => format!("unload_all@{waypoint}"),
            Requirement::Outcome { .. } => "outcome".into(),
        }
    }

    pub fn description(&self) -> String {
        match self {
            Requirement::StartColor { color } => format!("set color to {color} at start"),
            Requirement::Stop {
                waypoint,
                max_speed,
                within_steps,
            } => format!("stop (speed < {max_speed} m/s) within {within_steps} steps of {waypoint}"),
            Requirement::Calls { waypoint, function } => format!("call {function}() at {waypoint}"),
            Requirement::Pause {
                waypoint,
                min_seconds,
            } => format!("pause at least {min_seconds} s at {waypoint}"),
            Requirement::UnloadAll { waypoint } => {
                format!("unload all passengers at {waypoint}")
            }
            Requirement::Outcome { outcome } => format!("finish with outcome {outcome}"),
        }
    }

    pub fn waypoint(&self) -> Option<&str> {
        match self {
            Requirement::Stop { waypoint, .. }
            | Requirement::Calls { waypoint, .. }
            | Requirement::Pause { waypoint, .. }
            | Requirement::UnloadAll { waypoint } => Some(waypoint),
            Requirement::StartColor { .. } | Requirement::Outcome { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Objective {
    pub name: String,
    pub track_id: String,
    pub requirements: Vec<Requirement>,
}

impl Objective {
    pub fn from_json(text: &str) -> Result<Objective, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("objective serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RequirementResult {
    pub id: String,
    pub description: String,
    pub passed: bool,
    /// Step of the satisfying evidence, or of the first violation.
    pub step: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub objective: String,
    pub passed: bool,
    pub requirements: Vec<RequirementResult>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &RequirementResult> {
        self.requirements.iter().filter(|r| !r.passed)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("objective targets track `{expected}` but got `{actual}`")]
    TrackMismatch { expected: String, actual: String },
    #[error("objective references waypoint \"{0}\" which is not on the track")]
    MissingWaypoint(String),
}

/// The school-bus task: yellow at start, stop/flash/board at every pickup,
/// stop/flash/pause/unload at the dropoff, then complete the route.
pub fn bus_route_objective(track: &Track) -> Objective {
    let mut requirements = vec![Requirement::StartColor {
        color: "yellow".into(),
    }];
    let stop = |waypoint: &str| Requirement::Stop {
        waypoint: waypoint.into(),
        max_speed: default_max_speed(),
        within_steps: default_within_steps(),
    };
    let calls = |waypoint: &str, function: &str| Requirement::Calls {
        waypoint: waypoint.into(),
        function: function.into(),
    };
    for wp in track.waypoints() {
        match wp.kind {
            WaypointKind::Pickup => {
                requirements.push(stop(&wp.name));
                requirements.push(calls(&wp.name, "flashLights"));
                requirements.push(calls(&wp.name, "loadPassenger"));
            }
            WaypointKind::Dropoff => {
                requirements.push(stop(&wp.name));
                requirements.push(calls(&wp.name, "flashLights"));
                requirements.push(Requirement::Pause {
                    waypoint: wp.name.clone(),
                    min_seconds: 2.0,
                });
                requirements.push(Requirement::UnloadAll {
                    waypoint: wp.name.clone(),
                });
            }
            WaypointKind::Custom => {}
        }
    }
    requirements.push(Requirement::Outcome {
        outcome: Outcome::Completed,
    });
    Objective {
        name: "School bus".into(),
        track_id: track.id().to_string(),
        requirements,
    }
}

/// A program that satisfies [`bus_route_objective`] on the builtin bus route.
pub const REFERENCE_BUS_SOLUTION: &str = r#"// School bus route
on start {
    setColor("yellow")
}

at "stop1" {
    pauseDriving(2.0)
    flashLights(3)
    loadPassenger()
}

at "stop2" {
    pauseDriving(2.0)
    flashLights(3)
    loadPassenger()
}

at "stop3" {
    pauseDriving(2.0)
    flashLights(3)
    loadPassenger()
}

at "school" {
    pauseDriving(2.5)
    flashLights(3)
    unloadAllPassengers()
}
"#;

/// Grades `episode` and its effect log. Pure: depends only on the arguments.
pub fn evaluate_objective(
    episode: &Episode,
    log: &EffectLog,
    objective: &Objective,
    track: &Track,
) -> Result<Report, ObjectiveError> {
    for actual in [track.id(), episode.track_id.as_str()] {
        if actual != objective.track_id {
            return Err(ObjectiveError::TrackMismatch {
                expected: objective.track_id.clone(),
                actual: actual.to_string(),
            });
        }
    }
    for req in &objective.requirements {
        if let Some(name) = req.waypoint() {
            if track.waypoint(name).is_none() {
                return Err(ObjectiveError::MissingWaypoint(name.to_string()));
            }
        }
    }
    let requirements: Vec<_> = objective
        .requirements
        .iter()
        .map(|req| {
            let (passed, step, detail) = grade(req, episode, log);
            RequirementResult {
                id: req.id(),
                description: req.description(),
                passed,
                step,
                detail,
            }
        })
        .collect();
    Ok(Report {
        objective: objective.name.clone(),
        passed: requirements.iter().all(|r| r.passed),
        requirements,
    })
}

fn trigger_step(episode: &Episode, waypoint: &str) -> Option<usize> {
    episode
        .steps
        .iter()
        .find(|s| s.events.iter().any(|e| e == waypoint))
        .map(|s| s.t)
}

fn handler_rows<'a>(log: &'a EffectLog, waypoint: &str) -> Vec<&'a EffectRow> {
    let event = Event::Waypoint(waypoint.to_string());
    log.rows.iter().filter(|r| r.event == event).collect()
}

fn grade(req: &Requirement, episode: &Episode, log: &EffectLog) -> (bool, Option<usize>, String) {
    let not_reached = |w: &str| (false, None, format!("waypoint \"{w}\" was never reached"));
    match req {
        Requirement::StartColor { color } => {
            let last = log.rows.iter().filter(|r| r.event == Event::Start).last();
            let actual = last.map_or(super::interp::DEFAULT_COLOR, |r| r.color.as_str());
            let step = last.map(|r| r.t);
            (actual == color, step, format!("color after start is {actual}"))
        }
        Requirement::Stop {
            waypoint,
            max_speed,
            within_steps,
        } => {
            let Some(t0) = trigger_step(episode, waypoint) else {
                return not_reached(waypoint);
            };
            let stopped = episode
                .steps
                .iter()
                .filter(|s| s.t >= t0 && s.t <= t0 + within_steps)
                .find(|s| s.speed < *max_speed);
            match stopped {
                Some(s) => (true, Some(s.t), format!("stopped at step {}", s.t)),
                None => (
                    false,
                    Some(t0),
                    format!("still moving {within_steps} steps after step {t0}"),
                ),
            }
        }
        Requirement::Calls { waypoint, function } => {
            let Some(t0) = trigger_step(episode, waypoint) else {
                return not_reached(waypoint);
            };
            match handler_rows(log, waypoint)
                .into_iter()
                .find(|r| &r.function == function)
            {
                Some(r) => (true, Some(r.t), format!("{function}() called")),
                None => (false, Some(t0), format!("{function}() not called")),
            }
        }
        Requirement::Pause {
            waypoint,
            min_seconds,
        } => {
            let Some(t0) = trigger_step(episode, waypoint) else {
                return not_reached(waypoint);
            };
            let last = handler_rows(log, waypoint)
                .into_iter()
                .filter(|r| r.function == "pauseDriving" || r.function == "resumeDriving")
                .last();
            let secs = last
                .filter(|r| r.function == "pauseDriving")
                .and_then(|r| r.args.first())
                .and_then(|a| a.as_f64());
            match secs {
                Some(s) if s >= *min_seconds => (true, last.map(|r| r.t), format!("paused {s} s")),
                Some(s) => (false, last.map(|r| r.t), format!("paused only {s} s")),
                None => (false, Some(t0), "no pause requested".into()),
            }
        }
        Requirement::UnloadAll { waypoint } => {
            let Some(t0) = trigger_step(episode, waypoint) else {
                return not_reached(waypoint);
            };
            let rows = handler_rows(log, waypoint);
            let unload = rows.iter().find(|r| r.function == "unloadAllPassengers");
            let remaining = rows.last().map(|r| r.passengers);
            match (unload, remaining) {
                (Some(r), Some(0)) => (true, Some(r.t), "all passengers unloaded".into()),
                (Some(r), Some(n)) => (false, Some(r.t), format!("{n} passengers remain")),
                _ => (false, Some(t0), "unloadAllPassengers() not called".into()),
            }
        }
        Requirement::Outcome { outcome } => {
            let last = episode.steps.last().map(|s| s.t);
            (
                episode.outcome == *outcome,
                last,
                format!("episode ended {}", episode.outcome),
            )
        }
    }
}
