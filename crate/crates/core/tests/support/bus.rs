//! Bus-route end-to-end fixture: a scripted centerline-following driver
//! runs the bus track with the reference program and two mutations of it.

use trackpilot_core::dsl::{
    bus_route_objective, evaluate_objective, parse, Report, REFERENCE_BUS_SOLUTION,
};
use trackpilot_core::sim::{
    run_episode, Action, Driver, EpisodeRun, Observation, Outcome, RunMode, SimError, SimParams,
    VehicleState, ACTION_COUNT,
};
use trackpilot_core::track::{bus_route, Track};

/// Follows the centerline at a cruising speed by steering toward a point a
/// fixed distance ahead of the current projection. Uses the true state,
/// which is allowed for this fixture only.
pub struct CenterlineDriver {
    pub cruise: f64,
    pub lookahead: f64,
}

impl Default for CenterlineDriver {
    fn default() -> Self {
        CenterlineDriver {
            cruise: 3.0,
            lookahead: 4.0,
        }
    }
}

impl CenterlineDriver {
    pub fn action(&self, state: &VehicleState, track: &Track) -> Action {
        let s = track.project(state.position).s;
        let target = track.point_at((s + self.lookahead).min(track.length()));
        let d = target.sub(state.position);
        let want = d.y.atan2(d.x);
        let err = trackpilot_core::sim::normalize_angle(want - state.heading);
        if state.speed < 1.0 {
            Action::Accelerate
        } else if err > 0.04 {
            Action::SteerLeft
        } else if err < -0.04 {
            Action::SteerRight
        } else if state.speed < self.cruise {
            Action::Accelerate
        } else {
            Action::NoChange
        }
    }
}

impl Driver for CenterlineDriver {
    fn logits(
        &mut self,
        _: &Observation,
        state: &VehicleState,
        track: &Track,
    ) -> Result<[f64; ACTION_COUNT], SimError> {
        let mut l = [0.0; ACTION_COUNT];
        l[self.action(state, track).index()] = 1.0;
        Ok(l)
    }
}

pub fn run_program(source: &str) -> Result<(EpisodeRun, Report), String> {
    let track = bus_route();
    let program = parse(source).map_err(|d| format!("program does not parse: {d:?}"))?;
    let run = run_episode(
        &mut CenterlineDriver::default(),
        &track,
        0,
        RunMode::Programmed(&program),
        &SimParams::default(),
    )
    .map_err(|e| e.to_string())?;
    let report = evaluate_objective(&run.episode, &run.effect_log, &bus_route_objective(&track), &track)
        .map_err(|e| e.to_string())?;
    Ok((run, report))
}

fn failed_ids(report: &Report) -> Vec<String> {
    report.failures().map(|r| r.id.clone()).collect()
}

/// The reference solution passes, the empty program fails at least five
/// requirements and dropping the unload call fails exactly that requirement.
pub fn check_bus_route() -> Result<String, String> {
    let (run, reference) = run_program(REFERENCE_BUS_SOLUTION)?;
    if run.episode.outcome != Outcome::Completed {
        return Err(format!("driver did not complete the route: {}", run.episode.outcome));
    }
    if !reference.passed {
        return Err(format!("reference solution failed {:?}", failed_ids(&reference)));
    }

    let (_, empty) = run_program("")?;
    let empty_failures = failed_ids(&empty);
    if empty_failures.len() < 5 {
        return Err(format!("empty program failed only {empty_failures:?}"));
    }

    let mutated: String = REFERENCE_BUS_SOLUTION
        .lines()
        .filter(|l| !l.contains("unloadAllPassengers"))
        .collect::<Vec<_>>()
        .join("\n");
    if mutated == REFERENCE_BUS_SOLUTION {
        return Err("mutation removed nothing".into());
    }
    let (_, without_unload) = run_program(&mutated)?;
    let mutated_failures = failed_ids(&without_unload);
    if mutated_failures != ["unload_all@school"] {
        return Err(format!("without unload failed {mutated_failures:?}"));
    }
    Ok(format!(
        "reference {}/{} pass in {} steps; empty fails {}; without unload fails {:?}",
        reference.requirements.len(),
        reference.requirements.len(),
        run.episode.steps.len(),
        empty_failures.len(),
        mutated_failures
    ))
}
