use std::f64::consts::{PI, TAU};

use super::{Action, SimParams, VehicleState};
use crate::track::Point;

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = (a + PI).rem_euclid(TAU) - PI;
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// Advances the vehicle one `dt`. A paused vehicle brakes regardless of
/// `action`.
pub fn step_dynamics(state: &VehicleState, action: Action, params: &SimParams) -> VehicleState {
    let action = if state.is_paused() { Action::Brake } else { action };
    let dt = params.dt;
    let mut speed = state.speed;
    let mut heading = state.heading;
    let authority = (state.speed / params.full_turn_speed).min(1.0);
    match action {
        Action::Accelerate => speed = (speed + params.accel * dt).min(params.v_max),
        Action::Brake => speed = (speed - params.brake_decel * dt).max(0.0),
        Action::SteerLeft => heading += params.turn_rate * authority * dt,
        Action::SteerRight => heading -= params.turn_rate * authority * dt,
        Action::NoChange => {}
    }
    speed = (speed - params.drag * dt).max(0.0);
    heading = normalize_angle(heading);
    let position = state
        .position
        .add(Point::new(heading.cos(), heading.sin()).scale(speed * dt));
    let time = state.time + dt;
    let paused_until = state.paused_until.filter(|&until| time < until - 1e-9);
    VehicleState {
        position,
        heading,
        speed,
        time,
        paused_until,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest() -> VehicleState {
        VehicleState::at_rest(Point::new(0.0, 0.0), 0.0)
    }

    #[test]
    fn rest_is_fixed_point() {
        let s = step_dynamics(&rest(), Action::NoChange, &SimParams::default());
        assert_eq!(s.speed, 0.0);
        assert_eq!(s.position, Point::new(0.0, 0.0));
    }

    #[test]
    fn accelerate_from_rest() {
        let s = step_dynamics(&rest(), Action::Accelerate, &SimParams::default());
        assert!((s.speed - 0.18).abs() < 1e-12, "{}", s.speed);
        assert!((s.position.x - 0.018).abs() < 1e-12);
    }

    #[test]
    fn heading_wraps() {
        let mut st = rest();
        st.heading = PI;
        st.speed = 5.0;
        let s = step_dynamics(&st, Action::SteerLeft, &SimParams::default());
        assert!(s.heading > -PI && s.heading <= PI);
        assert!((s.heading - (-PI + 0.15)).abs() < 1e-12, "{}", s.heading);
    }

    #[test]
    fn normalize_edges() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert_eq!(normalize_angle(0.5), 0.5);
    }

    #[test]
    fn steering_scales_with_speed() {
        let p = SimParams::default();
        let mut st = rest();
        st.speed = 2.0;
        let s = step_dynamics(&st, Action::SteerRight, &p);
        assert!((s.heading + 1.5 * 0.5 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn pause_forces_brake_and_expires() {
        let p = SimParams::default();
        let mut st = rest();
        st.speed = 3.0;
        st.paused_until = Some(0.25);
        let a = step_dynamics(&st, Action::Accelerate, &p);
        assert!((a.speed - (3.0 - 0.4 - 0.02)).abs() < 1e-12);
        assert!(a.paused_until.is_some());
        let b = step_dynamics(&a, Action::Accelerate, &p);
        let c = step_dynamics(&b, Action::Accelerate, &p);
        assert!(c.paused_until.is_none());
        let d = step_dynamics(&c, Action::Accelerate, &p);
        assert!(d.speed > c.speed);
    }

    #[test]
    fn speed_capped() {
        let p = SimParams::default();
        let mut st = rest();
        st.speed = 12.0;
        let s = step_dynamics(&st, Action::Accelerate, &p);
        assert!(s.speed <= p.v_max);
        assert!(s.position.distance(st.position) <= p.v_max * p.dt + 1e-12);
    }
}
