//! Event dispatch and the vehicle function library semantics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ast::{Call, Literal, Program, Stmt};
use super::diag::{codes, Diagnostic};
use crate::sim::VehicleState;

pub const DEFAULT_COLOR: &str = "white";
const NAMED_COLORS: [&str; 6] = ["red", "yellow", "blue", "green", "white", "black"];

/// An event the engine dispatches to the program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    Start,
    Step,
    End,
    Waypoint(String),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Start => f.write_str("start"),
            Event::Step => f.write_str("step"),
            Event::End => f.write_str("end"),
            Event::Waypoint(name) => write!(f, "at:{name}"),
        }
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "start" => Ok(Event::Start),
            "step" => Ok(Event::Step),
            "end" => Ok(Event::End),
            _ => s
                .strip_prefix("at:")
                .map(|n| Event::Waypoint(n.to_string()))
                .ok_or_else(|| format!("unknown event `{s}`")),
        }
    }
}

impl Serialize for Event {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PauseRequest {
    Pause(f64),
    Resume,
}

/// Observable vehicle accessories driven by scripts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VehicleEffects {
    pub color: String,
    pub lights_flashes: u64,
    pub horn_beeps: u64,
    pub passengers: u64,
    /// Most recent pause/resume request.
    pub pause: Option<PauseRequest>,
}

impl Default for VehicleEffects {
    fn default() -> Self {
        VehicleEffects {
            color: DEFAULT_COLOR.to_string(),
            lights_flashes: 0,
            horn_beeps: 0,
            passengers: 0,
            pause: None,
        }
    }
}

/// One executed library call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub t: usize,
    pub event: Event,
    pub function: String,
    pub args: Vec<Literal>,
    pub passengers: u64,
    pub color: String,
}

/// Chronological record of executed calls.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EffectLog {
    pub rows: Vec<EffectRow>,
}

impl EffectLog {
    pub fn for_event<'a>(&'a self, event: &'a Event) -> impl Iterator<Item = &'a EffectRow> + 'a {
        self.rows.iter().filter(move |r| &r.event == event)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("effect row serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<EffectLog, serde_json::Error> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(EffectLog { rows })
    }
}

pub fn is_valid_color(c: &str) -> bool {
    if NAMED_COLORS.contains(&c) {
        return true;
    }
    c.len() == 7
        && c.starts_with('#')
        && c[1..].chars().all(|ch| ch.is_ascii_hexdigit())
}

/// Result of dispatching one event.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dispatch {
    /// Last pause/resume request issued by the handler, if any.
    pub pause: Option<PauseRequest>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Executes the handler for `event` (if the program has one) against
/// `effects`, appending every executed call to `log`.
///
/// A runtime fault aborts the rest of the handler and is reported in the
/// returned diagnostics; calls executed before the fault keep their effects.
pub fn dispatch_event(
    program: &Program,
    event: &Event,
    t: usize,
    _state: &VehicleState,
    effects: &mut VehicleEffects,
    log: &mut EffectLog,
) -> Dispatch {
    let handler = match event {
        Event::Start => program.on_start.as_ref(),
        Event::Step => program.on_step.as_ref(),
        Event::End => program.on_end.as_ref(),
        Event::Waypoint(name) => program.waypoint_handler(name),
    };
    let mut out = Dispatch::default();
    if let Some(h) = handler {
        let mut ctx = Exec {
            event,
            t,
            effects,
            log,
            pause: None,
        };
        if let Err(diag) = ctx.run(&h.body) {
            out.diagnostics.push(diag);
        }
        out.pause = ctx.pause;
    }
    out
}

struct Exec<'a> {
    event: &'a Event,
    t: usize,
    effects: &'a mut VehicleEffects,
    log: &'a mut EffectLog,
    pause: Option<PauseRequest>,
}

impl Exec<'_> {
    fn run(&mut self, body: &[Stmt]) -> Result<(), Diagnostic> {
        for stmt in body {
            match stmt {
                Stmt::Call(call) => self.call(call)?,
                Stmt::Repeat { count, body, .. } => {
                    for _ in 0..(*count).max(0) {
                        self.run(body)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn call(&mut self, call: &Call) -> Result<(), Diagnostic> {
        let arg = |i: usize| call.args.get(i).map(|a| &a.value);
        let fx = &mut *self.effects;
        match call.name.as_str() {
            "setColor" => {
                let color = match arg(0) {
                    Some(Literal::Str(s)) if is_valid_color(s) => s.clone(),
                    other => {
                        let shown = other.map(|l| l.to_string()).unwrap_or_default();
                        return Err(Diagnostic::error(
                            call.span,
                            codes::INVALID_COLOR,
                            format!("invalid color {shown}"),
                        ));
                    }
                };
                fx.color = color;
            }
            "beepHorn" => fx.horn_beeps += 1,
            "flashLights" => {
                let n = arg(0).and_then(Literal::as_f64).unwrap_or(0.0).max(0.0);
                fx.lights_flashes += n as u64;
            }
            "loadPassenger" => fx.passengers += 1,
            "unloadAllPassengers" => fx.passengers = 0,
            "pauseDriving" => {
                let secs = arg(0).and_then(Literal::as_f64).unwrap_or(0.0).max(0.0);
                let req = PauseRequest::Pause(secs);
                fx.pause = Some(req);
                self.pause = Some(req);
            }
            "resumeDriving" => {
                fx.pause = Some(PauseRequest::Resume);
                self.pause = Some(PauseRequest::Resume);
            }
            // unknown functions are rejected by the checker; ignore at runtime
            _ => return Ok(()),
        }
        self.log.rows.push(EffectRow {
            t: self.t,
            event: self.event.clone(),
            function: call.name.clone(),
            args: call.args.iter().map(|a| a.value.clone()).collect(),
            passengers: fx.passengers,
            color: fx.color.clone(),
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::track::Point;

    fn run(src: &str, event: Event) -> (VehicleEffects, EffectLog, Dispatch) {
        let p = parse(src).unwrap();
        let mut fx = VehicleEffects::default();
        let mut log = EffectLog::default();
        let st = VehicleState::at_rest(Point::new(0.0, 0.0), 0.0);
        let d = dispatch_event(&p, &event, 7, &st, &mut fx, &mut log);
        (fx, log, d)
    }

    #[test]
    fn start_sets_color() {
        let (fx, log, _) = run(r#"on start { setColor("yellow") }"#, Event::Start);
        assert_eq!(fx.color, "yellow");
        assert_eq!(log.rows.len(), 1);
    }

    #[test]
    fn repeat_beeps() {
        let (fx, log, _) = run("on step { repeat 3 { beepHorn() } }", Event::Step);
        assert_eq!(fx.horn_beeps, 3);
        assert_eq!(log.rows.len(), 3);
    }

    #[test]
    fn pickup_handler() {
        let (fx, log, d) = run(
            r#"at "stop1" { pauseDriving(2.0); flashLights(3); loadPassenger() }"#,
            Event::Waypoint("stop1".into()),
        );
        assert_eq!(d.pause, Some(PauseRequest::Pause(2.0)));
        assert_eq!((fx.lights_flashes, fx.passengers), (3, 1));
        assert_eq!(log.rows.len(), 3);
        assert!(log.rows.iter().all(|r| r.t == 7));
    }

    #[test]
    fn invalid_color_aborts_handler_only() {
        let (fx, log, d) = run(
            r#"on start { beepHorn() setColor("purple") beepHorn() }"#,
            Event::Start,
        );
        assert_eq!(fx.horn_beeps, 1);
        assert_eq!(fx.color, DEFAULT_COLOR);
        assert_eq!(log.rows.len(), 1);
        assert_eq!(d.diagnostics[0].code, "R001");
        assert!(is_valid_color("#00ff7F"));
        assert!(!is_valid_color("#00ff7"));
    }

    #[test]
    fn unload_is_idempotent() {
        let (fx, _, _) = run(
            "on end { unloadAllPassengers() loadPassenger() unloadAllPassengers() unloadAllPassengers() }",
            Event::End,
        );
        assert_eq!(fx.passengers, 0);
    }

    #[test]
    fn resume_overrides_pause() {
        let (_, _, d) = run("on step { pauseDriving(3) resumeDriving() }", Event::Step);
        assert_eq!(d.pause, Some(PauseRequest::Resume));
    }

    #[test]
    fn missing_handler_is_noop() {
        let (fx, log, d) = run("on start { beepHorn() }", Event::End);
        assert_eq!(fx, VehicleEffects::default());
        assert!(log.rows.is_empty() && d.pause.is_none());
    }

    #[test]
    fn event_names_round_trip() {
        for e in [Event::Start, Event::Step, Event::End, Event::Waypoint("a b".into())] {
            assert_eq!(e.to_string().parse::<Event>().unwrap(), e);
        }
    }
}
