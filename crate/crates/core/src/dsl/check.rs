//! Static validation of a parsed program against the function library and
//! a track's waypoints.

use std::collections::HashSet;

use super::ast::{Literal, Program, Stmt};
use super::diag::{codes, Diagnostic, Span};
use crate::track::Track;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamType {
    Str,
    Int,
    /// Integer or decimal.
    Number,
}

impl ParamType {
    fn name(self) -> &'static str {
        match self {
            ParamType::Str => "string",
            ParamType::Int => "integer",
            ParamType::Number => "number",
        }
    }

    fn accepts(self, lit: &Literal) -> bool {
        matches!(
            (self, lit),
            (ParamType::Str, Literal::Str(_))
                | (ParamType::Int, Literal::Int(_))
                | (ParamType::Number, Literal::Int(_) | Literal::Num(_))
        )
    }
}

pub struct Signature {
    pub name: &'static str,
    pub params: &'static [ParamType],
    pub doc: &'static str,
}

/// The vehicle function library.
pub const LIBRARY: &[Signature] = &[
    Signature {
        name: "setColor",
        params: &[ParamType::Str],
        doc: "set the body color: red, yellow, blue, green, white, black or #RRGGBB",
    },
    Signature {
        name: "beepHorn",
        params: &[],
        doc: "sound the horn once",
    },
    Signature {
        name: "flashLights",
        params: &[ParamType::Int],
        doc: "flash the lights n times",
    },
    Signature {
        name: "loadPassenger",
        params: &[],
        doc: "board one passenger",
    },
    Signature {
        name: "unloadAllPassengers",
        params: &[],
        doc: "drop off every passenger",
    },
    Signature {
        name: "pauseDriving",
        params: &[ParamType::Number],
        doc: "hold the brake for the given number of seconds",
    },
    Signature {
        name: "resumeDriving",
        params: &[],
        doc: "cancel a pending pause",
    },
];

pub fn signature(name: &str) -> Option<&'static Signature> {
    LIBRARY.iter().find(|s| s.name == name)
}

/// Checks calls, waypoint references and repeat counts. Waypoints on the
/// track without a handler produce warnings. Output is sorted by position.
pub fn check(program: &Program, track: &Track) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let handlers = [&program.on_start, &program.on_step, &program.on_end];
    for h in handlers.into_iter().flatten() {
        check_body(&h.body, &mut diags);
    }
    for w in &program.waypoints {
        if track.waypoint(&w.name).is_none() {
            diags.push(Diagnostic::error(
                w.name_span,
                codes::UNKNOWN_WAYPOINT,
                format!("unknown waypoint \"{}\" on track `{}`", w.name, track.id()),
            ));
        }
        check_body(&w.handler.body, &mut diags);
    }
    let handled: HashSet<&str> = program.waypoints.iter().map(|w| w.name.as_str()).collect();
    for wp in track.waypoints() {
        if !handled.contains(wp.name.as_str()) {
            diags.push(Diagnostic::warning(
                Span::new(1, 1),
                codes::UNHANDLED_WAYPOINT,
                format!("waypoint \"{}\" ({}) has no handler", wp.name, wp.kind),
            ));
        }
    }
    diags.sort_by(|a, b| {
        (a.line, a.column, a.severity, &a.code).cmp(&(b.line, b.column, b.severity, &b.code))
    });
    diags
}

fn check_body(body: &[Stmt], diags: &mut Vec<Diagnostic>) {
    for stmt in body {
        match stmt {
            Stmt::Repeat { count, span, body } => {
                if *count <= 0 {
                    diags.push(Diagnostic::error(
                        *span,
                        codes::NON_POSITIVE_REPEAT,
                        format!("repeat count must be positive, got {count}"),
                    ));
                }
                check_body(body, diags);
            }
            Stmt::Call(call) => {
                let Some(sig) = signature(&call.name) else {
                    diags.push(Diagnostic::error(
                        call.span,
                        codes::UNKNOWN_FUNCTION,
                        format!("unknown function `{}`", call.name),
                    ));
                    continue;
                };
                if sig.params.len() != call.args.len() {
                    diags.push(Diagnostic::error(
                        call.span,
                        codes::ARITY_MISMATCH,
                        format!(
                            "`{}` expects {} argument{}, got {}",
                            sig.name,
                            sig.params.len(),
                            if sig.params.len() == 1 { "" } else { "s" },
                            call.args.len()
                        ),
                    ));
                    continue;
                }
                for (arg, ty) in call.args.iter().zip(sig.params) {
                    if !ty.accepts(&arg.value) {
                        diags.push(Diagnostic::error(
                            arg.span,
                            codes::TYPE_MISMATCH,
                            format!(
                                "`{}` expects {}, got {}",
                                sig.name,
                                ty.name(),
                                arg.value.type_name()
                            ),
                        ));
                    } else if arg.value.as_f64().is_some_and(|v| v < 0.0) {
                        diags.push(Diagnostic::error(
                            arg.span,
                            codes::NEGATIVE_ARGUMENT,
                            format!("`{}` argument must not be negative", sig.name),
                        ));
                    }
                }
            }
        }
    }
}
