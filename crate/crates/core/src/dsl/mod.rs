//! The event-callback scripting language: lexer, parser with error
//! recovery, canonical printer, static checker, interpreter and the
//! objective grader.
//!
//! ```text
//! on start { setColor("yellow") }
//! at "stop1" { pauseDriving(2.0); flashLights(3); loadPassenger() }
//! ```

mod ast;
mod check;
mod diag;
mod interp;
mod lexer;
mod objective;
mod parser;
mod printer;

pub use ast::{Arg, Call, Handler, Literal, Program, Stmt, WaypointHandler};
pub use check::{check, signature, ParamType, Signature, LIBRARY};
pub use diag::{codes, has_errors, Diagnostic, Severity, Span};
pub use interp::{
    dispatch_event, is_valid_color, Dispatch, EffectLog, EffectRow, Event, PauseRequest,
    VehicleEffects, DEFAULT_COLOR,
};
pub use lexer::{tokenize, Token, TokenKind};
pub use objective::{
    bus_route_objective, evaluate_objective, Objective, ObjectiveError, Report, Requirement,
    RequirementResult, REFERENCE_BUS_SOLUTION,
};
pub use parser::{parse, parse_with_diagnostics};
pub use printer::pretty_print;
