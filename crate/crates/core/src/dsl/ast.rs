use std::fmt;

use serde::{Deserialize, Serialize};

use super::diag::Span;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Int(i64),
    Num(f64),
    Str(String),
}

impl Literal {
    pub fn type_name(&self) -> &'static str {
        match self {
            Literal::Int(_) => "integer",
            Literal::Num(_) => "number",
            Literal::Str(_) => "string",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Int(i) => Some(*i as f64),
            Literal::Num(n) => Some(*n),
            Literal::Str(_) => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            // Debug keeps a decimal point or exponent, so it re-lexes as a number
            Literal::Num(n) => write!(f, "{n:?}"),
            Literal::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arg {
    pub value: Literal,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Call {
    pub name: String,
    pub args: Vec<Arg>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Call(Call),
    Repeat {
        count: i64,
        span: Span,
        body: Vec<Stmt>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Handler {
    /// Position of the `on`/`at` keyword.
    pub span: Span,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaypointHandler {
    pub name: String,
    /// Position of the name literal.
    pub name_span: Span,
    pub handler: Handler,
}

/// A parsed callback program: up to one handler per built-in event plus
/// waypoint handlers in declaration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub on_start: Option<Handler>,
    pub on_step: Option<Handler>,
    pub on_end: Option<Handler>,
    pub waypoints: Vec<WaypointHandler>,
}

impl Program {
    pub fn waypoint_handler(&self, name: &str) -> Option<&Handler> {
        self.waypoints
            .iter()
            .find(|w| w.name == name)
            .map(|w| &w.handler)
    }

    pub fn is_empty(&self) -> bool {
        self.on_start.is_none()
            && self.on_step.is_none()
            && self.on_end.is_none()
            && self.waypoints.is_empty()
    }

    /// Copy with every span zeroed, for structural comparison.
    pub fn without_spans(&self) -> Program {
        fn stmts(body: &[Stmt]) -> Vec<Stmt> {
            body.iter()
                .map(|s| match s {
                    Stmt::Call(c) => Stmt::Call(Call {
                        name: c.name.clone(),
                        args: c
                            .args
                            .iter()
                            .map(|a| Arg {
                                value: a.value.clone(),
                                span: Span::default(),
                            })
                            .collect(),
                        span: Span::default(),
                    }),
                    Stmt::Repeat { count, body, .. } => Stmt::Repeat {
                        count: *count,
                        span: Span::default(),
                        body: stmts(body),
                    },
                })
                .collect()
        }
        let handler = |h: &Handler| Handler {
            span: Span::default(),
            body: stmts(&h.body),
        };
        Program {
            on_start: self.on_start.as_ref().map(handler),
            on_step: self.on_step.as_ref().map(handler),
            on_end: self.on_end.as_ref().map(handler),
            waypoints: self
                .waypoints
                .iter()
                .map(|w| WaypointHandler {
                    name: w.name.clone(),
                    name_span: Span::default(),
                    handler: handler(&w.handler),
                })
                .collect(),
        }
    }
}
