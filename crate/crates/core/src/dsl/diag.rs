use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl Span {
    pub const fn new(line: usize, column: usize) -> Self {
        Span { line, column }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Diagnostic codes. `E0xx` come from the parser, `E1xx`/`W1xx` from the
/// checker and `R0xx` from the interpreter.
pub mod codes {
    pub const UNCLOSED_BLOCK: &str = "E001";
    pub const EXPECTED_ITEM: &str = "E002";
    pub const UNKNOWN_EVENT: &str = "E003";
    pub const EXPECTED_WAYPOINT_NAME: &str = "E004";
    pub const EXPECTED_BLOCK: &str = "E005";
    pub const EXPECTED_STATEMENT: &str = "E006";
    pub const UNTERMINATED_STRING: &str = "E007";
    pub const UNEXPECTED_CHARACTER: &str = "E008";
    pub const DUPLICATE_HANDLER: &str = "E009";
    pub const EXPECTED_REPEAT_COUNT: &str = "E010";
    pub const MALFORMED_ARGUMENTS: &str = "E011";
    pub const INVALID_NUMBER: &str = "E012";
    pub const INVALID_ESCAPE: &str = "E013";
    pub const EXPECTED_CALL: &str = "E014";
    pub const UNKNOWN_FUNCTION: &str = "E101";
    pub const ARITY_MISMATCH: &str = "E102";
    pub const TYPE_MISMATCH: &str = "E103";
    pub const UNKNOWN_WAYPOINT: &str = "E104";
    pub const NON_POSITIVE_REPEAT: &str = "E105";
    pub const NEGATIVE_ARGUMENT: &str = "E106";
    pub const UNHANDLED_WAYPOINT: &str = "W101";
    pub const INVALID_COLOR: &str = "R001";
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            line: span.line,
            column: span.column,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn warning(span: Span, code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(span, code, message)
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}] {}:{}: {}",
            self.severity, self.code, self.line, self.column, self.message
        )
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}
