//! Recursive-descent parser with panic-mode recovery at `}` boundaries.

use super::ast::{Arg, Call, Handler, Literal, Program, Stmt, WaypointHandler};
use super::diag::{codes, Diagnostic, Span};
use super::lexer::{tokenize, Token, TokenKind};

/// Parses `source`. Every diagnostic found is returned; the program is only
/// meaningful when none of them is an error.
pub fn parse_with_diagnostics(source: &str) -> (Program, Vec<Diagnostic>) {
    let (tokens, mut diags) = tokenize(source);
    let mut parser = Parser {
        tokens,
        pos: 0,
        diags: Vec::new(),
    };
    let program = parser.program();
    diags.append(&mut parser.diags);
    diags.sort_by(|a, b| (a.line, a.column).cmp(&(b.line, b.column)));
    (program, diags)
}

/// Parses `source` into a [`Program`], or returns the diagnostics.
pub fn parse(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let (program, diags) = parse_with_diagnostics(source);
    if diags.is_empty() {
        Ok(program)
    } else {
        Err(diags)
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

enum EventName {
    Start,
    Step,
    End,
}

/// Result of parsing a block body.
enum BlockEnd {
    Closed,
    /// Hit end of input before `}`.
    Unclosed,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind(&self) -> &TokenKind {
        &self.peek().kind
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if !matches!(t.kind, TokenKind::Eof) {
            self.pos += 1;
        }
        t
    }

    fn error(&mut self, span: Span, code: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, code, message));
    }

    fn program(&mut self) -> Program {
        let mut program = Program::default();
        loop {
            let tok = self.peek().clone();
            match &tok.kind {
                TokenKind::Eof => break,
                TokenKind::Ident(w) if w == "on" => {
                    self.bump();
                    self.on_item(tok.span, &mut program);
                }
                TokenKind::Ident(w) if w == "at" => {
                    self.bump();
                    self.at_item(tok.span, &mut program);
                }
                other => {
                    self.error(
                        tok.span,
                        codes::EXPECTED_ITEM,
                        format!("expected `on` or `at`, found {}", other.describe()),
                    );
                    self.recover_top_level();
                }
            }
        }
        program
    }

    /// Skips to the next `on`/`at` outside any braces, stepping over whole
    /// `{ ... }` groups.
    fn recover_top_level(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek_kind() {
                TokenKind::Eof => return,
                TokenKind::Ident(w) if depth == 0 && (w == "on" || w == "at") => return,
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => {
                    if depth <= 1 {
                        self.bump();
                        if depth == 1 {
                            return;
                        }
                        continue;
                    }
                    depth -= 1;
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn on_item(&mut self, span: Span, program: &mut Program) {
        let tok = self.peek().clone();
        let event = match &tok.kind {
            TokenKind::Ident(w) if w == "start" => Some(EventName::Start),
            TokenKind::Ident(w) if w == "step" => Some(EventName::Step),
            TokenKind::Ident(w) if w == "end" => Some(EventName::End),
            TokenKind::Ident(w) => {
                self.error(
                    tok.span,
                    codes::UNKNOWN_EVENT,
                    format!("unknown event `{w}` (expected `start`, `step` or `end`)"),
                );
                None
            }
            other => {
                self.error(
                    tok.span,
                    codes::UNKNOWN_EVENT,
                    format!("expected event name after `on`, found {}", other.describe()),
                );
                if !matches!(other, TokenKind::LBrace) {
                    self.recover_top_level();
                    return;
                }
                None
            }
        };
        if matches!(tok.kind, TokenKind::Ident(_)) {
            self.bump();
        }
        let Some(body) = self.handler_block() else {
            return;
        };
        let Some(event) = event else { return };
        let (slot, label) = match event {
            EventName::Start => (&mut program.on_start, "start"),
            EventName::Step => (&mut program.on_step, "step"),
            EventName::End => (&mut program.on_end, "end"),
        };
        if slot.is_some() {
            self.diags.push(Diagnostic::error(
                span,
                codes::DUPLICATE_HANDLER,
                format!("duplicate handler for `on {label}`"),
            ));
        } else {
            *slot = Some(Handler { span, body });
        }
    }

    fn at_item(&mut self, span: Span, program: &mut Program) {
        let tok = self.peek().clone();
        let name = match &tok.kind {
            TokenKind::Str(s) => {
                self.bump();
                Some(s.clone())
            }
            other => {
                self.error(
                    tok.span,
                    codes::EXPECTED_WAYPOINT_NAME,
                    format!(
                        "expected waypoint name string after `at`, found {}",
                        other.describe()
                    ),
                );
                if matches!(other, TokenKind::Ident(_)) {
                    self.bump();
                } else if !matches!(other, TokenKind::LBrace) {
                    self.recover_top_level();
                    return;
                }
                None
            }
        };
        let Some(body) = self.handler_block() else {
            return;
        };
        let Some(name) = name else { return };
        if program.waypoints.iter().any(|w| w.name == name) {
            self.error(
                span,
                codes::DUPLICATE_HANDLER,
                format!("duplicate handler for waypoint \"{name}\""),
            );
        } else {
            program.waypoints.push(WaypointHandler {
                name,
                name_span: tok.span,
                handler: Handler { span, body },
            });
        }
    }

    /// Parses `{ stmt* }` for a top-level handler. `None` when no block could
    /// be parsed (after reporting and recovering).
    fn handler_block(&mut self) -> Option<Vec<Stmt>> {
        let tok = self.peek().clone();
        if tok.kind != TokenKind::LBrace {
            self.error(
                tok.span,
                codes::EXPECTED_BLOCK,
                format!("expected `{{`, found {}", tok.kind.describe()),
            );
            self.recover_top_level();
            return None;
        }
        let (body, _) = self.block();
        Some(body)
    }

    /// Parses a block starting at `{`.
    fn block(&mut self) -> (Vec<Stmt>, BlockEnd) {
        let open = self.bump();
        let mut body = Vec::new();
        loop {
            let tok = self.peek().clone();
            match &tok.kind {
                TokenKind::RBrace => {
                    self.bump();
                    return (body, BlockEnd::Closed);
                }
                TokenKind::Eof => {
                    self.error(open.span, codes::UNCLOSED_BLOCK, "unclosed block");
                    return (body, BlockEnd::Unclosed);
                }
                _ => match self.statement() {
                    Ok(Some(stmt)) => body.push(stmt),
                    Ok(None) => {}
                    Err(BlockEnd::Unclosed) => {
                        self.error(open.span, codes::UNCLOSED_BLOCK, "unclosed block");
                        return (body, BlockEnd::Unclosed);
                    }
                    Err(BlockEnd::Closed) => {
                        // recovery consumed the closing brace
                        return (body, BlockEnd::Closed);
                    }
                },
            }
        }
    }

    /// Skips to the `}` closing the current block (consumed). Nested groups
    /// are skipped whole.
    fn recover_in_block(&mut self) -> BlockEnd {
        let mut depth = 0usize;
        loop {
            match self.peek_kind() {
                TokenKind::Eof => return BlockEnd::Unclosed,
                TokenKind::LBrace => depth += 1,
                TokenKind::RBrace => {
                    if depth == 0 {
                        self.bump();
                        return BlockEnd::Closed;
                    }
                    depth -= 1;
                }
                _ => {}
            }
            self.bump();
        }
    }

    /// `Ok(None)` for a statement that was parsed but discarded; `Err` when
    /// recovery ran to the end of the enclosing block.
    fn statement(&mut self) -> Result<Option<Stmt>, BlockEnd> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Ident(w) if w == "repeat" => {
                self.bump();
                let count_tok = self.peek().clone();
                let count = match count_tok.kind {
                    TokenKind::Int(n) => {
                        self.bump();
                        Some(n)
                    }
                    ref other => {
                        self.error(
                            count_tok.span,
                            codes::EXPECTED_REPEAT_COUNT,
                            format!("expected integer repeat count, found {}", other.describe()),
                        );
                        // treat a stray word or literal as the bad count
                        if matches!(
                            other,
                            TokenKind::Num(_) | TokenKind::Ident(_) | TokenKind::Str(_)
                        ) {
                            self.bump();
                        }
                        None
                    }
                };
                if self.peek_kind() != &TokenKind::LBrace {
                    let t = self.peek().clone();
                    self.error(
                        t.span,
                        codes::EXPECTED_BLOCK,
                        format!("expected `{{`, found {}", t.kind.describe()),
                    );
                    return Err(self.recover_in_block());
                }
                let (body, end) = self.block();
                if let BlockEnd::Unclosed = end {
                    return Err(BlockEnd::Unclosed);
                }
                Ok(count.map(|count| Stmt::Repeat {
                    count,
                    span: tok.span,
                    body,
                }))
            }
            TokenKind::Ident(name) => {
                self.bump();
                if self.peek_kind() != &TokenKind::LParen {
                    let t = self.peek().clone();
                    self.error(
                        t.span,
                        codes::EXPECTED_CALL,
                        format!("expected `(` after `{name}`, found {}", t.kind.describe()),
                    );
                    return Err(self.recover_in_block());
                }
                self.bump();
                let args = self.arguments()?;
                if self.peek_kind() == &TokenKind::Semi {
                    self.bump();
                }
                Ok(Some(Stmt::Call(Call {
                    name: name.clone(),
                    args,
                    span: tok.span,
                })))
            }
            other => {
                self.error(
                    tok.span,
                    codes::EXPECTED_STATEMENT,
                    format!("expected statement, found {}", other.describe()),
                );
                Err(self.recover_in_block())
            }
        }
    }

    /// Parses `[literal ("," literal)*] ")"` after the opening parenthesis.
    fn arguments(&mut self) -> Result<Vec<Arg>, BlockEnd> {
        let mut args = Vec::new();
        if self.peek_kind() == &TokenKind::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            let tok = self.peek().clone();
            let value = match &tok.kind {
                TokenKind::Str(s) => Literal::Str(s.clone()),
                TokenKind::Int(i) => Literal::Int(*i),
                TokenKind::Num(n) => Literal::Num(*n),
                other => {
                    self.error(
                        tok.span,
                        codes::MALFORMED_ARGUMENTS,
                        format!("expected literal argument, found {}", other.describe()),
                    );
                    return Err(self.recover_in_block());
                }
            };
            self.bump();
            args.push(Arg {
                value,
                span: tok.span,
            });
            let sep = self.peek().clone();
            match sep.kind {
                TokenKind::Comma => {
                    self.bump();
                }
                TokenKind::RParen => {
                    self.bump();
                    return Ok(args);
                }
                ref other => {
                    self.error(
                        sep.span,
                        codes::MALFORMED_ARGUMENTS,
                        format!("expected `,` or `)`, found {}", other.describe()),
                    );
                    return Err(self.recover_in_block());
                }
            }
        }
    }
}
