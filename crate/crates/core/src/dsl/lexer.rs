//! Tokenizer. Lexical errors become diagnostics; the offending text is
//! skipped so parsing can continue.

use super::diag::{codes, Diagnostic, Span};

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    Int(i64),
    Num(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Str(_) => "string literal".into(),
            TokenKind::Int(_) | TokenKind::Num(_) => "number".into(),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.column)
    }
}

pub fn tokenize(source: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    while let Some(c) = cur.peek() {
        let span = cur.span();
        match c {
            c if c.is_whitespace() => {
                cur.bump();
            }
            '/' => {
                cur.bump();
                if cur.peek() == Some('/') {
                    while cur.peek().is_some_and(|c| c != '\n') {
                        cur.bump();
                    }
                } else {
                    diags.push(Diagnostic::error(
                        span,
                        codes::UNEXPECTED_CHARACTER,
                        "unexpected character `/`",
                    ));
                }
            }
            '{' | '}' | '(' | ')' | ',' | ';' => {
                cur.bump();
                let kind = match c {
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    ',' => TokenKind::Comma,
                    _ => TokenKind::Semi,
                };
                tokens.push(Token { kind, span });
            }
            '"' => {
                cur.bump();
                if let Some(s) = lex_string(&mut cur, span, &mut diags) {
                    tokens.push(Token {
                        kind: TokenKind::Str(s),
                        span,
                    });
                }
            }
            c if c.is_ascii_digit() || c == '-' => {
                if let Some(kind) = lex_number(&mut cur, span, &mut diags) {
                    tokens.push(Token { kind, span });
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(c) = cur.peek().filter(|c| c.is_alphanumeric() || *c == '_') {
                    ident.push(c);
                    cur.bump();
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(ident),
                    span,
                });
            }
            other => {
                cur.bump();
                diags.push(Diagnostic::error(
                    span,
                    codes::UNEXPECTED_CHARACTER,
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        span: cur.span(),
    });
    (tokens, diags)
}

/// Called after the opening quote. Strings may not span lines.
fn lex_string(cur: &mut Cursor<'_>, start: Span, diags: &mut Vec<Diagnostic>) -> Option<String> {
    let mut out = String::new();
    let mut valid = true;
    loop {
        match cur.peek() {
            None | Some('\n') => {
                diags.push(Diagnostic::error(
                    start,
                    codes::UNTERMINATED_STRING,
                    "unterminated string literal",
                ));
                return None;
            }
            Some('"') => {
                cur.bump();
                return valid.then_some(out);
            }
            Some('\\') => {
                let esc_span = cur.span();
                cur.bump();
                match cur.peek() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(c) if c != '\n' => {
                        diags.push(Diagnostic::error(
                            esc_span,
                            codes::INVALID_ESCAPE,
                            format!("invalid escape sequence `\\{c}`"),
                        ));
                        valid = false;
                    }
                    _ => continue,
                }
                cur.bump();
            }
            Some(c) => {
                out.push(c);
                cur.bump();
            }
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>, span: Span, diags: &mut Vec<Diagnostic>) -> Option<TokenKind> {
    let mut text = String::new();
    if cur.peek() == Some('-') {
        text.push('-');
        cur.bump();
        if !cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            diags.push(Diagnostic::error(
                span,
                codes::UNEXPECTED_CHARACTER,
                "unexpected character `-`",
            ));
            return None;
        }
    }
    // Consume the whole alphanumeric/dot run so malformed literals are
    // reported once.
    while let Some(c) = cur
        .peek()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '.' || *c == '_')
    {
        text.push(c);
        cur.bump();
        if (c == 'e' || c == 'E') && matches!(cur.peek(), Some('+') | Some('-')) {
            text.push(cur.bump().expect("peeked"));
        }
    }
    let invalid = |diags: &mut Vec<Diagnostic>| {
        diags.push(Diagnostic::error(
            span,
            codes::INVALID_NUMBER,
            format!("invalid number literal `{text}`"),
        ));
        None
    };
    if !is_number_syntax(&text) {
        return invalid(diags);
    }
    let is_float = text.contains(['.', 'e', 'E']);
    if is_float {
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(TokenKind::Num(v)),
            _ => invalid(diags),
        }
    } else {
        match text.parse::<i64>() {
            Ok(v) => Some(TokenKind::Int(v)),
            Err(_) => invalid(diags),
        }
    }
}

/// `-? digits ('.' digits)? ([eE] [+-]? digits)?`
fn is_number_syntax(text: &str) -> bool {
    let b = text.as_bytes();
    let mut i = 0;
    if b.first() == Some(&b'-') {
        i += 1;
    }
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if !digits(&mut i) {
        return false;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        if !digits(&mut i) {
            return false;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        if !digits(&mut i) {
            return false;
        }
    }
    i == b.len()
}
