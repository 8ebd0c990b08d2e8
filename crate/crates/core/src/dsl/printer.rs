//! Canonical source formatting.

use std::fmt::Write;

use super::ast::{Handler, Program, Stmt};

const INDENT: &str = "    ";

/// Formats `program` as canonical source: built-in handlers first
/// (start, step, end), then waypoint handlers in declaration order.
pub fn pretty_print(program: &Program) -> String {
    let mut items = Vec::new();
    for (label, h) in [
        ("on start", &program.on_start),
        ("on step", &program.on_step),
        ("on end", &program.on_end),
    ] {
        if let Some(h) = h {
            items.push(item(label, h));
        }
    }
    for w in &program.waypoints {
        let label = format!("at {}", super::ast::Literal::Str(w.name.clone()));
        items.push(item(&label, &w.handler));
    }
    let mut out = items.join("\n");
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

fn item(label: &str, handler: &Handler) -> String {
    let mut out = String::new();
    out.push_str(label);
    out.push(' ');
    block(&mut out, &handler.body, 0);
    out.push('\n');
    out
}

fn block(out: &mut String, body: &[Stmt], depth: usize) {
    if body.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for stmt in body {
        for _ in 0..=depth {
            out.push_str(INDENT);
        }
        match stmt {
            Stmt::Call(c) => {
                let args: Vec<String> = c.args.iter().map(|a| a.value.to_string()).collect();
                let _ = write!(out, "{}({})", c.name, args.join(", "));
            }
            Stmt::Repeat { count, body, .. } => {
                let _ = write!(out, "repeat {count} ");
                block(out, body, depth + 1);
            }
        }
        out.push('\n');
    }
    for _ in 0..depth {
        out.push_str(INDENT);
    }
    out.push('}');
}
