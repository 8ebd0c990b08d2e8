//! Parser golden suite over `tests/corpus/*.wps`.
//!
//! Each source has a `.diag` golden with one line per diagnostic: parse
//! diagnostics, then static-check diagnostics against the bus route, then
//! runtime faults from dispatching every event once. Setting
//! `UPDATE_GOLDENS=1` rewrites the goldens.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use trackpilot_core::dsl::{
    check, dispatch_event, has_errors, parse, parse_with_diagnostics, pretty_print, tokenize,
    Diagnostic, EffectLog, Event, Literal, Program, Stmt, TokenKind, VehicleEffects,
};
use trackpilot_core::sim::VehicleState;
use trackpilot_core::track::{bus_route, Point, Track};

/// Every diagnostic code the toolchain can emit.
pub const ALL_CODES: &[&str] = &[
    "E001", "E002", "E003", "E004", "E005", "E006", "E007", "E008", "E009", "E010", "E011",
    "E012", "E013", "E014", "E101", "E102", "E103", "E104", "E105", "E106", "W101", "R001",
];

/// Grammar features the corpus must exercise.
pub const PRODUCTIONS: &[&str] = &[
    "empty program",
    "on start",
    "on step",
    "on end",
    "at STRING",
    "empty block",
    "repeat INT block",
    "nested repeat",
    "call with no arguments",
    "call with one argument",
    "call with several arguments",
    "STRING literal",
    "INT literal",
    "NUMBER literal",
    "comment",
    "semicolon",
];

pub struct Outcome {
    pub diagnostics: Vec<Diagnostic>,
    pub lines: Vec<String>,
    pub program: Program,
    pub parse_clean: bool,
}

pub fn evaluate(source: &str, track: &Track) -> Outcome {
    let (program, parse_diags) = parse_with_diagnostics(source);
    let parse_clean = parse_diags.is_empty();
    let mut diagnostics = parse_diags.clone();
    let mut lines: Vec<String> = parse_diags.iter().map(|d| d.to_string()).collect();
    if parse_clean {
        let checked = check(&program, track);
        lines.extend(checked.iter().map(|d| d.to_string()));
        let static_errors = has_errors(&checked);
        diagnostics.extend(checked);
        if !static_errors {
            let state = VehicleState::at_rest(Point::new(0.0, 0.0), 0.0);
            let mut fx = VehicleEffects::default();
            let mut log = EffectLog::default();
            let mut events = vec![Event::Start, Event::Step];
            events.extend(track.waypoints().iter().map(|w| Event::Waypoint(w.name.clone())));
            events.push(Event::End);
            for (t, event) in events.iter().enumerate() {
                let d = dispatch_event(&program, event, t, &state, &mut fx, &mut log);
                lines.extend(d.diagnostics.iter().map(|x| format!("runtime {event}: {x}")));
                diagnostics.extend(d.diagnostics);
            }
        }
    }
    Outcome {
        diagnostics,
        lines,
        program,
        parse_clean,
    }
}

fn render(lines: &[String]) -> String {
    let mut out = String::new();
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    out
}

fn visit(body: &[Stmt], depth: usize, seen: &mut BTreeSet<&'static str>) {
    if body.is_empty() {
        seen.insert("empty block");
    }
    for stmt in body {
        match stmt {
            Stmt::Repeat { body, .. } => {
                seen.insert("repeat INT block");
                if depth > 0 {
                    seen.insert("nested repeat");
                }
                visit(body, depth + 1, seen);
            }
            Stmt::Call(call) => {
                seen.insert(match call.args.len() {
                    0 => "call with no arguments",
                    1 => "call with one argument",
                    _ => "call with several arguments",
                });
                for a in &call.args {
                    seen.insert(match a.value {
                        Literal::Str(_) => "STRING literal",
                        Literal::Int(_) => "INT literal",
                        Literal::Num(_) => "NUMBER literal",
                    });
                }
            }
        }
    }
}

fn productions(source: &str, program: &Program, seen: &mut BTreeSet<&'static str>) {
    if program.is_empty() {
        seen.insert("empty program");
    }
    for (h, name) in [
        (&program.on_start, "on start"),
        (&program.on_step, "on step"),
        (&program.on_end, "on end"),
    ] {
        if let Some(h) = h {
            seen.insert(name);
            visit(&h.body, 0, seen);
        }
    }
    for w in &program.waypoints {
        seen.insert("at STRING");
        visit(&w.handler.body, 0, seen);
    }
    let (tokens, _) = tokenize(source);
    if tokens.iter().any(|t| t.kind == TokenKind::Semi) {
        seen.insert("semicolon");
    }
    if source.lines().any(|l| l.contains("//")) {
        seen.insert("comment");
    }
}

/// Whether `(line, column)` addresses a character of `source`, or the
/// position just past the end of a line.
pub fn in_bounds(source: &str, line: usize, column: usize) -> bool {
    if line == 0 || column == 0 {
        return false;
    }
    let lines: Vec<&str> = source.split('\n').collect();
    match lines.get(line - 1) {
        Some(l) => column <= l.chars().count() + 1,
        None => false,
    }
}

pub struct CorpusSummary {
    pub files: usize,
    pub codes: BTreeSet<String>,
    pub productions: BTreeSet<&'static str>,
    pub reparsed: usize,
}

pub fn corpus_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "wps"))
        .collect();
    files.sort();
    files
}

/// Runs the whole suite; `Err` lists every problem found.
pub fn check_corpus(dir: &Path) -> Result<CorpusSummary, String> {
    let update = std::env::var_os("UPDATE_GOLDENS").is_some();
    let track = bus_route();
    let mut problems = Vec::new();
    let mut summary = CorpusSummary {
        files: 0,
        codes: BTreeSet::new(),
        productions: BTreeSet::new(),
        reparsed: 0,
    };
    for path in corpus_files(dir) {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let source = fs::read_to_string(&path).map_err(|e| format!("{name}: {e}"))?;
        summary.files += 1;
        let out = evaluate(&source, &track);
        let actual = render(&out.lines);
        let golden_path = path.with_extension("diag");
        if update {
            fs::write(&golden_path, &actual).map_err(|e| format!("{name}: {e}"))?;
        }
        match fs::read_to_string(&golden_path) {
            Ok(expected) if expected == actual => {}
            Ok(expected) => problems.push(format!(
                "{name}: diagnostics differ from golden\n--- expected\n{expected}--- actual\n{actual}"
            )),
            Err(e) => problems.push(format!("{name}: golden {}: {e}", golden_path.display())),
        }
        for d in &out.diagnostics {
            summary.codes.insert(d.code.clone());
            if !in_bounds(&source, d.line, d.column) {
                problems.push(format!("{name}: out-of-bounds position {d}"));
            }
        }
        if out.parse_clean {
            productions(&source, &out.program, &mut summary.productions);
            let printed = pretty_print(&out.program);
            match parse(&printed) {
                Ok(again) if again.without_spans() == out.program.without_spans() => {
                    summary.reparsed += 1;
                }
                Ok(_) => problems.push(format!("{name}: print/parse changed the AST:\n{printed}")),
                Err(d) => problems.push(format!("{name}: printed form does not parse: {d:?}\n{printed}")),
            }
        }
    }
    if summary.files < 20 {
        problems.push(format!("only {} corpus files", summary.files));
    }
    for code in ALL_CODES {
        if !summary.codes.contains(*code) {
            problems.push(format!("no corpus file produces {code}"));
        }
    }
    for p in PRODUCTIONS {
        if !summary.productions.contains(p) {
            problems.push(format!("no parse-clean corpus file exercises `{p}`"));
        }
    }
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(problems.join("\n"))
    }
}
