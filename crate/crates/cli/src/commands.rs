use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use thiserror::Error;
use trackpilot_core::dsl::{
    check, evaluate_objective, has_errors, parse_with_diagnostics, Diagnostic, EffectLog, Objective,
    ObjectiveError, Report,
};
use trackpilot_core::policy::{ModelMeta, NetConfig, PolicyNet};
use trackpilot_core::ppo::{self, EpisodeSummary, TrainError, TrainOptions, TrainSummary};
use trackpilot_core::sim::{run_episode_with, Episode, RunMode, SimError, SimParams};
use trackpilot_core::store::{Store, StoreError};
use trackpilot_core::track::{builtin_rapid_tracks, Track};
use trackpilot_server::{Server, ServerConfig};

use crate::{EvalArgs, TestArgs, TracksArgs, TrainArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path} has errors:\n{}", render(.diagnostics))]
    Program {
        path: PathBuf,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("{0}")]
    Other(String),
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

pub type CliResult = Result<bool, CliError>;

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn read_objective(path: &Path) -> Result<Objective, CliError> {
    Objective::from_json(&read_file(path)?).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn open_store(dir: &Path) -> Result<Store, CliError> {
    let store = Store::open(dir)?;
    store.install_builtin_tracks()?;
    Ok(store)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn serve(store: &Path, listen: SocketAddr) -> CliResult {
    let server = Server::open(store, ServerConfig::default())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(format!("tokio runtime: {e}")))?;
    rt.block_on(trackpilot_server::serve(server, listen))
        .map_err(|e| CliError::Other(format!("server on {listen}: {e}")))?;
    Ok(true)
}

pub fn train_csv_path(store: &Path, model: &str, track: &str, seed: u64) -> PathBuf {
    store
        .join("models")
        .join(model)
        .join(format!("train-{track}-seed{seed}.csv"))
}

pub fn train(a: &TrainArgs) -> CliResult {
    let store = open_store(&a.store.store)?;
    let track = store.get_track(&a.track)?;
    let (mut net, mut meta) = if store.has_model(&a.model) {
        store.load_model(&a.model)?
    } else {
        let meta = ModelMeta {
            model_id: a.model.clone(),
            name: a.model.clone(),
            trained_episodes: 0,
            created_at: now(),
        };
        let net = PolicyNet::<f32>::new(NetConfig::default(), a.seed).map_err(|e| CliError::Other(e.to_string()))?;
        store.create_model(&meta, &net)?;
        eprintln!("created model {}", a.model);
        (net, meta)
    };
    let opts = TrainOptions::new(a.episodes as usize, a.seed);
    let mut stdout = io::stdout().lock();
    let mut store_error = None;
    let cancel = AtomicBool::new(false);
    let mut sink = |ep: &Episode| {
        if store_error.is_some() {
            return;
        }
        match store.put_episode(&a.model, ep, None) {
            Ok(id) => {
                if !a.quiet {
                    let _ = writeln!(
                        stdout,
                        "episode {:>4} (id {id}): total_reward {:>10.3}  steps {:>4}  {}",
                        ep.id,
                        ep.total_reward,
                        ep.steps.len(),
                        ep.outcome
                    );
                }
            }
            Err(e) => store_error = Some(e),
        }
    };
    let summary = ppo::train(&mut net, &track, &opts, &mut sink, &cancel)?;
    if let Some(e) = store_error {
        return Err(e.into());
    }
    meta.trained_episodes += summary.trained_episodes;
    store.save_model(&meta, &net)?;
    let csv = a
        .csv
        .clone()
        .unwrap_or_else(|| train_csv_path(&a.store.store, &a.model, &a.track, a.seed));
    write_file(&csv, &summary.to_csv())?;
    print_train_summary(&summary);
    println!("csv: {}", csv.display());
    Ok(true)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn print_train_summary(s: &TrainSummary) {
    let tail: Vec<&EpisodeSummary> = s.episodes.iter().rev().take(20).collect();
    println!(
        "trained {} episodes in {} updates; mean total reward of last {}: {:.3}",
        s.trained_episodes,
        s.updates.len(),
        tail.len(),
        mean(tail.iter().map(|e| e.total_reward))
    );
}

fn print_report(report: &Report) {
    for r in &report.requirements {
        let step = r.step.map(|s| format!(" (t={s})")).unwrap_or_default();
        println!(
            "{}  {:<24} {}{step}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.description,
            r.detail
        );
    }
    let failed = report.failures().count();
    println!(
        "objective \"{}\": {} ({} of {} requirements met)",
        report.objective,
        if report.passed { "PASS" } else { "FAIL" },
        report.requirements.len() - failed,
        report.requirements.len()
    );
}

pub fn test(a: &TestArgs) -> CliResult {
    // Read inputs before touching the store.
    let source = a.program.as_deref().map(read_file).transpose()?;
    let objective = a.objective.as_deref().map(read_objective).transpose()?;
    let store = open_store(&a.store.store)?;
    let (mut net, _) = store.load_model(&a.model)?;
    let track = store.get_track(&a.track)?;
    let program = match (&source, &a.program) {
        (Some(src), Some(path)) => {
            let (program, mut diags) = parse_with_diagnostics(src);
            if !has_errors(&diags) {
                diags.extend(check(&program, &track));
            }
            if has_errors(&diags) {
                return Err(CliError::Program {
                    path: path.clone(),
                    diagnostics: diags,
                });
            }
            for d in &diags {
                eprintln!("{}: {d}", path.display());
            }
            Some(program)
        }
        _ => None,
    };
    let mode = match &program {
        Some(p) => RunMode::Programmed(p),
        None => RunMode::Test,
    };
    let obs_cfg = net.config().obs_config();
    let run = run_episode_with(&mut net, &track, a.seed, mode, &SimParams::default(), &obs_cfg)?;
    for d in &run.diagnostics {
        eprintln!("runtime: {d}");
    }
    let effects = program.as_ref().map(|_| &run.effect_log);
    let id = store.put_episode(&a.model, &run.episode, effects)?;
    let ep = &run.episode;
    println!(
        "episode {id}: outcome {}, total reward {:.6}, steps {}, tiles {}/{}",
        ep.outcome,
        ep.total_reward,
        ep.steps.len(),
        ep.tiles_visited(),
        track.tile_count()
    );
    match objective {
        Some(obj) => {
            let report = evaluate_objective(ep, &run.effect_log, &obj, &track)?;
            print_report(&report);
            Ok(report.passed)
        }
        None => Ok(true),
    }
}

pub fn eval_objective(a: &EvalArgs) -> CliResult {
    let objective = read_objective(&a.objective)?;
    let store = open_store(&a.store.store)?;
    let (_, episode) = store.get_episode(a.episode)?;
    let log = store.get_effects(a.episode)?.unwrap_or_else(EffectLog::default);
    let track = store.get_track(&episode.track_id)?;
    let report = evaluate_objective(&episode, &log, &objective, &track)?;
    print_report(&report);
    Ok(report.passed)
}

fn print_tracks(tracks: &[Track], export: Option<&Path>) -> Result<(), CliError> {
    println!("{:<12} {:<28} {:>6} {:>9} {:>7}", "id", "name", "tiles", "length_m", "closed");
    for t in tracks {
        println!(
            "{:<12} {:<28} {:>6} {:>9.2} {:>7}",
            t.id(),
            t.name(),
            t.tile_count(),
            t.length(),
            t.closed()
        );
        if let Some(dir) = export {
            write_file(&dir.join(format!("{}.json", t.id())), &t.to_json())?;
        }
    }
    Ok(())
}

pub fn tracks(a: &TracksArgs) -> CliResult {
    let tracks = if a.builtin {
        builtin_rapid_tracks()
    } else {
        let dir = a.store.as_deref().expect("clap requires --store without --builtin");
        let store = open_store(dir)?;
        let (tracks, warnings) = store.list_tracks();
        for w in warnings {
            eprintln!("warning: {w}");
        }
        tracks
    };
    print_tracks(&tracks, a.export.as_deref())?;
    Ok(true)
}
