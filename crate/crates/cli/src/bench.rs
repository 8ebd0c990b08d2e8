//! Learning-curve benchmark.
//!
//! For every seed: sample a baseline with the untrained network, train a
//! fresh model, then run one greedy episode. A seed passes when the greedy
//! run covers at least 80% of the tiles and the mean reward of the final
//! training window reaches the baseline threshold.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackpilot_core::policy::{NetConfig, PolicyNet};
use trackpilot_core::ppo::{train, TrainOptions};
use trackpilot_core::sim::{run_episode, Outcome, RunMode, SimParams};
use trackpilot_core::store::Store;
use trackpilot_core::track::{builtin_track, Track};

use crate::commands::{write_file, CliError, CliResult};
use crate::BenchArgs;

pub const MIN_TILE_FRACTION: f64 = 0.8;
const BASELINE_SALT: u64 = 0xba5e_11fe_ba5e_11fe;

/// Three times the baseline when it is positive. For a negative baseline
/// the threshold is mirrored to `|b|`, so improvement is still required.
pub fn reward_threshold(baseline: f64) -> f64 {
    baseline + 2.0 * baseline.abs()
}

pub struct SeedResult {
    pub seed: u64,
    pub baseline: f64,
    pub final_mean: f64,
    pub threshold: f64,
    pub greedy_tiles: usize,
    pub tile_count: usize,
    pub greedy_outcome: Outcome,
    pub csv: String,
    pub seconds: f64,
}

impl SeedResult {
    pub fn tile_fraction(&self) -> f64 {
        self.greedy_tiles as f64 / self.tile_count as f64
    }

    pub fn passed(&self) -> bool {
        self.tile_fraction() >= MIN_TILE_FRACTION && self.final_mean >= self.threshold
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

pub fn run_seed(
    track: &Track,
    episodes: usize,
    seed: u64,
    baseline_episodes: usize,
    window: usize,
) -> Result<SeedResult, CliError> {
    let started = Instant::now();
    let params = SimParams::default();
    let mut net = PolicyNet::<f32>::new(NetConfig::default(), seed).map_err(|e| CliError::Other(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ BASELINE_SALT);
    let mut baseline = Vec::with_capacity(baseline_episodes);
    for _ in 0..baseline_episodes {
        let mut untrained = net.clone();
        let run = run_episode(&mut untrained, track, rng.random(), RunMode::Train, &params)?;
        baseline.push(run.episode.total_reward);
    }
    let baseline = mean(&baseline);

    let opts = TrainOptions::new(episodes, seed);
    let summary = train(&mut net, track, &opts, &mut |_| {}, &AtomicBool::new(false))?;
    let rewards: Vec<f64> = summary.episodes.iter().map(|e| e.total_reward).collect();
    let final_mean = mean(&rewards[rewards.len().saturating_sub(window)..]);

    let greedy = run_episode(&mut net, track, seed, RunMode::Test, &params)?.episode;
    Ok(SeedResult {
        seed,
        baseline,
        final_mean,
        threshold: reward_threshold(baseline),
        greedy_tiles: greedy.tiles_visited(),
        tile_count: track.tile_count(),
        greedy_outcome: greedy.outcome,
        csv: summary.to_csv(),
        seconds: started.elapsed().as_secs_f64(),
    })
}

pub const SUMMARY_HEADER: &str =
    "seed,baseline_mean,final_mean,threshold,greedy_tiles,tile_count,greedy_fraction,greedy_outcome,pass";

fn load_track(a: &BenchArgs) -> Result<Track, CliError> {
    match &a.store {
        Some(dir) => Ok(Store::open(dir)?.get_track(&a.track)?),
        None => builtin_track(&a.track)
            .ok_or_else(|| CliError::Other(format!("no builtin track `{}` (use --store for others)", a.track))),
    }
}

pub fn run(a: &BenchArgs) -> CliResult {
    let track = load_track(a)?;
    let required = a.required.unwrap_or((a.seeds * 7).div_ceil(10));
    if required > a.seeds {
        return Err(CliError::Other(format!(
            "--required {required} exceeds --seeds {}",
            a.seeds
        )));
    }
    println!(
        "bench: track {} ({} tiles), {} episodes x {} seeds, baseline {} episodes, window {}",
        track.id(),
        track.tile_count(),
        a.episodes,
        a.seeds,
        a.baseline_episodes,
        a.window
    );
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut passed = 0;
    for seed in a.first_seed..a.first_seed + a.seeds {
        let r = run_seed(
            &track,
            a.episodes as usize,
            seed,
            a.baseline_episodes as usize,
            a.window as usize,
        )?;
        write_file(&a.out.join(format!("seed-{seed}.csv")), &r.csv)?;
        let ok = r.passed();
        passed += ok as u64;
        println!(
            "seed {seed}: {} baseline {:.2} threshold {:.2} final {:.2} greedy tiles {}/{} ({:.0}%, {}) [{:.0}s]",
            if ok { "PASS" } else { "FAIL" },
            r.baseline,
            r.threshold,
            r.final_mean,
            r.greedy_tiles,
            r.tile_count,
            100.0 * r.tile_fraction(),
            r.greedy_outcome,
            r.seconds
        );
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.baseline,
            r.final_mean,
            r.threshold,
            r.greedy_tiles,
            r.tile_count,
            r.tile_fraction(),
            r.greedy_outcome,
            ok
        );
    }
    write_file(&a.out.join("summary.csv"), &summary)?;
    let ok = passed >= required;
    println!(
        "bench: {passed}/{} seeds passed (need {required}): {}",
        a.seeds,
        if ok { "PASS" } else { "FAIL" }
    );
    println!("csv: {}", Path::new(&a.out).join("summary.csv").display());
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold() {
        assert_eq!(reward_threshold(10.0), 30.0);
        assert_eq!(reward_threshold(-40.0), 40.0);
        assert_eq!(reward_threshold(0.0), 0.0);
    }
}
