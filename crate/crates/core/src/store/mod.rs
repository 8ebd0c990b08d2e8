//! Plain-file persistence for tracks, models and episodes, plus the overlay
//! and reward-curve queries behind the training-detail view.
//!
//! ```text
//! <root>/tracks/<id>.json
//! <root>/models/<id>/weights.bin
//! <root>/models/<id>/meta.json
//! <root>/models/<id>/episodes/<track>/<n>.jsonl
//! <root>/models/<id>/episodes/<track>/<n>.effects.jsonl   (programmed runs)
//! ```
//!
//! Episode numbers are unique across the whole store and increase in
//! creation order. Every file is written to a `.tmp` sibling and renamed
//! into place; `.tmp` files are never read.

mod overlay;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use overlay::{decimate, OverlayEpisode, OverlayPayload, MAX_OVERLAY_POINTS};

use crate::dsl::EffectLog;
use crate::policy::{load_weights, save_weights, ModelMeta, NetConfig, PolicyNet, WeightsError};
use crate::sim::{Episode, Outcome};
use crate::track::{builtin_rapid_tracks, builtin_track, Track, BUILTIN_EXTRA_IDS};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown track `{0}`")]
    UnknownTrack(String),
    #[error("unknown episode {0}")]
    UnknownEpisode(u64),
    #[error("`{0}` already exists")]
    AlreadyExists(String),
    #[error("invalid id `{0}`")]
    InvalidId(String),
    #[error("{0}")]
    Corrupt(CorruptRecord),
    #[error("weights of model `{model}`: {source}")]
    Weights {
        model: String,
        source: WeightsError,
    },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// A stored file that failed to load.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptRecord {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for CorruptRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "corrupt record {}: {}", self.path, self.reason)
    }
}

/// One row of an episode list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeListing {
    pub id: u64,
    pub total_reward: f64,
    pub outcome: Outcome,
    pub steps: usize,
}

impl EpisodeListing {
    fn of(ep: &Episode) -> Self {
        EpisodeListing {
            id: ep.id,
            total_reward: ep.total_reward,
            outcome: ep.outcome,
            steps: ep.steps.len(),
        }
    }
}

#[derive(Clone, Debug)]
struct EpisodeLoc {
    model: String,
    track: String,
    path: PathBuf,
}

#[derive(Default)]
struct Index {
    tracks: BTreeMap<String, PathBuf>,
    models: BTreeMap<String, ModelMeta>,
    episodes: BTreeMap<u64, EpisodeLoc>,
    /// Parsed listings keyed by id, with the file size they were read at.
    listings: HashMap<u64, (u64, EpisodeListing)>,
    next_episode: u64,
}

pub struct Store {
    root: PathBuf,
    net_config: NetConfig,
    index: Mutex<Index>,
    crash_before_rename: AtomicBool,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Ids become path components, so they are restricted to a safe alphabet.
pub fn validate_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

impl Store {
    /// Opens (creating if needed) the store at `root` and rebuilds the index
    /// from disk.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        Self::open_with(root, NetConfig::default())
    }

    pub fn open_with(root: impl Into<PathBuf>, net_config: NetConfig) -> Result<Store, StoreError> {
        let root = root.into();
        for dir in [root.join("tracks"), root.join("models")] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let store = Store {
            root,
            net_config,
            index: Mutex::new(Index::default()),
            crash_before_rename: AtomicBool::new(false),
        };
        let index = store.scan()?;
        *store.index.lock().expect("store index lock") = index;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn net_config(&self) -> &NetConfig {
        &self.net_config
    }

    /// Test hook: when set, atomic writes stop after writing the temporary
    /// file, as if the process died before the rename.
    #[doc(hidden)]
    pub fn inject_crash_before_rename(&self, on: bool) {
        self.crash_before_rename.store(on, Ordering::SeqCst);
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Index> {
        self.index.lock().expect("store index lock")
    }

    fn scan(&self) -> Result<Index, StoreError> {
        let mut index = Index {
            next_episode: 1,
            ..Index::default()
        };
        let tracks = self.root.join("tracks");
        for entry in read_dir_sorted(&tracks)? {
            let name = file_name(&entry);
            if let Some(id) = name.strip_suffix(".json") {
                index.tracks.insert(id.to_string(), entry);
            }
        }
        let models = self.root.join("models");
        for dir in read_dir_sorted(&models)? {
            if !dir.is_dir() {
                continue;
            }
            let id = file_name(&dir);
            let meta_path = dir.join("meta.json");
            let Ok(text) = fs::read_to_string(&meta_path) else {
                log::warn!("skipping model directory without meta.json: {}", dir.display());
                continue;
            };
            match serde_json::from_str::<ModelMeta>(&text) {
                Ok(meta) => {
                    index.models.insert(id.clone(), meta);
                }
                Err(e) => {
                    log::warn!("skipping model with corrupt meta {}: {e}", meta_path.display());
                    continue;
                }
            }
            let episodes = dir.join("episodes");
            if !episodes.is_dir() {
                continue;
            }
            for track_dir in read_dir_sorted(&episodes)? {
                let track = file_name(&track_dir);
                for file in read_dir_sorted(&track_dir)? {
                    let name = file_name(&file);
                    let Some(n) = name.strip_suffix(".jsonl").and_then(|s| s.parse::<u64>().ok()) else {
                        continue;
                    };
                    index.next_episode = index.next_episode.max(n + 1);
                    index.episodes.insert(
                        n,
                        EpisodeLoc {
                            model: id.clone(),
                            track: track.clone(),
                            path: file,
                        },
                    );
                }
            }
        }
        Ok(index)
    }

    /// Writes `bytes` to `<path>.tmp`, syncs it and renames it over `path`.
    pub fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        {
            let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(bytes).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        if self.crash_before_rename.load(Ordering::SeqCst) {
            return Err(StoreError::Io {
                path: path.to_path_buf(),
                source: io::Error::other("injected crash before rename"),
            });
        }
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    // ---- tracks ----

    fn track_path(&self, id: &str) -> PathBuf {
        self.root.join("tracks").join(format!("{id}.json"))
    }

    /// Writes `track`, replacing any track with the same id.
    pub fn put_track(&self, track: &Track) -> Result<(), StoreError> {
        validate_id(track.id())?;
        let path = self.track_path(track.id());
        self.write_atomic(&path, track.to_json().as_bytes())?;
        self.lock().tracks.insert(track.id().to_string(), path);
        Ok(())
    }

    /// Installs the builtin tracks that are not present yet.
    pub fn install_builtin_tracks(&self) -> Result<(), StoreError> {
        let mut all = builtin_rapid_tracks();
        all.extend(BUILTIN_EXTRA_IDS.iter().filter_map(|id| builtin_track(id)));
        for t in all {
            if !self.has_track(t.id()) {
                self.put_track(&t)?;
            }
        }
        Ok(())
    }

    pub fn has_track(&self, id: &str) -> bool {
        self.lock().tracks.contains_key(id)
    }

    pub fn get_track(&self, id: &str) -> Result<Track, StoreError> {
        let path = self
            .lock()
            .tracks
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownTrack(id.to_string()))?;
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Track::from_json(&text).map_err(|e| {
            StoreError::Corrupt(CorruptRecord {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        })
    }

    pub fn track_ids(&self) -> Vec<String> {
        self.lock().tracks.keys().cloned().collect()
    }

    /// All loadable tracks in id order, plus warnings for the others.
    pub fn list_tracks(&self) -> (Vec<Track>, Vec<CorruptRecord>) {
        let mut tracks = Vec::new();
        let mut warnings = Vec::new();
        for id in self.track_ids() {
            match self.get_track(&id) {
                Ok(t) => tracks.push(t),
                Err(StoreError::Corrupt(c)) => warnings.push(c),
                Err(e) => warnings.push(CorruptRecord {
                    path: id,
                    reason: e.to_string(),
                }),
            }
        }
        (tracks, warnings)
    }

    // ---- models ----

    fn model_dir(&self, id: &str) -> PathBuf {
        self.root.join("models").join(id)
    }

    pub fn create_model(&self, meta: &ModelMeta, net: &PolicyNet<f32>) -> Result<(), StoreError> {
        validate_id(&meta.model_id)?;
        if self.lock().models.contains_key(&meta.model_id) {
            return Err(StoreError::AlreadyExists(meta.model_id.clone()));
        }
        self.save_model(meta, net)
    }

    /// Writes weights then metadata for an existing or new model.
    pub fn save_model(&self, meta: &ModelMeta, net: &PolicyNet<f32>) -> Result<(), StoreError> {
        validate_id(&meta.model_id)?;
        let dir = self.model_dir(&meta.model_id);
        self.write_atomic(&dir.join("weights.bin"), &save_weights(net))?;
        let json = serde_json::to_string_pretty(meta).expect("meta serializes");
        self.write_atomic(&dir.join("meta.json"), json.as_bytes())?;
        self.lock().models.insert(meta.model_id.clone(), meta.clone());
        Ok(())
    }

    pub fn has_model(&self, id: &str) -> bool {
        self.lock().models.contains_key(id)
    }

    pub fn model_meta(&self, id: &str) -> Result<ModelMeta, StoreError> {
        self.lock()
            .models
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownModel(id.to_string()))
    }

    pub fn list_models(&self) -> Vec<ModelMeta> {
        self.lock().models.values().cloned().collect()
    }

    pub fn load_model(&self, id: &str) -> Result<(PolicyNet<f32>, ModelMeta), StoreError> {
        let meta = self.model_meta(id)?;
        let path = self.model_dir(id).join("weights.bin");
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let net = load_weights(&bytes, &self.net_config).map_err(|source| StoreError::Weights {
            model: id.to_string(),
            source,
        })?;
        Ok((net, meta))
    }

    // ---- episodes ----

    /// Stores `episode` under `model_id`, assigning and returning a fresh
    /// episode id (also written into the stored header).
    pub fn put_episode(
        &self,
        model_id: &str,
        episode: &Episode,
        effects: Option<&EffectLog>,
    ) -> Result<u64, StoreError> {
        let mut index = self.lock();
        if !index.models.contains_key(model_id) {
            return Err(StoreError::UnknownModel(model_id.to_string()));
        }
        if !index.tracks.contains_key(&episode.track_id) {
            return Err(StoreError::UnknownTrack(episode.track_id.clone()));
        }
        let id = index.next_episode;
        let mut stored = episode.clone();
        stored.id = id;
        let dir = self.model_dir(model_id).join("episodes").join(&episode.track_id);
        let path = dir.join(format!("{id}.jsonl"));
        if let Some(log) = effects {
            self.write_atomic(&dir.join(format!("{id}.effects.jsonl")), log.to_jsonl().as_bytes())?;
        }
        let text = stored.to_jsonl();
        self.write_atomic(&path, text.as_bytes())?;
        index.next_episode = id + 1;
        index
            .listings
            .insert(id, (text.len() as u64, EpisodeListing::of(&stored)));
        index.episodes.insert(
            id,
            EpisodeLoc {
                model: model_id.to_string(),
                track: episode.track_id.clone(),
                path,
            },
        );
        Ok(id)
    }

    fn locate(&self, id: u64) -> Result<EpisodeLoc, StoreError> {
        self.lock()
            .episodes
            .get(&id)
            .cloned()
            .ok_or(StoreError::UnknownEpisode(id))
    }

    fn read_episode(path: &Path) -> Result<Episode, StoreError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Episode::from_jsonl(&text).map_err(|e| {
            StoreError::Corrupt(CorruptRecord {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        })
    }

    /// The episode and the id of the model that produced it.
    pub fn get_episode(&self, id: u64) -> Result<(String, Episode), StoreError> {
        let loc = self.locate(id)?;
        Ok((loc.model, Self::read_episode(&loc.path)?))
    }

    /// Effect log of a programmed episode, if one was stored.
    pub fn get_effects(&self, id: u64) -> Result<Option<EffectLog>, StoreError> {
        let loc = self.locate(id)?;
        let path = loc.path.with_file_name(format!("{id}.effects.jsonl"));
        match fs::read_to_string(&path) {
            Ok(text) => EffectLog::from_jsonl(&text).map(Some).map_err(|e| {
                StoreError::Corrupt(CorruptRecord {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    fn check_pair(&self, model_id: &str, track_id: &str) -> Result<Vec<(u64, PathBuf)>, StoreError> {
        let index = self.lock();
        if !index.models.contains_key(model_id) {
            return Err(StoreError::UnknownModel(model_id.to_string()));
        }
        if !index.tracks.contains_key(track_id) {
            return Err(StoreError::UnknownTrack(track_id.to_string()));
        }
        Ok(index
            .episodes
            .iter()
            .filter(|(_, l)| l.model == model_id && l.track == track_id)
            .map(|(id, l)| (*id, l.path.clone()))
            .collect())
    }

    /// Episodes of a (model, track) pair in creation order. Files that fail
    /// to load are skipped and reported.
    pub fn list_episodes(
        &self,
        model_id: &str,
        track_id: &str,
    ) -> Result<(Vec<EpisodeListing>, Vec<CorruptRecord>), StoreError> {
        let mut out = Vec::new();
        let mut warnings = Vec::new();
        for (id, path) in self.check_pair(model_id, track_id)? {
            let size = fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
            let cached = self
                .lock()
                .listings
                .get(&id)
                .filter(|(s, _)| *s == size)
                .map(|(_, l)| l.clone());
            if let Some(l) = cached {
                out.push(l);
                continue;
            }
            match Self::read_episode(&path) {
                Ok(ep) => {
                    let mut listing = EpisodeListing::of(&ep);
                    listing.id = id;
                    self.lock().listings.insert(id, (size, listing.clone()));
                    out.push(listing);
                }
                Err(StoreError::Corrupt(c)) => {
                    log::warn!("{c}");
                    warnings.push(c);
                }
                Err(e) => warnings.push(CorruptRecord {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                }),
            }
        }
        Ok((out, warnings))
    }

    /// Loads every readable episode of the pair, in creation order.
    pub fn load_episodes(
        &self,
        model_id: &str,
        track_id: &str,
    ) -> Result<(Vec<Episode>, Vec<CorruptRecord>), StoreError> {
        let mut out = Vec::new();
        let mut warnings = Vec::new();
        for (_, path) in self.check_pair(model_id, track_id)? {
            match Self::read_episode(&path) {
                Ok(ep) => out.push(ep),
                Err(StoreError::Corrupt(c)) => warnings.push(c),
                Err(e) => warnings.push(CorruptRecord {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                }),
            }
        }
        Ok((out, warnings))
    }

    /// Paths and endpoints for the pair; `only` restricts to one episode.
    pub fn overlay(
        &self,
        model_id: &str,
        track_id: &str,
        only: Option<u64>,
    ) -> Result<OverlayPayload, StoreError> {
        let (episodes, warnings) = self.load_episodes(model_id, track_id)?;
        if let Some(id) = only {
            if !episodes.iter().any(|e| e.id == id) {
                return Err(StoreError::UnknownEpisode(id));
            }
        }
        let selected: Vec<&Episode> = episodes.iter().filter(|e| only.is_none_or(|id| e.id == id)).collect();
        Ok(OverlayPayload::build(model_id, track_id, &selected, warnings))
    }

    /// `(ordinal, total reward)` in training order, ordinals from 1.
    pub fn reward_curve(&self, model_id: &str, track_id: &str) -> Result<Vec<(u64, f64)>, StoreError> {
        let (list, _) = self.list_episodes(model_id, track_id)?;
        Ok(list
            .iter()
            .enumerate()
            .map(|(i, l)| (i as u64 + 1, l.total_reward))
            .collect())
    }

    pub fn episode_count(&self) -> usize {
        self.lock().episodes.len()
    }
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| !file_name(p).ends_with(".tmp"))
        .collect();
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}
