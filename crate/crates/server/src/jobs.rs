//! Training jobs, their event logs and on-disk records.

use std::sync::atomic::AtomicBool;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tokio::sync::watch;
use trackpilot_core::sim::Outcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Cancelled,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Cancelled | JobState::Failed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum EventKind {
    JobStarted {
        model_id: String,
        track_id: String,
        episodes: usize,
    },
    EpisodeCompleted {
        /// Position within the job, from 1.
        ordinal: u64,
        episode_id: u64,
        total_reward: f64,
        outcome: Outcome,
        steps: usize,
    },
    JobDone {
        trained_episodes: u64,
    },
    JobCancelled {
        completed_episodes: u64,
    },
    JobFailed {
        error: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::JobStarted { .. } => "job_started",
            EventKind::EpisodeCompleted { .. } => "episode_completed",
            EventKind::JobDone { .. } => "job_done",
            EventKind::JobCancelled { .. } => "job_cancelled",
            EventKind::JobFailed { .. } => "job_failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            EventKind::JobDone { .. } | EventKind::JobCancelled { .. } | EventKind::JobFailed { .. }
        )
    }
}

/// One message of a job's event stream. `seq` counts from 0 without gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobEvent {
    pub v: u32,
    pub seq: u64,
    pub job_id: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobView {
    pub job_id: String,
    pub model_id: String,
    pub track_id: String,
    pub episodes: usize,
    pub seed: u64,
    pub state: JobState,
    /// Episodes completed so far.
    pub progress: u64,
    pub created_at: String,
}

/// Persisted form: the view plus the full event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobRecord {
    #[serde(flatten)]
    pub job: JobView,
    pub events: Vec<JobEvent>,
}

pub struct JobHandle {
    record: Mutex<JobRecord>,
    pub(crate) cancel: AtomicBool,
    tx: watch::Sender<usize>,
}

impl JobHandle {
    pub(crate) fn new(record: JobRecord) -> Self {
        let (tx, _) = watch::channel(record.events.len());
        JobHandle {
            record: Mutex::new(record),
            cancel: AtomicBool::new(false),
            tx,
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, JobRecord> {
        self.record.lock().expect("job record lock")
    }

    pub fn view(&self) -> JobView {
        self.lock().job.clone()
    }

    pub fn record(&self) -> JobRecord {
        self.lock().clone()
    }

    pub fn event(&self, seq: usize) -> Option<JobEvent> {
        self.lock().events.get(seq).cloned()
    }

    pub fn events(&self) -> Vec<JobEvent> {
        self.lock().events.clone()
    }

    /// True once the terminal event exists and `next` is past it.
    pub fn exhausted(&self, next: usize) -> bool {
        let r = self.lock();
        r.job.state.is_terminal() && next >= r.events.len()
    }

    /// Receiver notified with the event count after every append.
    pub fn subscribe(&self) -> watch::Receiver<usize> {
        self.tx.subscribe()
    }

    /// Appends an event, applies its state change, then runs `persist` on
    /// the updated record before notifying subscribers.
    pub(crate) fn push(&self, kind: EventKind, persist: impl FnOnce(&JobRecord)) -> JobEvent {
        let mut r = self.lock();
        match &kind {
            EventKind::JobStarted { .. } => r.job.state = JobState::Running,
            EventKind::EpisodeCompleted { ordinal, .. } => r.job.progress = *ordinal,
            EventKind::JobDone { .. } => r.job.state = JobState::Done,
            EventKind::JobCancelled { .. } => r.job.state = JobState::Cancelled,
            EventKind::JobFailed { .. } => r.job.state = JobState::Failed,
        }
        let ev = JobEvent {
            v: 1,
            seq: r.events.len() as u64,
            job_id: r.job.job_id.clone(),
            kind,
        };
        r.events.push(ev.clone());
        persist(&r);
        let n = r.events.len();
        drop(r);
        self.tx.send_replace(n);
        ev
    }
}
