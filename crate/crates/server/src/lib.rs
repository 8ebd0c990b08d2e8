//! Remote training service.
//!
//! Requests are `POST /api/<endpoint>` with a JSON object body; every
//! request and response carries `"v": 1`. Errors come back as
//! `{"v":1,"error":{"kind","message","diagnostics"}}` with status 400
//! (`BadRequest`), 404 (`UnknownId`, `UnknownEndpoint`), 409 (`ModelBusy`),
//! 422 (`ValidationFailed`) or 500 (`Internal`).
//!
//! `GET /api/events/<job-id>` is a server-sent event stream: the job's
//! backlog first, then live events, closing after `job_done`,
//! `job_cancelled` or `job_failed`.
//!
//! Training runs on one background thread per job. Job records live in
//! `<store>/jobs/<job-id>.json`; jobs found unfinished at startup are marked
//! failed.

mod api;
mod clock;
mod error;
mod http;
mod jobs;

pub use api::{EpisodeHook, Server, ServerConfig, ENDPOINTS, MAX_JOB_EPISODES};
pub use clock::{Clock, FixedClock, SystemClock};
pub use error::{ApiError, ErrorKind};
pub use http::{router, serve, serve_on};
pub use jobs::{EventKind, JobEvent, JobHandle, JobRecord, JobState, JobView};
