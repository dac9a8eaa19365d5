//! Batch harness for chain-of-states agents.
//!
//! Adds what the `stateact-core` crate leaves out: an HTTP chat-completions
//! backend, a record/replay store, JSONL episode traces, TOML world and run
//! configuration files, a parallel runner, and report generation that works
//! from persisted traces alone.

pub mod config;
pub mod http;
pub mod persist;
pub mod replay;
pub mod report;
pub mod runner;
pub mod stub;
pub mod worldfile;

pub use config::{BackendConfig, ConfigError, RunConfig};
pub use http::{HttpBackend, HttpConfig};
pub use replay::{prompt_digest, RecordingBackend, ReplayBackend, ReplayMode, ReplayRecord, ReplayStore};
pub use report::{report_dir, ReportError, ReportOutput};
pub use runner::{run, RunError, RunOutcome};

/// Backends shared across worker threads.
pub type SharedBackend = std::sync::Arc<dyn stateact_core::ModelBackend + Send + Sync>;
