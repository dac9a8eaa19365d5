//! Record/replay store for completions, kept as JSONL.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stateact_core::backend::BackendError;
use stateact_core::{CompletionRequest, ModelBackend};

/// One stored completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub episode: String,
    pub step: usize,
    pub prompt_digest: String,
    pub completion: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayMode {
    /// Look up by (episode, step).
    #[default]
    ByStep,
    /// Look up by the SHA-256 of the prompt.
    ByPromptDigest,
}

/// Hex SHA-256 of a prompt.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cannot access replay store {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("replay store {path} line {line}: {source}")]
    Parse { path: PathBuf, line: usize, source: serde_json::Error },
}

/// In-memory index over stored completions. Later records win on key clashes.
#[derive(Debug, Clone, Default)]
pub struct ReplayStore {
    by_step: HashMap<(String, usize), String>,
    by_digest: HashMap<String, String>,
}

impl ReplayStore {
    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        let mut s = Self::default();
        for r in records {
            s.insert(r);
        }
        s
    }

    pub fn insert(&mut self, r: ReplayRecord) {
        self.by_digest.insert(r.prompt_digest, r.completion.clone());
        self.by_step.insert((r.episode, r.step), r.completion);
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let io = |source| StoreError::Io { path: path.to_path_buf(), source };
        let file = File::open(path).map_err(io)?;
        let mut s = Self::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let r: ReplayRecord = serde_json::from_str(&line)
                .map_err(|source| StoreError::Parse { path: path.to_path_buf(), line: i + 1, source })?;
            s.insert(r);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.by_step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_step.is_empty()
    }

    pub fn get_step(&self, episode: &str, step: usize) -> Option<&str> {
        self.by_step.get(&(episode.to_string(), step)).map(String::as_str)
    }

    pub fn get_digest(&self, digest: &str) -> Option<&str> {
        self.by_digest.get(digest).map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBackend {
    store: ReplayStore,
    mode: ReplayMode,
}

impl ReplayBackend {
    pub fn new(store: ReplayStore, mode: ReplayMode) -> Self {
        Self { store, mode }
    }
}

impl ModelBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let found = match self.mode {
            ReplayMode::ByStep => {
                let key = request.key.as_ref().ok_or_else(|| BackendError::ReplayMiss("request has no key".into()))?;
                self.store.get_step(&key.episode, key.step).ok_or_else(|| {
                    BackendError::ReplayMiss(format!("episode {} step {}", key.episode, key.step))
                })?
            }
            ReplayMode::ByPromptDigest => {
                let digest = prompt_digest(&request.prompt);
                self.store.get_digest(&digest).ok_or_else(|| BackendError::ReplayMiss(format!("prompt {digest}")))?
            }
        };
        Ok(found.to_string())
    }
}

/// Appends every successful completion of the inner backend to a store file.
pub struct RecordingBackend<B> {
    inner: B,
    out: Mutex<BufWriter<File>>,
}

impl<B> RecordingBackend<B> {
    pub fn create(inner: B, path: &Path) -> Result<Self, StoreError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| StoreError::Io { path: path.to_path_buf(), source })?;
        Ok(Self { inner, out: Mutex::new(BufWriter::new(file)) })
    }

    pub fn record(&self, record: &ReplayRecord) -> std::io::Result<()> {
        let line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(out, "{line}")?;
        out.flush()
    }
}

impl<B: ModelBackend> ModelBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let completion = self.inner.complete(request)?;
        let (episode, step) = request.key.as_ref().map(|k| (k.episode.clone(), k.step)).unwrap_or_default();
        let record = ReplayRecord { episode, step, prompt_digest: prompt_digest(&request.prompt), completion };
        self.record(&record).map_err(|e| BackendError::Transport(format!("recording failed: {e}")))?;
        Ok(record.completion)
    }
}
