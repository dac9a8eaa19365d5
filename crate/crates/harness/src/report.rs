//! Metrics recomputed from persisted traces only.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stateact_core::adapt::NodeOutcome;
use stateact_core::eval::{comparison_table, DecompositionStats, EpisodeSummary, EpisodeView, EvalError, MetricsReport};
use stateact_core::{AgentVariant, Format, StepRecord, Termination};

use crate::persist::{read_episode, EpisodeFile};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no complete episode traces under {0}")]
    EmptyInput(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Metrics(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub reports: Vec<MetricsReport>,
    pub comparison: String,
    pub episodes: usize,
    /// Lines that could not be parsed and were skipped.
    pub warnings: usize,
    /// Files lacking a header or a result line.
    pub incomplete_episodes: usize,
}

impl ReportOutput {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            out.push_str(&r.to_table());
            out.push('\n');
        }
        out.push_str(&self.comparison);
        out.push_str(&format!("\nepisodes: {}\n", self.episodes));
        out.push_str(&format!("warnings: {}\n", self.warnings));
        if self.incomplete_episodes > 0 {
            out.push_str(&format!("incomplete episodes: {}\n", self.incomplete_episodes));
        }
        out
    }
}

fn collect_jsonl(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let io = |source| ReportError::Io { path: dir.into(), source };
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_dir() {
            collect_jsonl(&path, out)?;
        } else if path.extension().is_some_and(|x| x == "jsonl") {
            out.push(path);
        }
    }
    Ok(())
}

type GroupKey = (String, bool, bool, bool, bool, bool);

fn group_key(env: &str, v: &AgentVariant) -> GroupKey {
    (env.to_string(), v.include_goal, v.include_state, v.include_thought, v.format == Format::Json, v.track_visited)
}

fn decomposition_stats(files: &[&EpisodeFile]) -> Option<DecompositionStats> {
    if files.iter().all(|f| f.header.d_max.is_none()) {
        return None;
    }
    let mut stats = DecompositionStats::default();
    for f in files {
        if f.nodes.is_empty() {
            continue;
        }
        stats.trees += 1;
        stats.nodes += f.nodes.len();
        stats.max_depth = stats.max_depth.max(f.nodes.iter().map(|n| n.depth).max().unwrap_or(0));
        if f.nodes.iter().any(|n| n.parent.is_none() && n.outcome == NodeOutcome::Decomposed) {
            stats.decomposed_roots += 1;
        }
    }
    Some(stats)
}

/// Reads every `*.jsonl` trace under `dir` (under `dir/episodes` when that
/// exists) and computes one report per (environment, variant).
pub fn report_dir(dir: &Path) -> Result<ReportOutput, ReportError> {
    let episodes_dir = dir.join("episodes");
    let root = if episodes_dir.is_dir() { episodes_dir } else { dir.to_path_buf() };
    let mut paths = Vec::new();
    collect_jsonl(&root, &mut paths)?;
    paths.sort();

    let mut warnings = 0;
    let mut incomplete = 0;
    let mut files = Vec::new();
    for path in &paths {
        let read = read_episode(path).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        warnings += read.corrupt_lines;
        match read.episode {
            Some(e) => files.push(e),
            None => incomplete += 1,
        }
    }
    if files.is_empty() {
        return Err(ReportError::EmptyInput(dir.to_path_buf()));
    }

    let mut groups: BTreeMap<GroupKey, Vec<&EpisodeFile>> = BTreeMap::new();
    for f in &files {
        groups.entry(group_key(&f.header.environment, &f.header.variant)).or_default().push(f);
    }
    let bucket_width = 10;
    let mut reports = Vec::new();
    for group in groups.values() {
        let records: Vec<Vec<StepRecord>> = group.iter().map(|f| f.records()).collect();
        let views: Vec<EpisodeView<'_>> = group
            .iter()
            .zip(&records)
            .map(|(f, r)| EpisodeView {
                summary: EpisodeSummary {
                    success: f.result.success,
                    steps_taken: f.result.steps_taken,
                    max_steps: f.result.max_steps,
                },
                records: r,
                parse_failure: f.result.termination == Termination::ParseFailure,
            })
            .collect();
        let head = &group[0].header;
        let mut report = MetricsReport::compute(&head.variant, &head.environment, &views, bucket_width)?;
        report.decomposition = decomposition_stats(group);
        reports.push(report);
    }
    Ok(ReportOutput {
        comparison: comparison_table(&reports),
        reports,
        episodes: files.len(),
        warnings,
        incomplete_episodes: incomplete,
    })
}

/// Writes `report.txt` and `report.json` into `dir`.
pub fn write_report(dir: &Path, out: &ReportOutput) -> Result<(), ReportError> {
    let io = |path: PathBuf| move |source| ReportError::Io { path, source };
    let txt = dir.join("report.txt");
    fs::write(&txt, out.to_text()).map_err(io(txt.clone()))?;
    let json = dir.join("report.json");
    let body = serde_json::to_string_pretty(out).map_err(|e| ReportError::Io { path: json.clone(), source: e.into() })?;
    fs::write(&json, body).map_err(io(json.clone()))?;
    Ok(())
}
