//! Heuristic gold-state tracking and episode metrics.
//!
//! The gold state is inferred only from accepted actions and their
//! observations, never from model output, so it can grade the state the model
//! writes down.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeResult, StepRecord};
use crate::context::{AgentVariant, Dialect, Observation, StateFields};
use crate::household::{normalize_action, Verb, STARTING_LOCATION};
use crate::textcraft::{format_inventory, Command};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoldState {
    Household { location: String, inventory: String, visited: Vec<String> },
    Textcraft { inventory: BTreeMap<String, u32> },
    /// Dialects without a simulator (webshop).
    Untracked,
}

impl GoldState {
    pub fn initial(dialect: Dialect) -> Self {
        match dialect {
            Dialect::Household => GoldState::Household {
                location: STARTING_LOCATION.to_string(),
                inventory: "None".to_string(),
                visited: Vec::new(),
            },
            Dialect::Textcraft => GoldState::Textcraft { inventory: BTreeMap::new() },
            Dialect::Webshop => GoldState::Untracked,
        }
    }

    /// All tracked keys, in the same spelling as environment ground truth.
    pub fn fields(&self) -> StateFields {
        match self {
            GoldState::Household { location, inventory, visited } => {
                let visited = if visited.is_empty() { "None".to_string() } else { visited.join(", ") };
                StateFields::from_pairs([
                    ("current location", location.clone()),
                    ("current inventory", inventory.clone()),
                    ("locations visited", visited),
                ])
            }
            GoldState::Textcraft { inventory } => {
                StateFields::from_pairs([("current inventory", format_inventory(inventory))])
            }
            GoldState::Untracked => StateFields::new(),
        }
    }
}

/// Advances the gold state by one step. Rejected actions change nothing.
pub fn gold_update(prev: &GoldState, action: &str, obs: &Observation) -> GoldState {
    if !obs.accepted {
        return prev.clone();
    }
    let mut next = prev.clone();
    match &mut next {
        GoldState::Household { location, inventory, visited } => {
            let Ok(a) = normalize_action(action, true) else { return next };
            match a.verb {
                Verb::GoTo => {
                    *location = a.operands[0].clone();
                    if !visited.contains(&a.operands[0]) {
                        visited.push(a.operands[0].clone());
                    }
                }
                Verb::Take => *inventory = a.operands[0].clone(),
                Verb::Put => *inventory = "None".to_string(),
                _ => {}
            }
        }
        GoldState::Textcraft { inventory } => match Command::parse(action) {
            Ok(Command::Get { item, count }) => *inventory.entry(item).or_insert(0) += count,
            Ok(Command::Craft(r)) => {
                for (i, n) in &r.inputs {
                    if let Some(slot) = inventory.get_mut(i) {
                        *slot = slot.saturating_sub(*n);
                    }
                }
                inventory.retain(|_, n| *n > 0);
                *inventory.entry(r.output.0.clone()).or_insert(0) += r.output.1;
            }
            _ => {}
        },
        GoldState::Untracked => {}
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no episodes to evaluate")]
    EmptyInput,
    #[error("the variant does not emit state")]
    NoStateVariant,
}

fn norm(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateAccuracy {
    /// Fraction of steps whose every tracked key matched.
    pub overall: f64,
    pub per_key: Vec<(String, f64)>,
    pub steps: usize,
}

/// Compares the emitted state with the gold state at each step on the
/// variant's state keys, after trimming and lowercasing. A step with a
/// missing key, or with no parsed state at all, counts as wrong.
pub fn state_accuracy(records: &[StepRecord], variant: &AgentVariant) -> Result<StateAccuracy, EvalError> {
    if !variant.include_state {
        return Err(EvalError::NoStateVariant);
    }
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let keys = variant.state_keys();
    let mut all_ok = 0usize;
    let mut key_ok = alloc::vec![0usize; keys.len()];
    for r in records {
        let mut every = true;
        for (i, k) in keys.iter().enumerate() {
            let emitted = r.state.as_ref().and_then(|s| s.get(k));
            let gold = r.gold_state.get(k);
            let ok = matches!((emitted, gold), (Some(e), Some(g)) if norm(e) == norm(g));
            if ok {
                key_ok[i] += 1;
            }
            every &= ok;
        }
        if every {
            all_ok += 1;
        }
    }
    let n = records.len() as f64;
    Ok(StateAccuracy {
        overall: all_ok as f64 / n,
        per_key: keys.iter().zip(key_ok).map(|(k, c)| (k.to_string(), c as f64 / n)).collect(),
        steps: records.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScope {
    /// Every episode; failures count at their step budget.
    All,
    SolvedOnly,
}

/// The two numbers `avg_steps` and `bucket_success` need from an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub success: bool,
    pub steps_taken: usize,
    pub max_steps: usize,
}

impl From<&EpisodeResult> for EpisodeSummary {
    fn from(r: &EpisodeResult) -> Self {
        Self { success: r.success, steps_taken: r.steps_taken, max_steps: r.max_steps }
    }
}

impl EpisodeSummary {
    /// Steps charged to the episode: failures count the full budget.
    pub fn charged_steps(&self) -> usize {
        if self.success {
            self.steps_taken
        } else {
            self.max_steps.max(self.steps_taken)
        }
    }
}

pub fn avg_steps(results: &[EpisodeSummary], scope: StepScope) -> Result<f64, EvalError> {
    let picked: Vec<usize> = match scope {
        StepScope::All => results.iter().map(EpisodeSummary::charged_steps).collect(),
        StepScope::SolvedOnly => results.iter().filter(|r| r.success).map(|r| r.steps_taken).collect(),
    };
    if picked.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(picked.iter().sum::<usize>() as f64 / picked.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub label: String,
    pub attempted: usize,
    pub solved: usize,
}

/// Groups episodes into `1-10`, `11-20`, ... by charged steps, up to the
/// largest budget. Failed episodes land in the budget's bucket.
pub fn bucket_success(results: &[EpisodeSummary], width: usize) -> Result<Vec<Bucket>, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let width = width.max(1);
    let top = results.iter().map(|r| r.max_steps.max(r.charged_steps())).max().unwrap_or(width).max(1);
    let count = top.div_ceil(width);
    let mut buckets: Vec<Bucket> = (0..count)
        .map(|i| Bucket { label: format!("{}-{}", i * width + 1, (i + 1) * width), attempted: 0, solved: 0 })
        .collect();
    for r in results {
        let steps = r.charged_steps().max(1);
        let b = &mut buckets[(steps - 1) / width];
        b.attempted += 1;
        if r.success {
            b.solved += 1;
        }
    }
    Ok(buckets)
}

/// Metrics of one variant on one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: String,
    pub environment: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub avg_steps_all: f64,
    pub avg_steps_solved: Option<f64>,
    pub state_accuracy: Option<f64>,
    #[serde(default)]
    pub state_accuracy_per_key: Vec<(String, f64)>,
    pub buckets: Vec<Bucket>,
    #[serde(default)]
    pub goal_drift_steps: usize,
    #[serde(default)]
    pub parse_failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionStats>,
}

/// Aggregates over decomposition trees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionStats {
    pub trees: usize,
    pub decomposed_roots: usize,
    pub max_depth: usize,
    pub nodes: usize,
}

/// One episode's contribution to a report.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeView<'a> {
    pub summary: EpisodeSummary,
    pub records: &'a [StepRecord],
    pub parse_failure: bool,
}

impl MetricsReport {
    pub fn compute(
        variant: &AgentVariant,
        environment: &str,
        episodes: &[EpisodeView<'_>],
        bucket_width: usize,
    ) -> Result<Self, EvalError> {
        let summaries: Vec<EpisodeSummary> = episodes.iter().map(|e| e.summary).collect();
        let avg_all = avg_steps(&summaries, StepScope::All)?;
        let solved = summaries.iter().filter(|s| s.success).count();
        let all_records: Vec<StepRecord> = episodes.iter().flat_map(|e| e.records.iter().cloned()).collect();
        let acc = state_accuracy(&all_records, variant).ok();
        Ok(Self {
            variant: variant.label(),
            environment: environment.to_string(),
            episodes: summaries.len(),
            success_rate: solved as f64 / summaries.len() as f64,
            avg_steps_all: avg_all,
            avg_steps_solved: avg_steps(&summaries, StepScope::SolvedOnly).ok(),
            state_accuracy: acc.as_ref().map(|a| a.overall),
            state_accuracy_per_key: acc.map(|a| a.per_key).unwrap_or_default(),
            buckets: bucket_success(&summaries, bucket_width)?,
            goal_drift_steps: all_records.iter().filter(|r| r.goal_drift).count(),
            parse_failures: episodes.iter().filter(|e| e.parse_failure).count(),
            decomposition: None,
        })
    }

    /// Aligned plain-text block for one report.
    pub fn to_table(&self) -> String {
        let row = |label: &str, value: String| format!("  {label:<20}{value}\n");
        let mut out = format!("{} on {} ({} episodes)\n", self.variant, self.environment, self.episodes);
        out.push_str(&row("success rate", format!("{:.2}", self.success_rate)));
        out.push_str(&row("avg steps (all)", format!("{:.2}", self.avg_steps_all)));
        out.push_str(&row("avg steps (solved)", self.avg_steps_solved.map_or("n/a".into(), |v| format!("{v:.2}"))));
        out.push_str(&row("state accuracy", self.state_accuracy.map_or("n/a".into(), |v| format!("{v:.2}"))));
        for (k, a) in &self.state_accuracy_per_key {
            out.push_str(&row(&format!("  {k}"), format!("{a:.2}")));
        }
        out.push_str(&row("goal drift steps", self.goal_drift_steps.to_string()));
        out.push_str(&row("parse failures", self.parse_failures.to_string()));
        if let Some(d) = &self.decomposition {
            out.push_str(&row(
                "decomposition",
                format!("{} trees, {} decomposed, {} nodes, max depth {}", d.trees, d.decomposed_roots, d.nodes, d.max_depth),
            ));
        }
        out.push_str("  steps    attempted  solved\n");
        for b in &self.buckets {
            out.push_str(&format!("  {:<8} {:>9} {:>7}\n", b.label, b.attempted, b.solved));
        }
        out
    }
}

/// Cross-variant success-rate table: rows are variants, columns environments.
pub fn comparison_table(reports: &[MetricsReport]) -> String {
    let mut envs: Vec<&str> = reports.iter().map(|r| r.environment.as_str()).collect();
    envs.sort_unstable();
    envs.dedup();
    let mut rows: Vec<&str> = Vec::new();
    for r in reports {
        if !rows.contains(&r.variant.as_str()) {
            rows.push(&r.variant);
        }
    }
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(7).max(7);
    let mut out = format!("{:<width$}", "Variant");
    for e in &envs {
        out.push_str(&format!("  {e:>10}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{row:<width$}"));
        for e in &envs {
            match reports.iter().find(|r| r.variant == row && r.environment == *e) {
                Some(r) => out.push_str(&format!("  {:>10.2}", r.success_rate)),
                None => out.push_str(&format!("  {:>10}", "-")),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accepted(text: &str) -> Observation {
        Observation { step_index: 1, text: text.into(), accepted: true }
    }

    #[test]
    fn household_gold_updates() {
        let s = GoldState::Household { location: "table 1".into(), inventory: "None".into(), visited: Vec::new() };
        let s = gold_update(&s, "go to fridge 1", &accepted("The fridge 1 is closed."));
        assert_eq!(s.fields().get("current location"), Some("fridge 1"));
        let rejected = Observation { step_index: 2, text: "Nothing happens.".into(), accepted: false };
        assert_eq!(gold_update(&s, "take apple 1 from fridge 1", &rejected), s);
        let s = GoldState::Household { location: "diningtable 1".into(), inventory: "None".into(), visited: Vec::new() };
        let s = gold_update(&s, "take apple 1 from diningtable 1", &accepted("You pick up the apple 1 from the diningtable 1."));
        assert_eq!(s.fields().get("current inventory"), Some("apple 1"));
    }

    fn ep(steps: usize, success: bool) -> EpisodeSummary {
        EpisodeSummary { success, steps_taken: steps, max_steps: 50 }
    }

    #[test]
    fn avg_steps_scopes() {
        let all = [ep(5, true), ep(10, true), ep(15, true)];
        assert_eq!(avg_steps(&all, StepScope::All), Ok(10.0));
        let mixed = [ep(7, true), ep(12, false)];
        assert_eq!(avg_steps(&mixed, StepScope::All), Ok(28.5));
        assert_eq!(avg_steps(&mixed, StepScope::SolvedOnly), Ok(7.0));
        assert_eq!(avg_steps(&[], StepScope::All), Err(EvalError::EmptyInput));
    }

    #[test]
    fn buckets_fixture() {
        let b = bucket_success(&[ep(3, true), ep(12, true), ep(44, true), ep(50, false)], 10).unwrap();
        let got: Vec<(&str, usize, usize)> = b.iter().map(|b| (b.label.as_str(), b.attempted, b.solved)).collect();
        assert_eq!(got, [("1-10", 1, 1), ("11-20", 1, 1), ("21-30", 0, 0), ("31-40", 0, 0), ("41-50", 2, 1)]);
    }
}
