//! Recursive decomposition on failure, bounded by a maximum depth.
//!
//! A node first runs the base agent on its task. If that fails and the node
//! is shallower than `d_max`, a planner call splits the task into numbered
//! subtasks that all must succeed; they run in order against the same live
//! environment, each as a child node.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{run_episode, EpisodeOptions, EpisodeResult, Termination};
use crate::backend::{BackendError, ModelBackend, RequestKind};
use crate::codec::FewShotSet;
use crate::context::{AgentVariant, Trace};
use crate::env::Environment;

/// Most subtasks kept from one plan.
pub const MAX_SUBTASKS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeOutcome {
    Solved,
    Failed,
    Decomposed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionNode {
    /// Dotted path: `0`, `0.1`, `0.1.2`.
    pub id: String,
    pub parent: Option<String>,
    pub task: String,
    pub depth: usize,
    pub outcome: NodeOutcome,
    /// Whether the node's task ended up achieved.
    pub success: bool,
    pub children: Vec<DecompositionNode>,
    /// Why the node failed without an episode, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DecompositionNode {
    pub fn max_depth(&self) -> usize {
        self.children.iter().map(DecompositionNode::max_depth).max().unwrap_or(self.depth).max(self.depth)
    }

    pub fn count(&self) -> usize {
        1 + self.children.iter().map(DecompositionNode::count).sum::<usize>()
    }

    /// Pre-order walk.
    pub fn walk(&self) -> Vec<&DecompositionNode> {
        let mut out = alloc::vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdaptError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("planner output has no numbered lines")]
    ParseFailure,
}

/// Few-shot planner prompt. The text holds `<OBSERVATION>` and `<TASK>`
/// placeholders for the current first observation and task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannerPrompt {
    pub template: String,
}

impl PlannerPrompt {
    pub fn new(template: impl Into<String>) -> Self {
        Self { template: template.into() }
    }

    pub fn render(&self, task: &str, trace: &Trace) -> String {
        self.template.replace("<OBSERVATION>", &trace.initial.text).replace("<TASK>", task)
    }
}

/// Reads `1. x`, `2) y` lines; drops duplicates; keeps at most eight.
pub fn parse_plan(text: &str) -> Result<Vec<String>, AdaptError> {
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let l = line.trim().trim_start_matches('>').trim_start();
        let digits = l.chars().take_while(char::is_ascii_digit).count();
        if digits == 0 {
            continue;
        }
        let rest = &l[digits..];
        let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) else { continue };
        let item = rest.trim();
        if item.is_empty() || out.iter().any(|o| o == item) {
            continue;
        }
        out.push(item.to_string());
    }
    if out.is_empty() {
        return Err(AdaptError::ParseFailure);
    }
    out.truncate(MAX_SUBTASKS);
    Ok(out)
}

/// Asks the planner for subtasks of `task`.
pub fn plan_decompose(
    task: &str,
    trace: &Trace,
    backend: &dyn ModelBackend,
    planner: &PlannerPrompt,
    opts: &EpisodeOptions,
    node_id: &str,
) -> Result<Vec<String>, AdaptError> {
    let request = opts
        .request
        .build(planner.render(task, trace))
        .with_kind(RequestKind::Plan)
        .with_key(format!("{}#{node_id}/plan", opts.episode_id), 0);
    let raw = backend.complete(&request)?;
    parse_plan(&raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptOptions {
    pub d_max: usize,
    pub max_steps: usize,
}

/// A finished tree plus every base-agent episode it ran, keyed by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptResult {
    pub success: bool,
    pub root: DecompositionNode,
    pub episodes: Vec<(String, EpisodeResult)>,
}

impl AdaptResult {
    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(|(_, e)| e.steps_taken).sum()
    }
}

struct Ctx<'a, E: ?Sized> {
    env: &'a mut E,
    variant: &'a AgentVariant,
    backend: &'a dyn ModelBackend,
    few_shot: &'a FewShotSet,
    planner: &'a PlannerPrompt,
    opts: &'a AdaptOptions,
    episode: &'a EpisodeOptions,
    episodes: Vec<(String, EpisodeResult)>,
}

/// Runs the task with decomposition on failure. Only a backend error aborts
/// the tree; everything else is recorded in node outcomes.
pub fn run_adapt<E: Environment + ?Sized>(
    env: &mut E,
    variant: &AgentVariant,
    backend: &dyn ModelBackend,
    few_shot: &FewShotSet,
    planner: &PlannerPrompt,
    opts: &AdaptOptions,
    episode: &EpisodeOptions,
) -> Result<AdaptResult, AdaptError> {
    let mut cx = Ctx { env, variant, backend, few_shot, planner, opts, episode, episodes: Vec::new() };
    let root = run_node(&mut cx, None, None, "0".to_string(), 0)?;
    cx.env.set_focus(None).ok();
    Ok(AdaptResult { success: root.success, root, episodes: cx.episodes })
}

fn run_node<E: Environment + ?Sized>(
    cx: &mut Ctx<'_, E>,
    subtask: Option<&str>,
    parent: Option<String>,
    id: String,
    depth: usize,
) -> Result<DecompositionNode, AdaptError> {
    let leaf = |task: String, outcome, note: Option<String>| DecompositionNode {
        id: id.clone(),
        parent: parent.clone(),
        task,
        depth,
        outcome,
        success: outcome == NodeOutcome::Solved,
        children: Vec::new(),
        note,
    };
    if let Err(e) = cx.env.set_focus(subtask) {
        return Ok(leaf(subtask.unwrap_or_default().to_string(), NodeOutcome::Failed, Some(e.to_string())));
    }
    let initial = cx.env.initial_observation();
    let task = crate::goal::extract_goal(&initial).unwrap_or_else(|_| subtask.unwrap_or_default().to_string());
    if cx.env.solved() {
        return Ok(leaf(task, NodeOutcome::Solved, Some("already satisfied".to_string())));
    }
    let episode_opts = EpisodeOptions { episode_id: format!("{}#{id}", cx.episode.episode_id), ..cx.episode.clone() };
    let result = run_episode(cx.env, cx.variant, cx.backend, cx.few_shot, cx.opts.max_steps, &episode_opts);
    let termination = result.termination;
    let trace = result.trace(initial);
    let error = result.records.last().and_then(|r| r.error.clone());
    cx.episodes.push((id.clone(), result));
    if termination == Termination::BackendError {
        return Err(AdaptError::Backend(BackendError::Transport(error.unwrap_or_default())));
    }
    if termination == Termination::Solved {
        return Ok(leaf(task, NodeOutcome::Solved, None));
    }
    if depth >= cx.opts.d_max {
        return Ok(leaf(task, NodeOutcome::Failed, None));
    }
    let plan = match plan_decompose(&task, &trace, cx.backend, cx.planner, cx.episode, &id) {
        Ok(p) => p,
        Err(AdaptError::ParseFailure) => {
            return Ok(leaf(task, NodeOutcome::Failed, Some("planner output had no numbered lines".to_string())))
        }
        Err(e) => return Err(e),
    };
    let mut children = Vec::new();
    let mut all_ok = true;
    for (i, sub) in plan.iter().enumerate() {
        let child = run_node(cx, Some(sub), Some(id.clone()), format!("{id}.{}", i + 1), depth + 1)?;
        let ok = child.success;
        children.push(child);
        if !ok {
            all_ok = false;
            break;
        }
    }
    Ok(DecompositionNode {
        id: id.clone(),
        parent,
        task,
        depth,
        outcome: NodeOutcome::Decomposed,
        success: all_ok,
        children,
        note: None,
    })
}
