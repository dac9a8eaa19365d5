//! The episode loop: render, one model call, parse, pin the goal, step.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ModelBackend, RequestKind, RequestTemplate};
use crate::codec::{parse_completion, render_prompt, truncate_prompt, CodecError, FewShotSet, Parsed, TruncationPolicy};
use crate::context::{AgentContext, AgentVariant, Observation, StateFields, Trace};
use crate::env::Environment;
use crate::eval::{gold_update, GoldState};
use crate::goal::extract_goal;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("completion has no action line")]
    ParseFailure { raw: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Knobs of one episode besides the variant and the budget.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeOptions {
    /// Key used for replay lookups; steps are numbered from 0.
    pub episode_id: String,
    pub request: RequestTemplate,
    /// Prompt length cap in characters; `None` sends the full prompt.
    pub max_chars: Option<usize>,
    pub truncation: TruncationPolicy,
}

/// A parsed model decision and the raw text behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub raw_completion: String,
    pub parsed: Parsed,
    pub prompt_chars: usize,
}

impl Decision {
    pub fn context(&self) -> &AgentContext {
        &self.parsed.context
    }
}

/// Builds the prompt for the next step.
pub fn build_prompt(
    trace: &Trace,
    variant: &AgentVariant,
    few_shot: &FewShotSet,
    opts: &EpisodeOptions,
) -> Result<String, CodecError> {
    let prompt = render_prompt(few_shot, trace, variant);
    match opts.max_chars {
        Some(max) => truncate_prompt(&prompt, max, opts.truncation),
        None => Ok(prompt),
    }
}

/// One policy step: render the prompt, call the backend exactly once and
/// parse the completion under the variant's flags.
pub fn decide(
    trace: &Trace,
    variant: &AgentVariant,
    backend: &dyn ModelBackend,
    few_shot: &FewShotSet,
    opts: &EpisodeOptions,
) -> Result<Decision, AgentError> {
    let prompt = build_prompt(trace, variant, few_shot, opts).map_err(|e| BackendError::Prompt(e.to_string()))?;
    let prompt_chars = prompt.chars().count();
    let request = opts.request.build(prompt).with_kind(RequestKind::Act).with_key(opts.episode_id.clone(), trace.len());
    let raw = backend.complete(&request)?;
    let parsed = parse_completion(&raw, variant).map_err(|_| AgentError::ParseFailure { raw: raw.clone() })?;
    Ok(Decision { raw_completion: raw, parsed, prompt_chars })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Solved,
    StepLimit,
    ParseFailure,
    BackendError,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Solved => "solved",
            Termination::StepLimit => "step_limit",
            Termination::ParseFailure => "parse_failure",
            Termination::BackendError => "backend_error",
        }
    }
}

/// Everything observed at one step. A step whose completion could not be
/// parsed or fetched is still recorded, with `error` set and no observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub raw_completion: String,
    pub goal: Option<String>,
    pub state: Option<StateFields>,
    pub thought: Option<String>,
    pub action: String,
    pub normalized_action: String,
    pub observation: String,
    pub accepted: bool,
    /// Heuristic state before this step's action, when the context was emitted.
    pub gold_state: StateFields,
    pub goal_drift: bool,
    #[serde(default)]
    pub recoveries: usize,
    #[serde(default)]
    pub prompt_chars: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StepRecord {
    pub fn context(&self) -> AgentContext {
        AgentContext {
            goal: self.goal.clone(),
            state: self.state.clone(),
            thought: self.thought.clone(),
            action: self.action.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub env_id: String,
    pub success: bool,
    pub steps_taken: usize,
    pub max_steps: usize,
    pub termination: Termination,
    pub records: Vec<StepRecord>,
    /// The pinned goal, when it could be extracted.
    pub goal: Option<String>,
    /// Heuristic state after the last step.
    pub final_gold_state: StateFields,
}

impl EpisodeResult {
    /// Rebuilds the trace of accepted-or-rejected steps, in order.
    pub fn trace(&self, initial: Observation) -> Trace {
        let mut t = Trace::new(initial);
        for (i, r) in self.records.iter().enumerate() {
            if r.error.is_none() {
                let obs = Observation { step_index: i + 1, text: r.observation.clone(), accepted: r.accepted };
                // Indices are strictly increasing by construction.
                let _ = t.push(r.context(), obs);
            }
        }
        t
    }
}

/// Runs one episode until success, the step budget, or an error.
///
/// The goal field is pinned to the one extracted from `o_0`; a different
/// goal from the model only sets `goal_drift` on that step.
pub fn run_episode<E: Environment + ?Sized>(
    env: &mut E,
    variant: &AgentVariant,
    backend: &dyn ModelBackend,
    few_shot: &FewShotSet,
    max_steps: usize,
    opts: &EpisodeOptions,
) -> EpisodeResult {
    let initial = env.initial_observation();
    let pinned = extract_goal(&initial).ok();
    let mut trace = Trace::new(initial);
    let mut gold = GoldState::initial(env.dialect());
    let mut records: Vec<StepRecord> = Vec::new();
    let mut termination = Termination::StepLimit;
    let mut success = false;

    for step in 0..max_steps.max(1) {
        let gold_fields = gold.fields();
        let blank = |raw: String, error: String| StepRecord {
            step,
            raw_completion: raw,
            goal: None,
            state: None,
            thought: None,
            action: String::new(),
            normalized_action: String::new(),
            observation: String::new(),
            accepted: false,
            gold_state: gold_fields.clone(),
            goal_drift: false,
            recoveries: 0,
            prompt_chars: 0,
            error: Some(error),
        };
        let decision = match decide(&trace, variant, backend, few_shot, opts) {
            Ok(d) => d,
            Err(AgentError::ParseFailure { raw }) => {
                records.push(blank(raw, "parse failure: no action line".to_string()));
                termination = Termination::ParseFailure;
                break;
            }
            Err(AgentError::Backend(e)) => {
                records.push(blank(String::new(), e.to_string()));
                termination = Termination::BackendError;
                break;
            }
        };
        let mut ctx = decision.parsed.context.clone();
        let mut goal_drift = false;
        if variant.include_goal {
            let emitted = decision.parsed.model_goal.as_deref().map(str::trim);
            goal_drift = emitted != pinned.as_deref();
            ctx.goal = pinned.clone();
        }
        let normalized = env.normalize(&ctx.action);
        let outcome = match env.step(&ctx.action) {
            Ok(o) => o,
            Err(e) => {
                let mut r = blank(decision.raw_completion, e.to_string());
                r.action = ctx.action;
                records.push(r);
                termination = Termination::StepLimit;
                break;
            }
        };
        let obs = Observation { step_index: step + 1, ..outcome.observation.clone() };
        records.push(StepRecord {
            step,
            raw_completion: decision.raw_completion,
            goal: ctx.goal.clone(),
            state: ctx.state.clone(),
            thought: ctx.thought.clone(),
            action: ctx.action.clone(),
            normalized_action: normalized.clone(),
            observation: obs.text.clone(),
            accepted: obs.accepted,
            gold_state: gold_fields,
            goal_drift,
            recoveries: decision.parsed.recoveries.len(),
            prompt_chars: decision.prompt_chars,
            error: None,
        });
        gold = gold_update(&gold, &normalized, &obs);
        // Indices come from the loop counter and always increase.
        let _ = trace.push(ctx, obs);
        if outcome.success {
            success = true;
            termination = Termination::Solved;
            break;
        }
        if outcome.done {
            break;
        }
    }

    EpisodeResult {
        env_id: env.id(),
        success,
        steps_taken: records.len(),
        max_steps,
        termination,
        records,
        goal: pinned,
        final_gold_state: gold.fields(),
    }
}

/// Human-readable one-liner for logs.
pub fn summarize(result: &EpisodeResult) -> String {
    format!(
        "{} {} in {}/{} steps",
        result.env_id,
        result.termination.as_str(),
        result.steps_taken,
        result.max_steps
    )
}
