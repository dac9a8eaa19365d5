//! Core of a chain-of-states language-model agent.
//!
//! The agent emits a context block `(goal, state, thought, action)` at every
//! step from a single model call. This crate holds the context data model,
//! the prompt codec, the episode loop, two simulated environments, the
//! heuristic gold-state tracker with its metrics, and a recursive
//! decomposition executor. It does no IO; the `stateact` crate adds HTTP,
//! files and the CLI.

#![no_std]

extern crate alloc;

pub mod adapt;
pub mod agent;
pub mod assets;
pub mod backend;
pub mod codec;
pub mod context;
pub mod env;
pub mod eval;
pub mod goal;
pub mod household;
pub mod textcraft;

pub use agent::{decide, run_episode, EpisodeOptions, EpisodeResult, StepRecord, Termination};
pub use backend::{CompletionRequest, ModelBackend, OracleBackend, ScriptedBackend};
pub use codec::{
    parse_completion, render_prompt, serialize_context, truncate_prompt, CodecError, ExampleTrace, FewShotSet,
    Parsed, PromptFile, Recovery, TruncationPolicy,
};
pub use context::{AgentContext, AgentVariant, Dialect, Format, Observation, StateFields, Trace, TraceError};
pub use env::{Environment, SharedEnv};
pub use goal::extract_goal;
