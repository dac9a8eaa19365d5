//! The per-step context vector and the trace it lives in.
//!
//! A context is the tuple (goal, state, thought, action) that the model emits
//! at every step. Which of the first three fields are present is decided by the
//! [`AgentVariant`]; the action is always present.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Surface grammar of a trace: key names, casing, markers and observation prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Household,
    Webshop,
    Textcraft,
}

impl Dialect {
    pub const ALL: [Dialect; 3] = [Dialect::Household, Dialect::Webshop, Dialect::Textcraft];

    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::Household => "household",
            Dialect::Webshop => "webshop",
            Dialect::Textcraft => "textcraft",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "household" | "alfworld" => Some(Dialect::Household),
            "webshop" => Some(Dialect::Webshop),
            "textcraft" => Some(Dialect::Textcraft),
            _ => None,
        }
    }

    pub fn goal_key(self) -> &'static str {
        match self {
            Dialect::Webshop => "Goal",
            _ => "goal",
        }
    }

    pub fn thought_key(self) -> &'static str {
        match self {
            Dialect::Webshop => "Thought",
            _ => "thought",
        }
    }

    pub fn action_key(self) -> &'static str {
        match self {
            Dialect::Webshop => "Action",
            _ => "action",
        }
    }

    /// State keys in canonical order. `track_visited` adds the optional
    /// household "locations visited" key.
    pub fn state_keys(self, track_visited: bool) -> Vec<&'static str> {
        match self {
            Dialect::Household if track_visited => {
                alloc::vec!["current location", "current inventory", "locations visited"]
            }
            Dialect::Household => alloc::vec!["current location", "current inventory"],
            Dialect::Webshop => alloc::vec!["Current Location", "Current Selection"],
            Dialect::Textcraft => alloc::vec!["current inventory"],
        }
    }

    /// Prefix placed before the goal line of a plain-text block, and before
    /// every JSON block.
    pub fn block_marker(self) -> &'static str {
        match self {
            Dialect::Webshop => "",
            _ => ">",
        }
    }

    pub fn observation_prefix(self) -> &'static str {
        match self {
            Dialect::Webshop => "Observation: ",
            _ => "",
        }
    }

    /// Step budget used when a run does not override it.
    pub fn default_max_steps(self) -> usize {
        match self {
            Dialect::Household => 50,
            Dialect::Webshop => 15,
            Dialect::Textcraft => 40,
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a context block is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    PlainText,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::PlainText => "plaintext",
            Format::Json => "json",
        }
    }
}

/// Ordered key/value state predictions. Keys are unique; values hold no newlines.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct StateFields(Vec<(String, String)>);

impl StateFields {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Builds fields from pairs, keeping the first occurrence of a repeated key.
    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        let mut out = Self::new();
        for (k, v) in pairs {
            let k = k.into();
            if out.get(&k).is_none() {
                out.0.push((k, v.into()));
            }
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Sets `key`, appending it if new. Newlines in `value` are replaced by spaces.
    pub fn set(&mut self, key: &str, value: &str) {
        let value = if value.contains('\n') { value.replace('\n', " ") } else { value.to_owned() };
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.to_owned(), value)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy restricted to `keys`, in the order given.
    pub fn project(&self, keys: &[&str]) -> StateFields {
        StateFields(
            keys.iter()
                .filter_map(|k| self.get(k).map(|v| ((*k).to_owned(), v.to_owned())))
                .collect(),
        )
    }
}

impl Serialize for StateFields {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for StateFields {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FieldsVisitor;

        impl<'de> Visitor<'de> for FieldsVisitor {
            type Value = StateFields;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of state keys to values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<StateFields, A::Error> {
                let mut out = StateFields::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    out.set(&k, &v);
                }
                Ok(out)
            }
        }

        deserializer.deserialize_map(FieldsVisitor)
    }
}

/// One context vector `(goal, state, thought, action)`.
///
/// Disabled fields are `None`. An enabled thought that the model left empty is
/// also `None` and renders as the literal `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentContext {
    pub goal: Option<String>,
    pub state: Option<StateFields>,
    pub thought: Option<String>,
    pub action: String,
}

impl AgentContext {
    pub fn action_only(action: impl Into<String>) -> Self {
        Self { action: action.into(), ..Self::default() }
    }

    /// Drops every field the variant disables.
    pub fn project(&self, variant: &AgentVariant) -> AgentContext {
        AgentContext {
            goal: if variant.include_goal { self.goal.clone() } else { None },
            state: if variant.include_state {
                self.state.as_ref().map(|s| s.project(&variant.state_keys()))
            } else {
                None
            },
            thought: if variant.include_thought { self.thought.clone() } else { None },
            action: self.action.clone(),
        }
    }
}

/// Environment output `o_t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub step_index: usize,
    pub text: String,
    /// Whether the environment accepted the action that produced this observation.
    pub accepted: bool,
}

impl Observation {
    pub fn initial(text: impl Into<String>) -> Self {
        Self { step_index: 0, text: text.into(), accepted: true }
    }
}

/// `o_0` followed by alternating (context, observation) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: Observation,
    pub steps: Vec<(AgentContext, Observation)>,
}

impl Trace {
    pub fn new(initial: Observation) -> Self {
        Self { initial, steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn last_index(&self) -> usize {
        self.steps.last().map_or(self.initial.step_index, |(_, o)| o.step_index)
    }

    /// Appends a step. The observation index must exceed the previous one.
    pub fn push(&mut self, context: AgentContext, observation: Observation) -> Result<(), TraceError> {
        let last = self.last_index();
        if observation.step_index <= last {
            return Err(TraceError::NonIncreasingStep { last, got: observation.step_index });
        }
        self.steps.push((context, observation));
        Ok(())
    }

    /// Drops the `n` oldest steps, keeping `o_0`.
    pub fn drop_oldest(&mut self, n: usize) {
        let n = n.min(self.steps.len());
        self.steps.drain(..n);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("observation step index {got} does not follow {last}")]
    NonIncreasingStep { last: usize, got: usize },
}

/// Which context fields the model is asked to produce, in which dialect and format.
///
/// The three flags span the eight rows of the ablation grid; the action is
/// always produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentVariant {
    pub include_goal: bool,
    pub include_state: bool,
    pub include_thought: bool,
    pub dialect: Dialect,
    #[serde(default)]
    pub format: Format,
    /// Adds the household "locations visited" state key. Off by default.
    #[serde(default)]
    pub track_visited: bool,
}

impl AgentVariant {
    pub const fn new(dialect: Dialect, goal: bool, state: bool, thought: bool) -> Self {
        Self {
            include_goal: goal,
            include_state: state,
            include_thought: thought,
            dialect,
            format: Format::PlainText,
            track_visited: false,
        }
    }

    /// Goal + state + thought + action.
    pub const fn stateact(dialect: Dialect) -> Self {
        Self::new(dialect, true, true, true)
    }

    /// Thought + action.
    pub const fn react(dialect: Dialect) -> Self {
        Self::new(dialect, false, false, true)
    }

    pub const fn act_only(dialect: Dialect) -> Self {
        Self::new(dialect, false, false, false)
    }

    pub fn with_format(mut self, format: Format) -> Self {
        self.format = format;
        self
    }

    /// All eight flag combinations, in ablation-table row order.
    pub fn ablation_grid(dialect: Dialect) -> [AgentVariant; 8] {
        [
            Self::new(dialect, false, false, false),
            Self::new(dialect, false, false, true),
            Self::new(dialect, false, true, false),
            Self::new(dialect, false, true, true),
            Self::new(dialect, true, false, false),
            Self::new(dialect, true, false, true),
            Self::new(dialect, true, true, false),
            Self::new(dialect, true, true, true),
        ]
    }

    pub fn state_keys(&self) -> Vec<&'static str> {
        self.dialect.state_keys(self.track_visited)
    }

    /// Row label such as `Goal+State+Thought+Act`.
    pub fn label(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if self.include_goal {
            parts.push("Goal");
        }
        if self.include_state {
            parts.push("State");
        }
        if self.include_thought {
            parts.push("Thought");
        }
        parts.push("Act");
        let mut label = parts.join("+");
        if self.track_visited {
            label.push_str(" (visited)");
        }
        if self.format == Format::Json {
            label.push_str(" (json)");
        }
        label
    }

    /// Lowercase identifier such as `goal-state-thought-act`, suffixed
    /// `-visited` when visited locations are tracked and `-json` for the JSON
    /// format. Safe for file names.
    pub fn slug(&self) -> String {
        let mut slug =
            self.label().replace(" (json)", "").replace(" (visited)", "").replace('+', "-").to_ascii_lowercase();
        if self.track_visited {
            slug.push_str("-visited");
        }
        if self.format == Format::Json {
            slug.push_str("-json");
        }
        slug
    }

    /// Parses a slug or one of the aliases `act`, `react`, `stateact`.
    pub fn from_slug(slug: &str, dialect: Dialect) -> Option<Self> {
        let slug = slug.trim().to_ascii_lowercase();
        let (body, format) = match slug.strip_suffix("-json") {
            Some(b) => (b.to_string(), Format::Json),
            None => (slug, Format::PlainText),
        };
        let (body, track_visited) = match body.strip_suffix("-visited") {
            Some(b) => (b.to_string(), true),
            None => (body, false),
        };
        let mut base = match body.as_str() {
            "act" | "act-only" => Self::act_only(dialect),
            "react" => Self::react(dialect),
            "stateact" => Self::stateact(dialect),
            other => {
                let parts: Vec<&str> = other.split('-').collect();
                if parts.last() != Some(&"act") {
                    return None;
                }
                let mut v = Self::act_only(dialect);
                for p in &parts[..parts.len() - 1] {
                    match *p {
                        "goal" => v.include_goal = true,
                        "state" => v.include_state = true,
                        "thought" => v.include_thought = true,
                        _ => return None,
                    }
                }
                v
            }
        };
        base.track_visited = track_visited;
        Some(base.with_format(format))
    }
}
