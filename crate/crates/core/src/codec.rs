//! Prompt codec: context blocks, few-shot prompt files and completion parsing.
//!
//! A plain-text block is one `key: value` line per enabled field, in the order
//! goal, state keys, thought, action. The goal line carries the dialect's block
//! marker (`>` for household and textcraft). A JSON block is `>` followed by an
//! object with one member per line.
//!
//! Blocks, observations and `o_0` are separated by one blank line; examples by
//! three. Neither values nor observations may contain a blank line.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::context::{AgentContext, AgentVariant, Dialect, Format, Observation, StateFields, Trace};

/// Line that separates the few-shot examples from the current task.
pub const TASK_MARKER: &str = "Here is the task.";

const BLOCK_SEP: &str = "\n\n";
const EXAMPLE_SEP: &str = "\n\n\n\n";
const TASK_SEP: &str = "\n\n\nHere is the task.\n";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("no action line found in completion")]
    ParseFailure,
    #[error("prompt does not fit in {max_chars} characters even without history")]
    TooLongIrreducible { max_chars: usize },
    #[error("prompt file has no example matching the {0} dialect")]
    NoExamples(Dialect),
    #[error("example {example}: {reason}")]
    MalformedExample { example: usize, reason: String },
}

/// A recovery rule that fired while parsing a completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Recovery {
    LeadingBlankSkipped,
    StoppedAtBlankLine,
    StoppedAtObservation,
    ExtraActionIgnored,
    DuplicateKeyIgnored(String),
    UnknownLineIgnored(String),
}

/// A context field that the variant requires but the completion lacked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Field {
    Goal,
    State(String),
    Thought,
}

/// Result of [`parse_completion`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub context: AgentContext,
    /// The goal line as the model wrote it, before any pinning.
    pub model_goal: Option<String>,
    pub recoveries: Vec<Recovery>,
    pub missing: Vec<Field>,
}

fn json_key(key: &str) -> String {
    key.to_ascii_lowercase().replace(' ', "_")
}

fn json_string(value: &str) -> String {
    // Serializing a str cannot fail.
    serde_json::to_string(value).unwrap_or_default()
}

/// Ordered (key, value) lines for the enabled fields of `ctx`.
fn field_lines(ctx: &AgentContext, variant: &AgentVariant) -> Vec<(&'static str, String)> {
    let d = variant.dialect;
    let mut lines = Vec::new();
    if variant.include_goal {
        lines.push((d.goal_key(), ctx.goal.clone().unwrap_or_default()));
    }
    if variant.include_state {
        for key in variant.state_keys() {
            let v = ctx.state.as_ref().and_then(|s| s.get(key)).unwrap_or("None");
            lines.push((key, v.to_string()));
        }
    }
    if variant.include_thought {
        lines.push((d.thought_key(), ctx.thought.clone().unwrap_or_else(|| "None".to_string())));
    }
    lines.push((d.action_key(), ctx.action.clone()));
    lines
}

/// Writes one context block, without trailing newline.
pub fn serialize_context(ctx: &AgentContext, variant: &AgentVariant) -> String {
    let lines = field_lines(ctx, variant);
    match variant.format {
        Format::PlainText => {
            let mut out = String::new();
            for (i, (key, value)) in lines.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                if i == 0 && variant.include_goal {
                    out.push_str(variant.dialect.block_marker());
                }
                out.push_str(key);
                out.push_str(": ");
                out.push_str(value);
            }
            out
        }
        Format::Json => {
            let members: Vec<String> = lines
                .iter()
                .map(|(k, v)| format!("{}: {}", json_string(&json_key(k)), json_string(v)))
                .collect();
            format!(">{{{}\n}}", members.join(",\n"))
        }
    }
}

/// What the prompt ends with to elicit the next block.
pub fn elicitation_cue(variant: &AgentVariant) -> &'static str {
    match variant.format {
        Format::Json => ">",
        Format::PlainText if variant.include_goal => variant.dialect.block_marker(),
        Format::PlainText => "",
    }
}

fn strip_marker(line: &str) -> &str {
    line.trim_start().trim_start_matches('>').trim_start()
}

fn normalize_key(key: &str) -> String {
    key.trim().trim_matches('"').to_ascii_lowercase().replace('_', " ")
}

enum KeyKind {
    Goal,
    State(&'static str),
    Thought,
    Action,
}

fn classify_key(key: &str, dialect: Dialect) -> Option<KeyKind> {
    let key = normalize_key(key);
    if key == dialect.goal_key().to_ascii_lowercase() {
        return Some(KeyKind::Goal);
    }
    if key == dialect.thought_key().to_ascii_lowercase() {
        return Some(KeyKind::Thought);
    }
    if key == dialect.action_key().to_ascii_lowercase() {
        return Some(KeyKind::Action);
    }
    dialect
        .state_keys(true)
        .into_iter()
        .find(|k| k.to_ascii_lowercase() == key)
        .map(KeyKind::State)
}

/// Raw (key, value) lines pulled out of a completion, plus the recoveries used.
struct RawFields {
    pairs: Vec<(String, Option<String>)>,
    recoveries: Vec<Recovery>,
}

fn is_observation_line(line: &str) -> bool {
    line.trim_start().to_ascii_lowercase().starts_with("observation")
}

fn split_plain(line: &str) -> Option<(String, Option<String>)> {
    let (k, v) = line.split_once(':')?;
    let v = v.trim();
    Some((k.to_string(), Some(v.to_string())))
}

/// Splits one JSON member line such as `"goal": "x",` or `"inv": None`.
fn split_json_member(line: &str) -> Option<(String, Option<String>)> {
    let line = line.trim().trim_end_matches(',').trim();
    let rest = line.strip_prefix('"')?;
    let end = rest.find('"')?;
    let key = &rest[..end];
    let value = rest[end + 1..].trim_start().strip_prefix(':')?.trim();
    let value = if value.starts_with('"') {
        Some(serde_json::from_str::<String>(value).ok()?)
    } else if value.eq_ignore_ascii_case("none") || value == "null" {
        None
    } else {
        Some(value.to_string())
    };
    Some((key.to_string(), value))
}

fn gather_fields(text: &str, dialect: Dialect) -> RawFields {
    let mut recoveries = Vec::new();
    let mut pairs = Vec::new();
    let lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    let mut i = 0;
    while i < lines.len() && strip_marker(lines[i]).is_empty() {
        i += 1;
    }
    if i > 0 && i < lines.len() {
        recoveries.push(Recovery::LeadingBlankSkipped);
    }
    let json = lines.get(i).is_some_and(|l| strip_marker(l).starts_with('{'));
    let mut action_seen = false;
    let mut j = i;
    while j < lines.len() {
        let line = strip_marker(lines[j]);
        j += 1;
        if line.is_empty() {
            if lines[j..].iter().any(|l| !l.trim().is_empty()) {
                recoveries.push(Recovery::StoppedAtBlankLine);
            }
            break;
        }
        if is_observation_line(line) {
            recoveries.push(Recovery::StoppedAtObservation);
            break;
        }
        let member = if json {
            let inner = line.trim_start_matches('{').trim_end_matches('}').trim();
            if inner.is_empty() {
                if line.ends_with('}') {
                    break;
                }
                continue;
            }
            split_json_member(inner)
        } else {
            split_plain(line)
        };
        match member {
            Some((k, v)) if classify_key(&k, dialect).is_some() => {
                if matches!(classify_key(&k, dialect), Some(KeyKind::Action)) {
                    action_seen = true;
                }
                pairs.push((k, v));
            }
            _ if action_seen => {
                // Text after the action that is not a known key is a
                // hallucinated environment line.
                recoveries.push(Recovery::StoppedAtObservation);
                break;
            }
            _ => recoveries.push(Recovery::UnknownLineIgnored(line.to_string())),
        }
        if json && line.ends_with('}') {
            break;
        }
    }
    RawFields { pairs, recoveries }
}

/// Parses a model completion into a context honoring the variant's flags.
///
/// Keys match case-insensitively and a leading `>` is tolerated on any line.
/// Parsing stops at the first blank line or at an `Observation` line; only the
/// first action line counts; unknown lines before the action are skipped.
pub fn parse_completion(text: &str, variant: &AgentVariant) -> Result<Parsed, CodecError> {
    let dialect = variant.dialect;
    let RawFields { pairs, mut recoveries } = gather_fields(text, dialect);

    let mut goal: Option<String> = None;
    let mut state = StateFields::new();
    let mut thought: Option<Option<String>> = None;
    let mut action: Option<String> = None;

    for (key, value) in pairs {
        let Some(kind) = classify_key(&key, dialect) else { continue };
        match kind {
            KeyKind::Goal if goal.is_none() => goal = Some(value.unwrap_or_else(|| "None".into())),
            KeyKind::State(k) if state.get(k).is_none() => {
                state.set(k, value.as_deref().unwrap_or("None"));
            }
            KeyKind::Thought if thought.is_none() => {
                thought = Some(value.filter(|v| !v.is_empty() && !v.eq_ignore_ascii_case("none")));
            }
            KeyKind::Action => {
                let value = value.unwrap_or_default();
                if action.is_some() {
                    recoveries.push(Recovery::ExtraActionIgnored);
                } else if !value.is_empty() {
                    action = Some(value);
                }
            }
            _ => recoveries.push(Recovery::DuplicateKeyIgnored(normalize_key(&key))),
        }
    }

    let action = action.ok_or(CodecError::ParseFailure)?;
    let mut missing = Vec::new();
    if variant.include_goal && goal.is_none() {
        missing.push(Field::Goal);
    }
    let state = if variant.include_state {
        let keys = variant.state_keys();
        for k in &keys {
            if state.get(k).is_none() {
                missing.push(Field::State((*k).to_string()));
            }
        }
        Some(state.project(&keys))
    } else {
        None
    };
    if variant.include_thought && thought.is_none() {
        missing.push(Field::Thought);
    }

    let context = AgentContext {
        goal: if variant.include_goal { goal.clone() } else { None },
        state,
        thought: if variant.include_thought { thought.flatten() } else { None },
        action,
    };
    Ok(Parsed { context, model_goal: goal, recoveries, missing })
}

/// One annotated few-shot example: `o_0`, its steps, and usually a final
/// context whose observation is not shown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleTrace {
    pub trace: Trace,
    pub closing: Option<AgentContext>,
}

impl ExampleTrace {
    /// Parses an example written with every field enabled.
    pub fn parse(text: &str, dialect: Dialect) -> Result<(Self, usize), String> {
        let variant = AgentVariant::stateact(dialect);
        let mut blocks = text.split(BLOCK_SEP);
        let initial = blocks.next().ok_or("empty example")?;
        let mut trace = Trace::new(Observation::initial(initial));
        let mut closing = None;
        let mut recoveries = 0;
        let mut step = 0;
        let blocks: Vec<&str> = blocks.collect();
        let mut it = blocks.chunks(2);
        for pair in it.by_ref() {
            let parsed = parse_completion(pair[0], &variant)
                .map_err(|_| format!("block {} has no action: {:?}", step + 1, pair[0]))?;
            recoveries += parsed.recoveries.len();
            match pair.get(1) {
                Some(obs) => {
                    let prefix = dialect.observation_prefix();
                    let body = obs
                        .strip_prefix(prefix)
                        .ok_or_else(|| format!("observation {} lacks {prefix:?}", step + 1))?;
                    step += 1;
                    let observation = Observation { step_index: step, text: body.to_string(), accepted: true };
                    trace.push(parsed.context, observation).map_err(|e| e.to_string())?;
                }
                None => closing = Some(parsed.context),
            }
        }
        Ok((Self { trace, closing }, recoveries))
    }

    /// Renders the example with only the fields the variant enables.
    pub fn render(&self, variant: &AgentVariant) -> String {
        let prefix = variant.dialect.observation_prefix();
        let mut out = self.trace.initial.text.clone();
        for (ctx, obs) in &self.trace.steps {
            out.push_str(BLOCK_SEP);
            out.push_str(&serialize_context(&ctx.project(variant), variant));
            out.push_str(BLOCK_SEP);
            out.push_str(prefix);
            out.push_str(&obs.text);
        }
        if let Some(ctx) = &self.closing {
            out.push_str(BLOCK_SEP);
            out.push_str(&serialize_context(&ctx.project(variant), variant));
        }
        out
    }

    pub fn word_count(&self, variant: &AgentVariant) -> usize {
        word_count(&self.render(variant))
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn example_start(dialect: Dialect) -> &'static str {
    match dialect {
        Dialect::Household => "You are in the middle of a room.",
        Dialect::Webshop => "Webshop",
        Dialect::Textcraft => "Crafting commands:",
    }
}

fn find_line_start(text: &str, needle: &str) -> Option<usize> {
    if text.starts_with(needle) {
        return Some(0);
    }
    text.match_indices(needle).map(|(i, _)| i).find(|&i| text[..i].ends_with('\n'))
}

/// A prompt asset as shipped: preamble, annotated examples, epilogue.
///
/// `to_text` reproduces the parsed bytes exactly when every example block is
/// in canonical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptFile {
    pub dialect: Dialect,
    pub preamble: String,
    pub examples: Vec<ExampleTrace>,
    pub epilogue: String,
    /// Recovery rules that fired while parsing the example blocks.
    pub recoveries: usize,
}

impl PromptFile {
    pub fn parse(text: &str, dialect: Dialect) -> Result<Self, CodecError> {
        let start = find_line_start(text, example_start(dialect)).ok_or(CodecError::NoExamples(dialect))?;
        let end = match text.rfind(TASK_SEP) {
            Some(pos) if pos > start => pos,
            _ => text.trim_end_matches('\n').len(),
        };
        let mut examples = Vec::new();
        let mut recoveries = 0;
        for (i, chunk) in text[start..end].split(EXAMPLE_SEP).enumerate() {
            let (ex, r) = ExampleTrace::parse(chunk, dialect)
                .map_err(|reason| CodecError::MalformedExample { example: i, reason })?;
            recoveries += r;
            examples.push(ex);
        }
        Ok(Self {
            dialect,
            preamble: text[..start].to_string(),
            examples,
            epilogue: text[end..].to_string(),
            recoveries,
        })
    }

    pub fn to_text(&self) -> String {
        let variant = AgentVariant::stateact(self.dialect);
        let mut out = self.preamble.clone();
        let rendered: Vec<String> = self.examples.iter().map(|e| e.render(&variant)).collect();
        out.push_str(&rendered.join(EXAMPLE_SEP));
        out.push_str(&self.epilogue);
        out
    }
}

/// Few-shot examples for one dialect (and household task type).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotSet {
    pub dialect: Dialect,
    pub task_type: Option<String>,
    pub preamble: String,
    pub examples: Vec<ExampleTrace>,
}

impl FewShotSet {
    pub fn from_prompt_file(file: PromptFile, task_type: Option<&str>) -> Self {
        Self {
            dialect: file.dialect,
            task_type: task_type.map(ToString::to_string),
            preamble: file.preamble,
            examples: file.examples,
        }
    }

    pub fn parse(text: &str, dialect: Dialect, task_type: Option<&str>) -> Result<Self, CodecError> {
        Ok(Self::from_prompt_file(PromptFile::parse(text, dialect)?, task_type))
    }
}

/// Preamble, examples, task marker, `o_0`, history and the elicitation cue.
pub fn render_prompt(few_shot: &FewShotSet, trace: &Trace, variant: &AgentVariant) -> String {
    let mut out = few_shot.preamble.clone();
    let rendered: Vec<String> = few_shot.examples.iter().map(|e| e.render(variant)).collect();
    out.push_str(&rendered.join(EXAMPLE_SEP));
    out.push_str(TASK_SEP);
    out.push_str(&trace.initial.text);
    let prefix = variant.dialect.observation_prefix();
    for (ctx, obs) in &trace.steps {
        out.push_str(BLOCK_SEP);
        out.push_str(&serialize_context(&ctx.project(variant), variant));
        out.push_str(BLOCK_SEP);
        out.push_str(prefix);
        out.push_str(&obs.text);
    }
    out.push_str(BLOCK_SEP);
    out.push_str(elicitation_cue(variant));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationPolicy {
    /// Keep the last `max_chars` characters.
    TailSlice,
    /// Drop whole (context, observation) pairs from the oldest end of the
    /// current trace, keeping preamble, examples and `o_0`.
    #[default]
    DropOldestSteps,
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Fits `prompt` into `max_chars` characters.
pub fn truncate_prompt(prompt: &str, max_chars: usize, policy: TruncationPolicy) -> Result<String, CodecError> {
    let len = char_len(prompt);
    if len <= max_chars {
        return Ok(prompt.to_string());
    }
    match policy {
        TruncationPolicy::TailSlice => Ok(prompt.chars().skip(len - max_chars).collect()),
        TruncationPolicy::DropOldestSteps => {
            let irreducible = CodecError::TooLongIrreducible { max_chars };
            let head_end = prompt.rfind(TASK_SEP).ok_or(irreducible.clone())? + TASK_SEP.len();
            let (head, rest) = prompt.split_at(head_end);
            let o0_end = rest.find(BLOCK_SEP).ok_or(irreducible.clone())?;
            let (o0, tail) = rest.split_at(o0_end);
            // tail = "\n\n" B1 "\n\n" O1 ... "\n\n" cue
            let parts: Vec<&str> = tail[BLOCK_SEP.len()..].split(BLOCK_SEP).collect();
            let (cue, history) = parts.split_last().ok_or(irreducible.clone())?;
            let fixed = char_len(head) + char_len(o0) + char_len(BLOCK_SEP) + char_len(cue);
            let mut pairs: Vec<usize> =
                history.chunks(2).map(|c| c.iter().map(|p| char_len(p) + 2 * char_len(BLOCK_SEP)).sum()).collect();
            let mut total = fixed + pairs.iter().sum::<usize>();
            let mut dropped = 0;
            while total > max_chars {
                if dropped == pairs.len() {
                    return Err(irreducible);
                }
                total -= core::mem::take(&mut pairs[dropped]);
                dropped += 1;
            }
            let mut out = String::from(head);
            out.push_str(o0);
            for part in &history[(dropped * 2).min(history.len())..] {
                out.push_str(BLOCK_SEP);
                out.push_str(part);
            }
            out.push_str(BLOCK_SEP);
            out.push_str(cue);
            Ok(out)
        }
    }
}
