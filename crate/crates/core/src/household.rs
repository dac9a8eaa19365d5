//! Deterministic text household: receptacles, objects, six task kinds.
//!
//! Observation strings follow the phrasing of the shipped household prompts
//! ("The fridge 1 is closed.", "You pick up the apple 1 from the diningtable 1.").
//! Any rejected action yields `Nothing happens.` and leaves the world untouched.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{Dialect, Observation, StateFields};
use crate::env::{EnvError, Environment, FocusError, StepOutcome};

pub const NOTHING_HAPPENS: &str = "Nothing happens.";
pub const STARTING_LOCATION: &str = "starting location";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApplianceKind {
    #[default]
    None,
    SinkBasin,
    Microwave,
    StoveBurner,
    Fridge,
    DeskLamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptacleSpec {
    /// `<type> <index>`, e.g. `fridge 1`.
    pub name: String,
    #[serde(default)]
    pub openable: bool,
    #[serde(default)]
    pub appliance: ApplianceKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub receptacle: String,
    #[serde(default)]
    pub clean: bool,
    #[serde(default)]
    pub hot: bool,
    #[serde(default)]
    pub cool: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Clean,
    Heat,
    Cool,
    Examine,
    Put,
    PutTwo,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] =
        [TaskKind::Put, TaskKind::Clean, TaskKind::Heat, TaskKind::Cool, TaskKind::Examine, TaskKind::PutTwo];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Clean => "clean",
            TaskKind::Heat => "heat",
            TaskKind::Cool => "cool",
            TaskKind::Examine => "examine",
            TaskKind::Put => "put",
            TaskKind::PutTwo => "puttwo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s.trim().to_ascii_lowercase())
    }

    fn treatment(self) -> Option<Verb> {
        match self {
            TaskKind::Clean => Some(Verb::Clean),
            TaskKind::Heat => Some(Verb::Heat),
            TaskKind::Cool => Some(Verb::Cool),
            _ => None,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to achieve. `target` is a receptacle type (any instance counts);
/// for `Examine` it is the lamp type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub object_type: String,
    pub target: String,
}

impl TaskSpec {
    /// The task sentence shown after `Your task is to:`.
    pub fn sentence(&self) -> String {
        let (o, t) = (&self.object_type, &self.target);
        match self.kind {
            TaskKind::Put => format!("put a {o} in {t}"),
            TaskKind::Clean => format!("put a clean {o} in {t}"),
            TaskKind::Heat => format!("put a hot {o} in {t}"),
            TaskKind::Cool => format!("put a cool {o} in {t}"),
            TaskKind::Examine => format!("look at {o} under the {t}"),
            TaskKind::PutTwo => format!("put two {o} in {t}"),
        }
    }

    /// Inverse of [`TaskSpec::sentence`], also accepting the alternative
    /// phrasings used in the shipped prompts ("heat some egg and put it in
    /// diningtable", "examine the pen with the desklamp").
    pub fn parse_sentence(text: &str) -> Option<Self> {
        let t = text.trim().trim_end_matches('.').to_ascii_lowercase();
        let words: Vec<&str> = t.split_whitespace().collect();
        let joined = words.join(" ");
        let s = joined.as_str();
        let spec = |kind, o: &str, target: &str| {
            (!o.is_empty() && !target.is_empty() && !o.contains(' ') && !target.contains(' ')).then(|| TaskSpec {
                kind,
                object_type: o.to_string(),
                target: target.to_string(),
            })
        };
        let strip_article = |o: &str| -> String {
            for a in ["a ", "an ", "some ", "the "] {
                if let Some(rest) = o.strip_prefix(a) {
                    return rest.to_string();
                }
            }
            o.to_string()
        };
        let split_target = |rest: &str| -> Option<(String, String)> {
            for prep in [" in/on ", " in ", " on "] {
                if let Some((o, t)) = rest.split_once(prep) {
                    return Some((strip_article(o), strip_article(t)));
                }
            }
            None
        };
        if let Some(rest) = s.strip_prefix("look at ").or_else(|| s.strip_prefix("examine ")) {
            let (o, lamp) = rest.split_once(" under ").or_else(|| rest.split_once(" with "))?;
            return spec(TaskKind::Examine, &strip_article(o), &strip_article(lamp));
        }
        for (verb, kind) in [("heat", TaskKind::Heat), ("cool", TaskKind::Cool), ("clean", TaskKind::Clean)] {
            if let Some(rest) = s.strip_prefix(verb).and_then(|r| r.strip_prefix(' ')) {
                let (o, target) = rest.split_once(" and put it ")?;
                let target = target.trim_start_matches("in/on ").trim_start_matches("in ").trim_start_matches("on ");
                return spec(kind, &strip_article(o), &strip_article(target));
            }
        }
        let rest = s.strip_prefix("put ")?;
        if let Some(rest) = rest.strip_prefix("two ") {
            let (o, t) = split_target(rest)?;
            return spec(TaskKind::PutTwo, &o, &t);
        }
        let (o, t) = split_target(rest)?;
        for (adj, kind) in [("clean ", TaskKind::Clean), ("hot ", TaskKind::Heat), ("cool ", TaskKind::Cool)] {
            if let Some(o) = o.strip_prefix(adj) {
                return spec(kind, o, &t);
            }
        }
        spec(TaskKind::Put, &o, &t)
    }
}

/// A complete household world. Loadable from and dumpable to structured
/// text (the harness uses TOML).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    pub task: TaskSpec,
    pub receptacles: Vec<ReceptacleSpec>,
    pub objects: Vec<ObjectSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error("object {object} is placed in unknown receptacle {receptacle}")]
    UnknownReceptacle { object: String, receptacle: String },
    #[error("name {0:?} is not of the form `<type> <index>` with index >= 1")]
    BadName(String),
    #[error("duplicate entity name {0}")]
    Duplicate(String),
    #[error("no receptacle of type {0} exists")]
    MissingTarget(String),
}

/// Splits `fridge 1` into (`fridge`, 1).
pub fn split_name(name: &str) -> Option<(&str, u32)> {
    let (ty, idx) = name.trim().rsplit_once(' ')?;
    let idx: u32 = idx.parse().ok()?;
    (idx >= 1 && !ty.trim().is_empty()).then_some((ty.trim(), idx))
}

fn type_of(name: &str) -> &str {
    split_name(name).map_or(name, |(t, _)| t)
}

impl WorldSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        let mut seen = BTreeSet::new();
        for n in self.receptacles.iter().map(|r| &r.name).chain(self.objects.iter().map(|o| &o.name)) {
            split_name(n).ok_or_else(|| WorldError::BadName(n.clone()))?;
            if !seen.insert(n.as_str()) {
                return Err(WorldError::Duplicate(n.clone()));
            }
        }
        for o in &self.objects {
            if !self.receptacles.iter().any(|r| r.name == o.receptacle) {
                return Err(WorldError::UnknownReceptacle { object: o.name.clone(), receptacle: o.receptacle.clone() });
            }
        }
        if !self.receptacles.iter().any(|r| type_of(&r.name) == self.task.target) {
            return Err(WorldError::MissingTarget(self.task.target.clone()));
        }
        Ok(())
    }

    /// Receptacle names ordered as the room description lists them:
    /// type ascending, index descending.
    pub fn listing_order(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.receptacles.iter().map(|r| r.name.as_str()).collect();
        names.sort_by(|a, b| {
            let (ta, ia) = split_name(a).unwrap_or((a, 0));
            let (tb, ib) = split_name(b).unwrap_or((b, 0));
            ta.cmp(tb).then(ib.cmp(&ia))
        });
        names
    }

    pub fn initial_text(&self) -> String {
        let items: Vec<String> = self.listing_order().iter().map(|n| format!("a {n}")).collect();
        format!(
            "You are in the middle of a room. Looking quickly around you, you see {}.\nYour task is to: {}.",
            join_list(&items),
            self.task.sentence()
        )
    }
}

/// `a x`, `a x, and a y`, `a x, a y, and a z`.
fn join_list(items: &[String]) -> String {
    match items {
        [] => "nothing".to_string(),
        [one] => one.clone(),
        [init @ .., last] => format!("{}, and {}", init.join(", "), last),
    }
}

const OPENABLE: [&str; 5] = ["cabinet", "drawer", "fridge", "microwave", "safe"];
const PLAIN: [&str; 9] =
    ["countertop", "diningtable", "shelf", "sidetable", "desk", "dresser", "garbagecan", "coffeetable", "armchair"];
const TARGETS: [&str; 7] = ["countertop", "diningtable", "shelf", "sidetable", "cabinet", "drawer", "dresser"];

fn object_pool(kind: TaskKind) -> &'static [&'static str] {
    match kind {
        TaskKind::Heat => &["apple", "egg", "potato", "mug", "bread", "tomato", "cup"],
        TaskKind::Cool => &["apple", "potato", "tomato", "lettuce", "pan", "bread", "winebottle"],
        TaskKind::Clean => &["lettuce", "plate", "mug", "knife", "spatula", "fork", "ladle", "cloth"],
        TaskKind::Examine => &["book", "cd", "pen", "alarmclock", "bowl", "pillow", "keychain"],
        TaskKind::Put | TaskKind::PutTwo => {
            &["spraybottle", "soapbar", "creditcard", "cellphone", "pencil", "candle", "vase", "newspaper"]
        }
    }
}

const DISTRACTORS: [&str; 12] = [
    "fork", "spoon", "peppershaker", "saltshaker", "dishsponge", "papertowelroll", "soapbottle", "statue", "watch",
    "houseplant", "kettle", "remotecontrol",
];

fn appliance_for(kind: TaskKind, rng: &mut ChaCha8Rng) -> Option<(&'static str, ApplianceKind, bool)> {
    match kind {
        TaskKind::Heat => Some(if rng.random_bool(0.5) {
            ("microwave", ApplianceKind::Microwave, true)
        } else {
            ("stoveburner", ApplianceKind::StoveBurner, false)
        }),
        TaskKind::Cool => Some(("fridge", ApplianceKind::Fridge, true)),
        TaskKind::Clean => Some(("sinkbasin", ApplianceKind::SinkBasin, false)),
        TaskKind::Examine => Some(("desklamp", ApplianceKind::DeskLamp, false)),
        TaskKind::Put | TaskKind::PutTwo => None,
    }
}

fn kind_index(kind: TaskKind) -> u64 {
    TaskKind::ALL.iter().position(|k| *k == kind).unwrap_or(0) as u64
}

/// Generates a world deterministically from `(seed, kind)`.
pub fn generate_world(seed: u64, kind: TaskKind) -> WorldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ kind_index(kind));
    let total = rng.random_range(6..=14usize);
    let mut types: Vec<(&str, ApplianceKind, bool)> = Vec::new();
    let appliance = appliance_for(kind, &mut rng);
    if let Some(a) = appliance {
        types.push(a);
    }
    let target = if kind == TaskKind::Examine {
        "desklamp"
    } else {
        let t = *TARGETS.choose(&mut rng).unwrap_or(&"countertop");
        types.push((t, ApplianceKind::None, OPENABLE.contains(&t)));
        t
    };
    if kind == TaskKind::Examine {
        // The lamp usually stands on a desk or side table.
        let t = ["desk", "sidetable"].choose(&mut rng).copied().unwrap_or("desk");
        types.push((t, ApplianceKind::None, false));
    }
    let mut holders: Vec<(&str, bool)> = OPENABLE
        .iter()
        .filter(|t| !matches!(**t, "microwave" | "fridge" | "safe"))
        .map(|t| (*t, true))
        .chain(PLAIN.iter().map(|t| (*t, false)))
        .collect();
    holders.shuffle(&mut rng);
    while types.len() < total {
        let (t, openable) = if rng.random_bool(0.4) { holders[0] } else { *holders.choose(&mut rng).unwrap_or(&holders[0]) };
        types.push((t, ApplianceKind::None, openable));
        holders.rotate_left(1);
    }
    let mut receptacles: Vec<ReceptacleSpec> = Vec::new();
    for (t, appliance, openable) in types {
        let idx = receptacles.iter().filter(|r| type_of(&r.name) == t).count() + 1;
        receptacles.push(ReceptacleSpec { name: format!("{t} {idx}"), openable, appliance });
    }

    let object_type = *object_pool(kind).choose(&mut rng).unwrap_or(&"apple");
    let hosts: Vec<String> = receptacles
        .iter()
        .filter(|r| r.appliance == ApplianceKind::None && type_of(&r.name) != target)
        .map(|r| r.name.clone())
        .collect();
    let count = if kind == TaskKind::PutTwo { 2 } else { rng.random_range(1..=2) };
    let mut objects = Vec::new();
    for i in 1..=count {
        let host = hosts.choose(&mut rng).cloned().unwrap_or_else(|| receptacles[0].name.clone());
        objects.push(ObjectSpec { name: format!("{object_type} {i}"), receptacle: host, clean: false, hot: false, cool: false });
    }
    let n_distractors = rng.random_range(2..=6);
    for _ in 0..n_distractors {
        let ty = *DISTRACTORS.choose(&mut rng).unwrap_or(&"fork");
        if ty == object_type {
            continue;
        }
        let idx = objects.iter().filter(|o: &&ObjectSpec| type_of(&o.name) == ty).count() + 1;
        let host = receptacles
            .iter()
            .filter(|r| r.appliance != ApplianceKind::DeskLamp)
            .collect::<Vec<_>>()
            .choose(&mut rng)
            .map(|r| r.name.clone())
            .unwrap_or_default();
        objects.push(ObjectSpec { name: format!("{ty} {idx}"), receptacle: host, clean: false, hot: false, cool: false });
    }
    WorldSpec {
        id: format!("household-{}-{seed}", kind.as_str()),
        seed,
        task: TaskSpec { kind, object_type: object_type.to_string(), target: target.to_string() },
        receptacles,
        objects,
    }
}

/// The 24 acceptance worlds: seeds 1 to 24, kinds cycling through all six.
pub fn bundled_worlds() -> Vec<WorldSpec> {
    (1..=24u64).map(|seed| generate_world(seed, TaskKind::ALL[((seed - 1) % 6) as usize])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    GoTo,
    Open,
    Close,
    Put,
    Take,
    Cool,
    Heat,
    Clean,
    Use,
}

/// A parsed household command. `operands` has one entry for go to, open,
/// close and use, and two for the rest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HouseholdAction {
    pub verb: Verb,
    pub operands: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized action: {0:?}")]
pub struct UnrecognizedAction(pub String);

impl HouseholdAction {
    /// Canonical text. Put renders as `put X in/on Y`, or `move X to Y`
    /// under `move_to_syntax`.
    pub fn canonical(&self, move_to_syntax: bool) -> String {
        let o = &self.operands;
        match self.verb {
            Verb::GoTo => format!("go to {}", o[0]),
            Verb::Open => format!("open {}", o[0]),
            Verb::Close => format!("close {}", o[0]),
            Verb::Use => format!("use {}", o[0]),
            Verb::Take => format!("take {} from {}", o[0], o[1]),
            Verb::Put if move_to_syntax => format!("move {} to {}", o[0], o[1]),
            Verb::Put => format!("put {} in/on {}", o[0], o[1]),
            Verb::Heat => format!("heat {} with {}", o[0], o[1]),
            Verb::Cool => format!("cool {} with {}", o[0], o[1]),
            Verb::Clean => format!("clean {} with {}", o[0], o[1]),
        }
    }
}

/// Reads `<word>+ <index>` from the front of `tokens`.
fn take_entity<'a>(tokens: &mut &'a [&'a str]) -> Option<String> {
    let pos = tokens.iter().position(|t| t.parse::<u32>().is_ok_and(|i| i >= 1))?;
    if pos == 0 {
        return None;
    }
    let name = tokens[..=pos].join(" ");
    *tokens = &tokens[pos + 1..];
    Some(name)
}

/// Parses an action case-insensitively. `move X to Y` is accepted only with
/// `move_to_syntax`; `put X in Y`, `put X on Y` and `put X in/on Y` are one
/// action.
pub fn normalize_action(text: &str, move_to_syntax: bool) -> Result<HouseholdAction, UnrecognizedAction> {
    let err = || UnrecognizedAction(text.to_string());
    let lower = text.trim().trim_end_matches('.').to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let (verb, mut rest): (Verb, &[&str]) = match words.as_slice() {
        ["go", "to", rest @ ..] => (Verb::GoTo, rest),
        ["open", rest @ ..] => (Verb::Open, rest),
        ["close", rest @ ..] => (Verb::Close, rest),
        ["use", rest @ ..] => (Verb::Use, rest),
        ["take", rest @ ..] => (Verb::Take, rest),
        ["put", rest @ ..] => (Verb::Put, rest),
        ["move", rest @ ..] if move_to_syntax => (Verb::Put, rest),
        ["heat", rest @ ..] => (Verb::Heat, rest),
        ["cool", rest @ ..] => (Verb::Cool, rest),
        ["clean", rest @ ..] => (Verb::Clean, rest),
        _ => return Err(err()),
    };
    let first = take_entity(&mut rest).ok_or_else(err)?;
    let preps: &[&str] = match verb {
        Verb::GoTo | Verb::Open | Verb::Close | Verb::Use => {
            return if rest.is_empty() { Ok(HouseholdAction { verb, operands: vec![first] }) } else { Err(err()) };
        }
        Verb::Take => &["from"],
        Verb::Put if words[0] == "move" => &["to"],
        Verb::Put => &["in", "on", "in/on"],
        Verb::Heat | Verb::Cool | Verb::Clean => &["with"],
    };
    match rest.split_first() {
        Some((p, tail)) if preps.contains(p) => {
            let mut tail = tail;
            let second = take_entity(&mut tail).ok_or_else(err)?;
            if !tail.is_empty() {
                return Err(err());
            }
            Ok(HouseholdAction { verb, operands: vec![first, second] })
        }
        _ => Err(err()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ObjState {
    name: String,
    /// Receptacle name, or `None` while held.
    place: Option<String>,
    clean: bool,
    hot: bool,
    cool: bool,
}

/// A sub-goal the decomposition executor can put the environment on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HouseholdFocus {
    Task(TaskSpec),
    /// Hold an object of this type (one not yet in a target receptacle).
    Take(String),
    /// Hold an object of this type that has the verb's property.
    Treat(Verb, String),
    /// Execute this exact action once.
    Action(HouseholdAction),
}

impl HouseholdFocus {
    pub fn parse(text: &str, move_to_syntax: bool) -> Option<Self> {
        if let Ok(a) = normalize_action(text, move_to_syntax) {
            return Some(HouseholdFocus::Action(a));
        }
        let t = text.trim().trim_end_matches('.').to_ascii_lowercase();
        let object = |rest: &str| -> Option<String> {
            let rest = rest.trim();
            let rest = ["a ", "an ", "some ", "the ", "another "].iter().fold(rest, |r, a| r.strip_prefix(a).unwrap_or(r));
            let ty = rest.split(" with ").next()?.trim();
            (!ty.is_empty() && !ty.contains(' ')).then(|| ty.to_string())
        };
        if let Some(rest) = t.strip_prefix("find and take ").or_else(|| t.strip_prefix("take ")) {
            return object(rest).map(HouseholdFocus::Take);
        }
        for (verb, v) in [("heat ", Verb::Heat), ("cool ", Verb::Cool), ("clean ", Verb::Clean)] {
            if let Some(rest) = t.strip_prefix(verb) {
                if !rest.contains(" and put it ") {
                    return object(rest).map(|o| HouseholdFocus::Treat(v, o));
                }
            }
        }
        TaskSpec::parse_sentence(&t).map(HouseholdFocus::Task)
    }

    fn sentence(&self, move_to_syntax: bool) -> String {
        match self {
            HouseholdFocus::Task(t) => t.sentence(),
            HouseholdFocus::Take(o) => format!("find and take a {o}"),
            HouseholdFocus::Treat(v, o) => {
                let verb = match v {
                    Verb::Heat => "heat",
                    Verb::Cool => "cool",
                    _ => "clean",
                };
                format!("{verb} the {o}")
            }
            HouseholdFocus::Action(a) => a.canonical(move_to_syntax),
        }
    }
}

/// A live household episode.
#[derive(Debug, Clone)]
pub struct HouseholdEnv {
    spec: WorldSpec,
    move_to_syntax: bool,
    location: Option<String>,
    opened: BTreeSet<String>,
    objects: Vec<ObjState>,
    visited: Vec<String>,
    lamp_used_on_task: bool,
    focus: Option<HouseholdFocus>,
    focus_action_done: bool,
    steps: usize,
    done: bool,
}

impl HouseholdEnv {
    pub fn new(spec: WorldSpec) -> Result<Self, WorldError> {
        spec.validate()?;
        let objects = spec
            .objects
            .iter()
            .map(|o| ObjState { name: o.name.clone(), place: Some(o.receptacle.clone()), clean: o.clean, hot: o.hot, cool: o.cool })
            .collect();
        Ok(Self {
            spec,
            move_to_syntax: false,
            location: None,
            opened: BTreeSet::new(),
            objects,
            visited: Vec::new(),
            lamp_used_on_task: false,
            focus: None,
            focus_action_done: false,
            steps: 0,
            done: false,
        })
    }

    /// Shortcut for `HouseholdEnv::new(generate_world(seed, kind))`.
    pub fn generated(seed: u64, kind: TaskKind) -> Self {
        // Generated worlds always validate.
        Self::new(generate_world(seed, kind)).expect("generated world is valid")
    }

    pub fn with_move_to_syntax(mut self, on: bool) -> Self {
        self.move_to_syntax = on;
        self
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn location(&self) -> Option<&str> {
        self.location.as_deref()
    }

    pub fn held(&self) -> Option<&str> {
        self.objects.iter().find(|o| o.place.is_none()).map(|o| o.name.as_str())
    }

    /// Where each object currently is; `None` means held.
    pub fn placements(&self) -> Vec<(&str, Option<&str>)> {
        self.objects.iter().map(|o| (o.name.as_str(), o.place.as_deref())).collect()
    }

    fn receptacle(&self, name: &str) -> Option<&ReceptacleSpec> {
        self.spec.receptacles.iter().find(|r| r.name == name)
    }

    fn is_accessible(&self, r: &ReceptacleSpec) -> bool {
        !r.openable || self.opened.contains(&r.name)
    }

    fn contents(&self, receptacle: &str) -> String {
        let mut names: Vec<&str> =
            self.objects.iter().filter(|o| o.place.as_deref() == Some(receptacle)).map(|o| o.name.as_str()).collect();
        names.sort_by(|a, b| {
            let (ta, ia) = split_name(a).unwrap_or((a, 0));
            let (tb, ib) = split_name(b).unwrap_or((b, 0));
            ta.cmp(tb).then(ib.cmp(&ia))
        });
        let items: Vec<String> = names.iter().map(|n| format!("a {n}")).collect();
        join_list(&items)
    }

    fn describe(&self, r: &ReceptacleSpec) -> String {
        if r.openable && !self.opened.contains(&r.name) {
            format!("The {} is closed.", r.name)
        } else if r.openable {
            format!("The {} is open. In it, you see {}.", r.name, self.contents(&r.name))
        } else {
            format!("On the {}, you see {}.", r.name, self.contents(&r.name))
        }
    }

    fn at(&self, name: &str) -> bool {
        self.location.as_deref() == Some(name)
    }

    fn object_mut(&mut self, name: &str) -> Option<&mut ObjState> {
        self.objects.iter_mut().find(|o| o.name == name)
    }

    /// Applies an action; `None` means rejected with no state change.
    fn apply(&mut self, a: &HouseholdAction) -> Option<String> {
        let o = &a.operands;
        match a.verb {
            Verb::GoTo => {
                let r = self.receptacle(&o[0])?.clone();
                self.location = Some(r.name.clone());
                if !self.visited.contains(&r.name) {
                    self.visited.push(r.name.clone());
                }
                Some(self.describe(&r))
            }
            Verb::Open => {
                let r = self.receptacle(&o[0])?.clone();
                if !self.at(&r.name) || !r.openable || self.opened.contains(&r.name) {
                    return None;
                }
                self.opened.insert(r.name.clone());
                Some(format!("You open the {0}. The {0} is open. In it, you see {1}.", r.name, self.contents(&r.name)))
            }
            Verb::Close => {
                let r = self.receptacle(&o[0])?.clone();
                if !self.at(&r.name) || !self.opened.contains(&r.name) {
                    return None;
                }
                self.opened.remove(&r.name);
                Some(format!("You close the {}.", r.name))
            }
            Verb::Take => {
                let r = self.receptacle(&o[1])?.clone();
                if !self.at(&r.name) || !self.is_accessible(&r) || self.held().is_some() {
                    return None;
                }
                let obj = self.object_mut(&o[0])?;
                if obj.place.as_deref() != Some(r.name.as_str()) {
                    return None;
                }
                obj.place = None;
                Some(format!("You pick up the {} from the {}.", o[0], r.name))
            }
            Verb::Put => {
                let r = self.receptacle(&o[1])?.clone();
                if !self.at(&r.name) || !self.is_accessible(&r) || self.held() != Some(o[0].as_str()) {
                    return None;
                }
                let move_to = self.move_to_syntax;
                self.object_mut(&o[0])?.place = Some(r.name.clone());
                Some(if move_to {
                    format!("You move the {} to the {}.", o[0], r.name)
                } else {
                    format!("You put the {} in/on the {}.", o[0], r.name)
                })
            }
            Verb::Heat | Verb::Cool | Verb::Clean => {
                let r = self.receptacle(&o[1])?.clone();
                let ok_kind = match a.verb {
                    Verb::Heat => matches!(r.appliance, ApplianceKind::Microwave | ApplianceKind::StoveBurner),
                    Verb::Cool => r.appliance == ApplianceKind::Fridge,
                    _ => r.appliance == ApplianceKind::SinkBasin,
                };
                if !ok_kind || !self.at(&r.name) || self.held() != Some(o[0].as_str()) {
                    return None;
                }
                let verb = a.verb;
                let obj = self.object_mut(&o[0])?;
                let word = match verb {
                    Verb::Heat => {
                        obj.hot = true;
                        obj.cool = false;
                        "heat"
                    }
                    Verb::Cool => {
                        obj.cool = true;
                        obj.hot = false;
                        "cool"
                    }
                    _ => {
                        obj.clean = true;
                        "clean"
                    }
                };
                Some(format!("You {word} the {} using the {}.", o[0], r.name))
            }
            Verb::Use => {
                let r = self.receptacle(&o[0])?.clone();
                if r.appliance != ApplianceKind::DeskLamp || !self.at(&r.name) {
                    return None;
                }
                let ty = &self.spec.task.object_type;
                let near = self.objects.iter().any(|ob| {
                    type_of(&ob.name) == ty && (ob.place.is_none() || ob.place.as_deref() == Some(r.name.as_str()))
                });
                if near && self.spec.task.kind == TaskKind::Examine {
                    self.lamp_used_on_task = true;
                }
                Some(format!("You turn on the {}.", r.name))
            }
        }
    }

    fn in_target(&self, o: &ObjState, target: &str) -> bool {
        o.place.as_deref().is_some_and(|p| type_of(p) == target)
    }

    fn task_satisfied(&self, task: &TaskSpec) -> bool {
        let of_type = || self.objects.iter().filter(|o| type_of(&o.name) == task.object_type);
        match task.kind {
            TaskKind::Put => of_type().any(|o| self.in_target(o, &task.target)),
            TaskKind::Clean => of_type().any(|o| o.clean && self.in_target(o, &task.target)),
            TaskKind::Heat => of_type().any(|o| o.hot && self.in_target(o, &task.target)),
            TaskKind::Cool => of_type().any(|o| o.cool && self.in_target(o, &task.target)),
            TaskKind::PutTwo => of_type().filter(|o| self.in_target(o, &task.target)).count() >= 2,
            TaskKind::Examine => {
                if *task == self.spec.task {
                    self.lamp_used_on_task
                } else {
                    false
                }
            }
        }
    }

    fn held_obj(&self) -> Option<&ObjState> {
        self.objects.iter().find(|o| o.place.is_none())
    }

    fn focus_satisfied(&self) -> bool {
        match &self.focus {
            None => self.task_satisfied(&self.spec.task),
            Some(HouseholdFocus::Task(t)) => self.task_satisfied(t),
            Some(HouseholdFocus::Take(ty)) => self.held_obj().is_some_and(|o| type_of(&o.name) == ty),
            Some(HouseholdFocus::Treat(v, ty)) => self.held_obj().is_some_and(|o| {
                type_of(&o.name) == ty
                    && match v {
                        Verb::Heat => o.hot,
                        Verb::Cool => o.cool,
                        _ => o.clean,
                    }
            }),
            Some(HouseholdFocus::Action(_)) => self.focus_action_done,
        }
    }

    fn focused_task(&self) -> TaskSpec {
        match &self.focus {
            Some(HouseholdFocus::Task(t)) => t.clone(),
            _ => self.spec.task.clone(),
        }
    }

    fn first_of_type(&self, ty: &str) -> Option<&ReceptacleSpec> {
        let mut rs: Vec<&ReceptacleSpec> = self.spec.receptacles.iter().filter(|r| type_of(&r.name) == ty).collect();
        rs.sort_by_key(|r| split_name(&r.name).map_or(0, |(_, i)| i));
        rs.into_iter().next()
    }

    fn appliance_for(&self, v: Verb) -> Option<&ReceptacleSpec> {
        let mut rs: Vec<&ReceptacleSpec> = self
            .spec
            .receptacles
            .iter()
            .filter(|r| match v {
                Verb::Heat => matches!(r.appliance, ApplianceKind::Microwave | ApplianceKind::StoveBurner),
                Verb::Cool => r.appliance == ApplianceKind::Fridge,
                Verb::Clean => r.appliance == ApplianceKind::SinkBasin,
                _ => r.appliance == ApplianceKind::DeskLamp,
            })
            .collect();
        rs.sort_by(|a, b| a.name.cmp(&b.name));
        rs.into_iter().next()
    }

    /// Steps to reach `r` and make it accessible.
    fn approach(&self, r: &ReceptacleSpec, plan: &mut Vec<String>, loc: &mut Option<String>, opened: &mut BTreeSet<String>) {
        if loc.as_deref() != Some(r.name.as_str()) {
            plan.push(format!("go to {}", r.name));
            *loc = Some(r.name.clone());
        }
        if r.openable && !opened.contains(&r.name) {
            plan.push(format!("open {}", r.name));
            opened.insert(r.name.clone());
        }
    }

    /// Shortest scripted plan for the current focus, from the current state.
    pub fn oracle_plan(&self) -> Vec<String> {
        if self.done || self.focus_satisfied() {
            return Vec::new();
        }
        let mut plan = Vec::new();
        let mut loc = self.location.clone();
        let mut opened = self.opened.clone();
        let put = |o: &str, r: &str| {
            HouseholdAction { verb: Verb::Put, operands: vec![o.to_string(), r.to_string()] }.canonical(self.move_to_syntax)
        };
        let (goal_type, treat, target, placements): (String, Option<Verb>, Option<String>, usize) = match &self.focus {
            Some(HouseholdFocus::Action(a)) => return vec![a.canonical(self.move_to_syntax)],
            Some(HouseholdFocus::Take(ty)) => (ty.clone(), None, None, 1),
            Some(HouseholdFocus::Treat(v, ty)) => (ty.clone(), Some(*v), None, 1),
            _ => {
                let t = self.focused_task();
                let placed = self.objects.iter().filter(|o| type_of(&o.name) == t.object_type && self.in_target(o, &t.target)).count();
                let needed = match t.kind {
                    TaskKind::PutTwo => 2usize.saturating_sub(placed),
                    TaskKind::Examine => 1,
                    _ => 1,
                };
                let target = (t.kind != TaskKind::Examine).then(|| t.target.clone());
                (t.object_type.clone(), t.kind.treatment(), target, needed)
            }
        };
        let examine = matches!(&self.focus, None | Some(HouseholdFocus::Task(_))) && self.focused_task().kind == TaskKind::Examine;
        let mut held = self.held_obj().cloned();
        let mut used: Vec<String> = Vec::new();
        for _ in 0..placements {
            let suitable = |o: &ObjState| {
                type_of(&o.name) == goal_type && target.as_ref().is_none_or(|t| !self.in_target(o, t))
            };
            let obj = match held.take() {
                Some(h) if suitable(&h) => h,
                Some(h) => {
                    // Drop an unrelated object where we stand.
                    if let Some(l) = &loc {
                        plan.push(put(&h.name, l));
                    }
                    match self.pick(&goal_type, &target, &used, &mut plan, &mut loc, &mut opened) {
                        Some(o) => o,
                        None => return plan,
                    }
                }
                None => match self.pick(&goal_type, &target, &used, &mut plan, &mut loc, &mut opened) {
                    Some(o) => o,
                    None => return plan,
                },
            };
            used.push(obj.name.clone());
            if let Some(v) = treat {
                let done = match v {
                    Verb::Heat => obj.hot,
                    Verb::Cool => obj.cool,
                    _ => obj.clean,
                };
                if !done {
                    if let Some(app) = self.appliance_for(v) {
                        if loc.as_deref() != Some(app.name.as_str()) {
                            plan.push(format!("go to {}", app.name));
                            loc = Some(app.name.clone());
                        }
                        plan.push(HouseholdAction { verb: v, operands: vec![obj.name.clone(), app.name.clone()] }.canonical(false));
                    }
                }
            }
            if examine {
                if let Some(lamp) = self.appliance_for(Verb::Use) {
                    if loc.as_deref() != Some(lamp.name.as_str()) {
                        plan.push(format!("go to {}", lamp.name));
                    }
                    plan.push(format!("use {}", lamp.name));
                }
                return plan;
            }
            if let Some(t) = &target {
                if let Some(r) = self.first_of_type(t) {
                    let r = r.clone();
                    self.approach(&r, &mut plan, &mut loc, &mut opened);
                    plan.push(put(&obj.name, &r.name));
                }
            }
        }
        plan
    }

    /// Goes to and takes the first suitable object; returns it.
    fn pick(
        &self,
        ty: &str,
        target: &Option<String>,
        used: &[String],
        plan: &mut Vec<String>,
        loc: &mut Option<String>,
        opened: &mut BTreeSet<String>,
    ) -> Option<ObjState> {
        let obj = self.objects.iter().find(|o| {
            type_of(&o.name) == ty
                && o.place.is_some()
                && !used.contains(&o.name)
                && target.as_ref().is_none_or(|t| !self.in_target(o, t))
        })?;
        let r = self.receptacle(obj.place.as_deref()?)?.clone();
        self.approach(&r, plan, loc, opened);
        plan.push(format!("take {} from {}", obj.name, r.name));
        Some(obj.clone())
    }

    /// Planner decomposition of the current focus into subtasks.
    pub fn oracle_decomposition(&self) -> Vec<String> {
        match &self.focus {
            Some(HouseholdFocus::Action(_)) | Some(HouseholdFocus::Take(_)) | Some(HouseholdFocus::Treat(..)) => {
                self.oracle_plan()
            }
            _ => {
                let t = self.focused_task();
                let o = &t.object_type;
                let mut out = vec![format!("find and take a {o}")];
                match t.kind {
                    TaskKind::Heat => out.push(format!("heat the {o}")),
                    TaskKind::Cool => out.push(format!("cool the {o}")),
                    TaskKind::Clean => out.push(format!("clean the {o}")),
                    TaskKind::PutTwo => {
                        out.push(format!("put a {o} in {}", t.target));
                        out.push(format!("find and take a {o}"));
                    }
                    _ => {}
                }
                out.push(t.sentence());
                out
            }
        }
    }
}

impl Environment for HouseholdEnv {
    fn dialect(&self) -> Dialect {
        Dialect::Household
    }

    fn id(&self) -> String {
        self.spec.id.clone()
    }

    fn seed(&self) -> u64 {
        self.spec.seed
    }

    fn initial_observation(&self) -> Observation {
        let mut text = self.spec.initial_text();
        if let Some(f) = &self.focus {
            let head = text.rsplit_once("\nYour task is to:").map_or(text.as_str(), |(h, _)| h).to_string();
            text = format!("{head}\nYour task is to: {}.", f.sentence(self.move_to_syntax));
        }
        Observation::initial(text)
    }

    fn step(&mut self, action: &str) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        self.steps += 1;
        let parsed = normalize_action(action, self.move_to_syntax);
        let text = parsed.as_ref().ok().and_then(|a| {
            let before = self.objects.clone();
            let out = self.apply(a);
            debug_assert!(out.is_some() || before == self.objects);
            out
        });
        let accepted = text.is_some();
        if accepted {
            if let (Some(HouseholdFocus::Action(want)), Ok(got)) = (&self.focus, &parsed) {
                if want == got {
                    self.focus_action_done = true;
                }
            }
        }
        let success = self.focus_satisfied();
        self.done = success;
        Ok(StepOutcome {
            observation: Observation {
                step_index: self.steps,
                text: text.unwrap_or_else(|| NOTHING_HAPPENS.to_string()),
                accepted,
            },
            done: success,
            success,
        })
    }

    fn normalize(&self, action: &str) -> String {
        normalize_action(action, self.move_to_syntax)
            .map(|a| a.canonical(self.move_to_syntax))
            .unwrap_or_else(|_| action.trim().to_string())
    }

    fn ground_truth(&self) -> StateFields {
        let visited = if self.visited.is_empty() { "None".to_string() } else { self.visited.join(", ") };
        StateFields::from_pairs([
            ("current location", self.location.clone().unwrap_or_else(|| STARTING_LOCATION.to_string())),
            ("current inventory", self.held().map_or_else(|| "None".to_string(), ToString::to_string)),
            ("locations visited", visited),
        ])
    }

    fn oracle_action(&self) -> Option<String> {
        self.oracle_plan().into_iter().next()
    }

    fn oracle_decomposition(&self) -> Vec<String> {
        HouseholdEnv::oracle_decomposition(self)
    }

    fn set_focus(&mut self, subtask: Option<&str>) -> Result<(), FocusError> {
        self.focus = match subtask {
            None => None,
            Some(s) => Some(HouseholdFocus::parse(s, self.move_to_syntax).ok_or_else(|| FocusError(s.to_string()))?),
        };
        self.focus_action_done = false;
        self.done = self.focus_satisfied();
        Ok(())
    }

    fn solved(&self) -> bool {
        self.focus_satisfied()
    }

    fn task_solved(&self) -> bool {
        self.task_satisfied(&self.spec.task)
    }
}
