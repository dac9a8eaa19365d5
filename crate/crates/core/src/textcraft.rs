//! Crafting game over a recipe DAG with `inventory`, `get` and `craft`.
//!
//! Grammar, shared by recipe files and agent commands:
//!
//! ```text
//! craft <count> <item> using <count> <item>[, <count> <item>...]
//! get <count> <item>
//! inventory
//! base <item>            (recipe files only)
//! ```
//!
//! Item names may contain spaces. Lines starting with `#` and blank lines are
//! ignored in recipe files.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{Dialect, Observation, StateFields};
use crate::env::{EnvError, Environment, FocusError, StepOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Recipe {
    pub output: (String, u32),
    pub inputs: Vec<(String, u32)>,
}

impl Recipe {
    pub fn to_line(&self) -> String {
        let inputs: Vec<String> = self.inputs.iter().map(|(i, n)| format!("{n} {i}")).collect();
        format!("craft {} {} using {}", self.output.1, self.output.0, inputs.join(", "))
    }
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Inventory,
    Get { item: String, count: u32 },
    Craft(Recipe),
    /// Recipe-file only.
    Base(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("cannot parse command {0:?}")]
    Malformed(String),
}

fn count_item(s: &str) -> Option<(String, u32)> {
    let (n, item) = s.trim().split_once(' ')?;
    let n: u32 = n.parse().ok()?;
    let item = item.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase();
    (n > 0 && !item.is_empty()).then_some((item, n))
}

impl Command {
    pub fn parse(line: &str) -> Result<Self, CommandError> {
        let err = || CommandError::Malformed(line.to_string());
        let t = line.trim().trim_end_matches('.');
        let lower = t.to_ascii_lowercase();
        if lower == "inventory" {
            return Ok(Command::Inventory);
        }
        if let Some(rest) = lower.strip_prefix("base ") {
            let item = rest.split_whitespace().collect::<Vec<_>>().join(" ");
            return if item.is_empty() { Err(err()) } else { Ok(Command::Base(item)) };
        }
        if let Some(rest) = lower.strip_prefix("get ") {
            let (item, count) = count_item(rest).ok_or_else(err)?;
            return Ok(Command::Get { item, count });
        }
        if let Some(rest) = lower.strip_prefix("craft ") {
            let (out, ins) = rest.split_once(" using ").ok_or_else(err)?;
            let output = count_item(out).ok_or_else(err)?;
            let inputs = ins.split(',').map(count_item).collect::<Option<Vec<_>>>().ok_or_else(err)?;
            return Ok(Command::Craft(Recipe { output, inputs }));
        }
        Err(err())
    }

    pub fn to_line(&self) -> String {
        match self {
            Command::Inventory => "inventory".to_string(),
            Command::Get { item, count } => format!("get {count} {item}"),
            Command::Craft(r) => r.to_line(),
            Command::Base(i) => format!("base {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BookError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: CommandError },
    #[error("line {0}: only `craft` and `base` lines are allowed in a recipe file")]
    NotARecipe(usize),
    #[error("recipe for {0} has no inputs")]
    NoInputs(String),
    #[error("recipe for {0} uses its own output")]
    SelfInput(String),
    #[error("input {input} of {output} is neither a base item nor craftable")]
    UnknownInput { output: String, input: String },
    #[error("base item {0} also has a recipe")]
    BaseWithRecipe(String),
    #[error("recipe graph has a cycle through {0}")]
    Cycle(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DepthError {
    #[error("unknown item {0}")]
    UnknownItem(String),
}

/// Recipes plus the items obtainable with `get`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecipeBook {
    pub recipes: Vec<Recipe>,
    pub base_items: BTreeSet<String>,
}

impl RecipeBook {
    pub fn parse(text: &str) -> Result<Self, BookError> {
        let mut book = RecipeBook::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match Command::parse(line).map_err(|source| BookError::Parse { line: i + 1, source })? {
                Command::Base(item) => {
                    book.base_items.insert(item);
                }
                Command::Craft(r) => book.recipes.push(r),
                _ => return Err(BookError::NotARecipe(i + 1)),
            }
        }
        book.validate()?;
        Ok(book)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for b in &self.base_items {
            out.push_str(&format!("base {b}\n"));
        }
        for r in &self.recipes {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    pub fn recipes_for<'a>(&'a self, item: &str) -> impl Iterator<Item = &'a Recipe> + 'a {
        let item = item.to_string();
        self.recipes.iter().filter(move |r| r.output.0 == item)
    }

    pub fn is_known(&self, item: &str) -> bool {
        self.base_items.contains(item) || self.recipes_for(item).next().is_some()
    }

    /// Every item the book mentions, sorted.
    pub fn items(&self) -> BTreeSet<String> {
        let mut all = self.base_items.clone();
        for r in &self.recipes {
            all.insert(r.output.0.clone());
            all.extend(r.inputs.iter().map(|(i, _)| i.clone()));
        }
        all
    }

    pub fn validate(&self) -> Result<(), BookError> {
        for r in &self.recipes {
            if r.inputs.is_empty() {
                return Err(BookError::NoInputs(r.output.0.clone()));
            }
            if self.base_items.contains(&r.output.0) {
                return Err(BookError::BaseWithRecipe(r.output.0.clone()));
            }
            for (input, _) in &r.inputs {
                if *input == r.output.0 {
                    return Err(BookError::SelfInput(input.clone()));
                }
                if !self.is_known(input) {
                    return Err(BookError::UnknownInput { output: r.output.0.clone(), input: input.clone() });
                }
            }
        }
        // Depth-first search with colors over the item graph.
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn visit<'a>(book: &'a RecipeBook, item: &'a str, state: &mut BTreeMap<&'a str, u8>) -> Result<(), BookError> {
            match state.get(item) {
                Some(2) => return Ok(()),
                Some(1) => return Err(BookError::Cycle(item.to_string())),
                _ => {}
            }
            state.insert(item, 1);
            for r in book.recipes_for(item) {
                for (input, _) in &r.inputs {
                    visit(book, input, state)?;
                }
            }
            state.insert(item, 2);
            Ok(())
        }
        for r in &self.recipes {
            visit(self, &r.output.0, &mut state)?;
        }
        Ok(())
    }

    /// Base items are 0; a crafted item is one more than the deepest input
    /// of its shallowest recipe.
    pub fn recipe_depth(&self, item: &str) -> Result<u32, DepthError> {
        let mut memo = BTreeMap::new();
        self.depth_memo(item, &mut memo)
    }

    fn depth_memo(&self, item: &str, memo: &mut BTreeMap<String, u32>) -> Result<u32, DepthError> {
        if let Some(d) = memo.get(item) {
            return Ok(*d);
        }
        if self.base_items.contains(item) {
            return Ok(0);
        }
        let mut best: Option<u32> = None;
        for r in self.recipes_for(item) {
            let mut deepest = 0;
            for (input, _) in &r.inputs {
                deepest = deepest.max(self.depth_memo(input, memo)?);
            }
            best = Some(best.map_or(deepest + 1, |b| b.min(deepest + 1)));
        }
        let d = best.ok_or_else(|| DepthError::UnknownItem(item.to_string()))?;
        memo.insert(item.to_string(), d);
        Ok(d)
    }

    /// The recipe an optimal crafter uses: shallowest, first in file order on ties.
    pub fn best_recipe(&self, item: &str) -> Option<&Recipe> {
        let depth_of = |r: &Recipe| r.inputs.iter().map(|(i, _)| self.recipe_depth(i).unwrap_or(u32::MAX)).max();
        let mut best: Option<(&Recipe, u32)> = None;
        for r in self.recipes_for(item) {
            let d = depth_of(r).unwrap_or(0);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((r, d));
            }
        }
        best.map(|(r, _)| r)
    }

    /// Items at exactly `depth`, sorted.
    pub fn items_at_depth(&self, depth: u32) -> Vec<String> {
        self.items().into_iter().filter(|i| self.recipe_depth(i) == Ok(depth)).collect()
    }

    /// Recipes reachable from `item` through best recipes, inputs before outputs.
    pub fn subtree(&self, item: &str) -> Vec<&Recipe> {
        fn walk<'a>(book: &'a RecipeBook, item: &str, out: &mut Vec<&'a Recipe>) {
            if let Some(r) = book.best_recipe(item) {
                if out.contains(&r) {
                    return;
                }
                for (input, _) in &r.inputs {
                    walk(book, input, out);
                }
                if !out.contains(&r) {
                    out.push(r);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, item, &mut out);
        out
    }
}

/// What the player must end up holding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CraftTask {
    pub id: String,
    pub item: String,
    pub count: u32,
    pub depth: u32,
}

impl CraftTask {
    pub fn sentence(&self) -> String {
        format!("craft {} {}", self.count, self.item)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("the recipe book has no item at depth {0}")]
    NoItemAtDepth(u32),
}

/// Picks a target at `depth` deterministically from `seed`.
pub fn generate_task(book: &RecipeBook, depth: u32, seed: u64) -> Result<CraftTask, TaskError> {
    let candidates = book.items_at_depth(depth);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0xA24B_AED4_963E_E407) ^ u64::from(depth));
    let item = candidates.choose(&mut rng).ok_or(TaskError::NoItemAtDepth(depth))?.clone();
    let unit = book.best_recipe(&item).map_or(1, |r| r.output.1);
    let count = unit * rng.random_range(1..=2);
    Ok(CraftTask { id: format!("textcraft-d{depth}-{seed}"), item, count, depth })
}

/// Inventory as `1 log, 2 plank` sorted by item, or `None`.
pub fn format_inventory(inv: &BTreeMap<String, u32>) -> String {
    let parts: Vec<String> = inv.iter().filter(|(_, n)| **n > 0).map(|(i, n)| format!("{n} {i}")).collect();
    if parts.is_empty() {
        "None".to_string()
    } else {
        parts.join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CraftFocus {
    /// Hold at least this many of the item.
    Have(String, u32),
    /// Run this exact command successfully once.
    Execute(String),
}

impl CraftFocus {
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim().trim_end_matches('.').to_ascii_lowercase();
        match Command::parse(&t) {
            Ok(Command::Base(_)) => None,
            Ok(c) => Some(CraftFocus::Execute(c.to_line())),
            Err(_) => {
                let rest = t.strip_prefix("craft ").or_else(|| t.strip_prefix("get "))?;
                let (item, n) = count_item(rest)?;
                Some(CraftFocus::Have(item, n))
            }
        }
    }

    fn sentence(&self) -> String {
        match self {
            CraftFocus::Have(i, n) => format!("craft {n} {i}"),
            CraftFocus::Execute(c) => c.clone(),
        }
    }
}

/// A live crafting episode.
#[derive(Debug, Clone)]
pub struct TextcraftEnv {
    book: RecipeBook,
    task: CraftTask,
    inventory: BTreeMap<String, u32>,
    focus: Option<CraftFocus>,
    focus_done: bool,
    steps: usize,
    done: bool,
}

impl TextcraftEnv {
    pub fn new(book: RecipeBook, task: CraftTask) -> Self {
        Self { book, task, inventory: BTreeMap::new(), focus: None, focus_done: false, steps: 0, done: false }
    }

    pub fn task(&self) -> &CraftTask {
        &self.task
    }

    pub fn book(&self) -> &RecipeBook {
        &self.book
    }

    pub fn inventory(&self) -> &BTreeMap<String, u32> {
        &self.inventory
    }

    fn have(&self, item: &str) -> u32 {
        self.inventory.get(item).copied().unwrap_or(0)
    }

    /// Applies a command; `None` means rejected with no state change.
    fn apply(&mut self, cmd: &Command) -> Option<String> {
        match cmd {
            Command::Inventory => Some(if self.inventory.values().all(|n| *n == 0) {
                "Your inventory is empty.".to_string()
            } else {
                let parts: Vec<String> =
                    self.inventory.iter().filter(|(_, n)| **n > 0).map(|(i, n)| format!("[{i}] ({n})")).collect();
                format!("Inventory: {}", parts.join(" "))
            }),
            Command::Get { item, count } => {
                if !self.book.base_items.contains(item) {
                    return None;
                }
                *self.inventory.entry(item.clone()).or_insert(0) += count;
                Some(format!("Got {count} {item}"))
            }
            Command::Craft(want) => {
                let (item, count) = &want.output;
                let scaled = self.book.recipes_for(item).find_map(|r| {
                    if count % r.output.1 != 0 {
                        return None;
                    }
                    let k = count / r.output.1;
                    let mut need: Vec<(String, u32)> = r.inputs.iter().map(|(i, n)| (i.clone(), n * k)).collect();
                    let mut got = want.inputs.clone();
                    need.sort();
                    got.sort();
                    (need == got).then_some(need)
                })?;
                if scaled.iter().any(|(i, n)| self.have(i) < *n) {
                    return None;
                }
                for (i, n) in &scaled {
                    if let Some(slot) = self.inventory.get_mut(i) {
                        *slot -= n;
                    }
                }
                self.inventory.retain(|_, n| *n > 0);
                *self.inventory.entry(item.clone()).or_insert(0) += count;
                Some(format!("Crafted {count} {item}"))
            }
            Command::Base(_) => None,
        }
    }

    fn focus_satisfied(&self) -> bool {
        match &self.focus {
            None => self.have(&self.task.item) >= self.task.count,
            Some(CraftFocus::Have(i, n)) => self.have(i) >= *n,
            Some(CraftFocus::Execute(_)) => self.focus_done,
        }
    }

    /// Commands that reach `count` of `item` from the current inventory,
    /// reserving held items bottom-up.
    fn plan_for(&self, item: &str, count: u32, inv: &mut BTreeMap<String, u32>, out: &mut Vec<String>) {
        let have = inv.get(item).copied().unwrap_or(0);
        if have >= count {
            inv.insert(item.to_string(), have - count);
            return;
        }
        inv.insert(item.to_string(), 0);
        let need = count - have;
        if self.book.base_items.contains(item) {
            out.push(format!("get {need} {item}"));
            return;
        }
        let Some(r) = self.book.best_recipe(item) else { return };
        let k = need.div_ceil(r.output.1);
        for (input, n) in &r.inputs {
            self.plan_for(input, n * k, inv, out);
        }
        let inputs: Vec<(String, u32)> = r.inputs.iter().map(|(i, n)| (i.clone(), n * k)).collect();
        out.push(Recipe { output: (item.to_string(), r.output.1 * k), inputs }.to_line());
        *inv.entry(item.to_string()).or_insert(0) += r.output.1 * k - need;
    }

    pub fn oracle_plan(&self) -> Vec<String> {
        if self.done || self.focus_satisfied() {
            return Vec::new();
        }
        let (item, count) = match &self.focus {
            Some(CraftFocus::Execute(c)) => return vec![c.clone()],
            Some(CraftFocus::Have(i, n)) => (i.clone(), *n),
            None => (self.task.item.clone(), self.task.count),
        };
        let mut inv = self.inventory.clone();
        let mut out = Vec::new();
        self.plan_for(&item, count, &mut inv, &mut out);
        out
    }
}

impl Environment for TextcraftEnv {
    fn dialect(&self) -> Dialect {
        Dialect::Textcraft
    }

    fn id(&self) -> String {
        self.task.id.clone()
    }

    fn initial_observation(&self) -> Observation {
        let lines: Vec<String> = self.book.subtree(&self.task.item).iter().map(|r| r.to_line()).collect();
        let goal = self.focus.as_ref().map_or_else(|| self.task.sentence(), CraftFocus::sentence);
        Observation::initial(format!("Crafting commands:\n{}\nGoal: {goal}.", lines.join("\n")))
    }

    fn step(&mut self, action: &str) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        self.steps += 1;
        let cmd = Command::parse(action).ok();
        let text = cmd.as_ref().and_then(|c| self.apply(c));
        let accepted = text.is_some();
        if accepted {
            if let (Some(CraftFocus::Execute(want)), Some(c)) = (&self.focus, &cmd) {
                if Command::parse(want).ok().as_ref() == Some(c) {
                    self.focus_done = true;
                }
            }
        }
        let success = self.focus_satisfied();
        self.done = success;
        let text = text.unwrap_or_else(|| match cmd {
            None => format!("Could not understand the command: {}", action.trim()),
            Some(c) => format!("Could not execute {}", c.to_line()),
        });
        Ok(StepOutcome { observation: Observation { step_index: self.steps, text, accepted }, done: success, success })
    }

    fn normalize(&self, action: &str) -> String {
        match Command::parse(action) {
            Ok(Command::Base(_)) | Err(_) => action.trim().to_string(),
            Ok(c) => c.to_line(),
        }
    }

    fn ground_truth(&self) -> StateFields {
        StateFields::from_pairs([("current inventory", format_inventory(&self.inventory))])
    }

    fn oracle_action(&self) -> Option<String> {
        self.oracle_plan().into_iter().next()
    }

    fn oracle_decomposition(&self) -> Vec<String> {
        let (item, count) = match &self.focus {
            Some(CraftFocus::Execute(c)) => return vec![c.clone()],
            Some(CraftFocus::Have(i, n)) => (i.clone(), *n),
            None => (self.task.item.clone(), self.task.count),
        };
        let have = self.have(&item);
        if have >= count {
            return Vec::new();
        }
        let need = count - have;
        if self.book.base_items.contains(&item) {
            return vec![format!("get {need} {item}")];
        }
        let Some(r) = self.book.best_recipe(&item) else { return Vec::new() };
        let k = need.div_ceil(r.output.1);
        let mut out = Vec::new();
        for (input, n) in &r.inputs {
            let want = n * k;
            if self.have(input) >= want {
                continue;
            }
            let verb = if self.book.base_items.contains(input) { "get" } else { "craft" };
            out.push(format!("{verb} {} {input}", want - self.have(input)));
        }
        let inputs: Vec<(String, u32)> = r.inputs.iter().map(|(i, n)| (i.clone(), n * k)).collect();
        out.push(Recipe { output: (item, r.output.1 * k), inputs }.to_line());
        out
    }

    fn set_focus(&mut self, subtask: Option<&str>) -> Result<(), FocusError> {
        self.focus = match subtask {
            None => None,
            Some(s) => Some(CraftFocus::parse(s).ok_or_else(|| FocusError(s.to_string()))?),
        };
        self.focus_done = false;
        self.done = self.focus_satisfied();
        Ok(())
    }

    fn solved(&self) -> bool {
        self.focus_satisfied()
    }

    fn task_solved(&self) -> bool {
        self.have(&self.task.item) >= self.task.count
    }
}
