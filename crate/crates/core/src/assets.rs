//! Prompt and data files compiled into the crate.
//!
//! Few-shot prompts are stored with every field written out; each agent
//! variant renders its own projection of them at prompt time.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::adapt::PlannerPrompt;
use crate::codec::{CodecError, FewShotSet};
use crate::context::Dialect;
use crate::household::TaskKind;
use crate::textcraft::{generate_task, CraftTask, RecipeBook};

pub const HOUSEHOLD_PUT: &str = include_str!("../assets/household/put.txt");
pub const HOUSEHOLD_CLEAN: &str = include_str!("../assets/household/clean.txt");
pub const HOUSEHOLD_HEAT: &str = include_str!("../assets/household/heat.txt");
pub const HOUSEHOLD_COOL: &str = include_str!("../assets/household/cool.txt");
pub const HOUSEHOLD_EXAMINE: &str = include_str!("../assets/household/examine.txt");
pub const HOUSEHOLD_PUTTWO: &str = include_str!("../assets/household/puttwo.txt");
pub const WEBSHOP_PROMPT: &str = include_str!("../assets/webshop/prompt.txt");
pub const TEXTCRAFT_PROMPT: &str = include_str!("../assets/textcraft/prompt.txt");
pub const TEXTCRAFT_RECIPES: &str = include_str!("../assets/textcraft/recipes.txt");
pub const HOUSEHOLD_PLANNER: &str = include_str!("../assets/planner/household.txt");
pub const TEXTCRAFT_PLANNER: &str = include_str!("../assets/planner/textcraft.txt");
pub const MANIFEST: &str = include_str!("../assets/manifest.txt");

/// Depths of the bundled crafting tasks.
pub const TASK_DEPTHS: [u32; 3] = [2, 3, 4];
/// Seeds per depth of the bundled crafting tasks.
pub const TASKS_PER_DEPTH: u64 = 10;

/// The raw prompt file for a dialect. Household prompts are per task kind;
/// `None` there means the put prompt.
pub fn prompt_text(dialect: Dialect, kind: Option<TaskKind>) -> &'static str {
    match dialect {
        Dialect::Household => match kind.unwrap_or(TaskKind::Put) {
            TaskKind::Put => HOUSEHOLD_PUT,
            TaskKind::Clean => HOUSEHOLD_CLEAN,
            TaskKind::Heat => HOUSEHOLD_HEAT,
            TaskKind::Cool => HOUSEHOLD_COOL,
            TaskKind::Examine => HOUSEHOLD_EXAMINE,
            TaskKind::PutTwo => HOUSEHOLD_PUTTWO,
        },
        Dialect::Webshop => WEBSHOP_PROMPT,
        Dialect::Textcraft => TEXTCRAFT_PROMPT,
    }
}

/// Parsed few-shot set for a dialect and household task kind.
pub fn few_shot(dialect: Dialect, kind: Option<TaskKind>) -> Result<FewShotSet, CodecError> {
    let task_type = match dialect {
        Dialect::Household => Some(kind.unwrap_or(TaskKind::Put).as_str()),
        _ => None,
    };
    FewShotSet::parse(prompt_text(dialect, kind), dialect, task_type)
}

/// Planner prompt for decomposition; webshop has none.
pub fn planner(dialect: Dialect) -> Option<PlannerPrompt> {
    match dialect {
        Dialect::Household => Some(PlannerPrompt::new(HOUSEHOLD_PLANNER)),
        Dialect::Textcraft => Some(PlannerPrompt::new(TEXTCRAFT_PLANNER)),
        Dialect::Webshop => None,
    }
}

pub fn bundled_book() -> RecipeBook {
    RecipeBook::parse(TEXTCRAFT_RECIPES).expect("bundled recipe book is valid")
}

/// Ten tasks for each bundled depth, in depth then seed order.
pub fn bundled_tasks() -> Vec<CraftTask> {
    let book = bundled_book();
    TASK_DEPTHS
        .iter()
        .flat_map(|&d| (0..TASKS_PER_DEPTH).map(move |s| (d, s)))
        .map(|(d, s)| generate_task(&book, d, s).expect("bundled book has items at every bundled depth"))
        .collect()
}

/// One line of the prompt manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub example: usize,
    pub stateact_words: usize,
    pub react_words: usize,
}

pub fn manifest() -> Vec<ManifestEntry> {
    MANIFEST
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            Some(ManifestEntry {
                file: it.next()?.to_string(),
                example: it.next()?.parse().ok()?,
                stateact_words: it.next()?.parse().ok()?,
                react_words: it.next()?.parse().ok()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::PromptFile;
    use crate::context::AgentVariant;

    fn all_prompts() -> Vec<(&'static str, Dialect, &'static str)> {
        let mut v: Vec<(&str, Dialect, &str)> = TaskKind::ALL
            .iter()
            .map(|k| {
                let file = match k {
                    TaskKind::Put => "household/put.txt",
                    TaskKind::Clean => "household/clean.txt",
                    TaskKind::Heat => "household/heat.txt",
                    TaskKind::Cool => "household/cool.txt",
                    TaskKind::Examine => "household/examine.txt",
                    TaskKind::PutTwo => "household/puttwo.txt",
                };
                (file, Dialect::Household, prompt_text(Dialect::Household, Some(*k)))
            })
            .collect();
        v.push(("textcraft/prompt.txt", Dialect::Textcraft, TEXTCRAFT_PROMPT));
        v.push(("webshop/prompt.txt", Dialect::Webshop, WEBSHOP_PROMPT));
        v
    }

    #[test]
    fn prompts_parse_cleanly_and_round_trip() {
        for (name, dialect, text) in all_prompts() {
            let file = PromptFile::parse(text, dialect).unwrap();
            assert_eq!(file.recoveries, 0, "{name}");
            assert_eq!(file.to_text(), text, "{name}");
            let expected = if dialect == Dialect::Webshop { 1 } else { 2 };
            assert_eq!(file.examples.len(), expected, "{name}");
        }
    }

    #[test]
    fn manifest_matches_rendered_examples() {
        let entries = manifest();
        assert_eq!(entries.len(), 14);
        for e in &entries {
            let (_, dialect, text) = all_prompts().into_iter().find(|(n, ..)| *n == e.file).unwrap();
            let file = PromptFile::parse(text, dialect).unwrap();
            let ex = &file.examples[e.example];
            assert_eq!(ex.word_count(&AgentVariant::stateact(dialect)), e.stateact_words, "{e:?}");
            assert_eq!(ex.word_count(&AgentVariant::react(dialect)), e.react_words, "{e:?}");
        }
    }

    #[test]
    fn household_examples_within_length_band() {
        for e in manifest().iter().filter(|e| e.file.starts_with("household/")) {
            assert!((484..=911).contains(&e.stateact_words), "{e:?}");
            assert!((352..=591).contains(&e.react_words), "{e:?}");
        }
    }

    #[test]
    fn bundled_tasks_cover_each_depth() {
        let book = bundled_book();
        let tasks = bundled_tasks();
        assert_eq!(tasks.len(), 30);
        for t in &tasks {
            assert_eq!(book.recipe_depth(&t.item), Ok(t.depth));
        }
    }

    #[test]
    fn planners_hold_placeholders() {
        for d in [Dialect::Household, Dialect::Textcraft] {
            let p = planner(d).unwrap();
            assert!(p.template.contains("<OBSERVATION>") && p.template.contains("<TASK>"));
        }
        assert!(planner(Dialect::Webshop).is_none());
    }
}
