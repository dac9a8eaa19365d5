use std::collections::BTreeMap;

use proptest::prelude::*;
use stateact_core::assets::{bundled_book, bundled_tasks, TEXTCRAFT_RECIPES};
use stateact_core::env::Environment;
use stateact_core::textcraft::{generate_task, Command, CraftTask, DepthError, RecipeBook, TaskError, TextcraftEnv};

/// Depth by exhaustive search over the raw recipe lines: a base item is 0,
/// otherwise the cheapest recipe's deepest input plus one.
fn dfs_depth(lines: &[(String, Vec<String>)], bases: &[String], item: &str) -> Option<u32> {
    if bases.iter().any(|b| b == item) {
        return Some(0);
    }
    lines
        .iter()
        .filter(|(out, _)| out == item)
        .filter_map(|(_, ins)| ins.iter().map(|i| dfs_depth(lines, bases, i)).collect::<Option<Vec<u32>>>())
        .map(|ds| ds.into_iter().max().unwrap_or(0) + 1)
        .min()
}

fn raw_book(text: &str) -> (Vec<(String, Vec<String>)>, Vec<String>) {
    let mut lines = Vec::new();
    let mut bases = Vec::new();
    for l in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        if let Some(b) = l.strip_prefix("base ") {
            bases.push(b.to_string());
            continue;
        }
        let (out, ins) = l.strip_prefix("craft ").unwrap().split_once(" using ").unwrap();
        let strip = |s: &str| s.trim().split_once(' ').unwrap().1.to_string();
        lines.push((strip(out), ins.split(',').map(strip).collect()));
    }
    (lines, bases)
}

fn tiny() -> RecipeBook {
    RecipeBook::parse("base log\ncraft 1 plank using 1 log\ncraft 1 stick using 1 plank\n").unwrap()
}

#[test]
fn depth_examples() {
    let book = bundled_book();
    assert_eq!(book.recipe_depth("log"), Ok(0));
    assert_eq!(tiny().recipe_depth("plank"), Ok(1));
    assert_eq!(book.recipe_depth("stick"), Ok(2));
    assert_eq!(book.recipe_depth("unobtainium"), Err(DepthError::UnknownItem("unobtainium".into())));
}

#[test]
fn bundled_depths_match_exhaustive_search() {
    let (lines, bases) = raw_book(TEXTCRAFT_RECIPES);
    let book = bundled_book();
    for item in book.items() {
        assert_eq!(book.recipe_depth(&item).ok(), dfs_depth(&lines, &bases, &item), "{item}");
    }
}

#[test]
fn fresh_env_commands() {
    let task = CraftTask { id: "t".into(), item: "stick".into(), count: 1, depth: 2 };
    let mut env = TextcraftEnv::new(tiny(), task);
    assert_eq!(env.step("inventory").unwrap().observation.text, "Your inventory is empty.");
    let out = env.step("craft 1 stick using 1 plank").unwrap();
    assert!(!out.observation.accepted);
    assert!(env.inventory().is_empty());
    let out = env.step("get 2 log").unwrap();
    assert_eq!(out.observation.text, "Got 2 log");
    assert_eq!(env.inventory().get("log"), Some(&2));
    assert_eq!(env.ground_truth().get("current inventory"), Some("2 log"));
}

#[test]
fn task_generation() {
    let book = bundled_book();
    assert_eq!(generate_task(&book, 2, 0), generate_task(&book, 2, 0));
    assert_eq!(generate_task(&book, 5, 0), Err(TaskError::NoItemAtDepth(5)));
    let mut histogram = BTreeMap::new();
    for t in bundled_tasks() {
        assert_eq!(book.recipe_depth(&t.item), Ok(t.depth));
        *histogram.entry(t.depth).or_insert(0) += 1;
    }
    assert_eq!(histogram, BTreeMap::from([(2, 10), (3, 10), (4, 10)]));
}

#[test]
fn oracle_solves_every_bundled_task_within_budget() {
    let book = bundled_book();
    for task in bundled_tasks() {
        let id = task.id.clone();
        let mut env = TextcraftEnv::new(book.clone(), task);
        let mut steps = 0;
        while let Some(a) = env.oracle_action() {
            let out = env.step(&a).unwrap();
            assert!(out.observation.accepted, "{id}: {a}");
            steps += 1;
            if out.done {
                break;
            }
        }
        assert!(env.task_solved(), "{id}");
        assert!(steps <= 40, "{id}: {steps}");
    }
}

/// Commands drawn from the bundled book at a few multiples, plus junk.
fn vocabulary(book: &RecipeBook) -> Vec<String> {
    let mut out = vec!["inventory".to_string(), "craft stick".to_string(), "get 1 diamond".to_string()];
    for b in &book.base_items {
        out.push(format!("get 1 {b}"));
        out.push(format!("get 3 {b}"));
    }
    for r in &book.recipes {
        for k in 1..=2 {
            let ins: Vec<String> = r.inputs.iter().map(|(i, n)| format!("{} {i}", n * k)).collect();
            out.push(format!("craft {} {} using {}", r.output.1 * k, r.output.0, ins.join(", ")));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crafting_conserves_items(picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..80)) {
        let book = bundled_book();
        let words = vocabulary(&book);
        let task = CraftTask { id: "p".into(), item: "diamond pickaxe".into(), count: 99, depth: 0 };
        let mut env = TextcraftEnv::new(book, task);
        for pick in picks {
            let cmd = pick.get(&words);
            let before = env.inventory().clone();
            let out = env.step(cmd).unwrap();
            let after = env.inventory().clone();
            if !out.observation.accepted {
                prop_assert_eq!(&before, &after);
                continue;
            }
            let mut expected = before.clone();
            match Command::parse(cmd).unwrap() {
                Command::Get { item, count } => *expected.entry(item).or_insert(0) += count,
                Command::Craft(r) => {
                    for (i, n) in &r.inputs {
                        let slot = expected.get_mut(i).unwrap();
                        prop_assert!(*slot >= *n);
                        *slot -= n;
                    }
                    *expected.entry(r.output.0.clone()).or_insert(0) += r.output.1;
                }
                _ => {}
            }
            expected.retain(|_, n| *n > 0);
            prop_assert_eq!(expected, after);
        }
    }
}
