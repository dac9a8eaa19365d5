use stateact_core::agent::{decide, run_episode, EpisodeOptions, Termination};
use stateact_core::assets;
use stateact_core::backend::{FnBackend, ModelBackend, OracleBackend, ScriptedBackend};
use stateact_core::codec::{serialize_context, PromptFile};
use stateact_core::context::{AgentContext, AgentVariant, Dialect, Observation, Trace};
use stateact_core::env::{Environment, SharedEnv};
use stateact_core::goal::extract_goal;
use stateact_core::household::{bundled_worlds, HouseholdEnv, TaskKind};
use stateact_core::textcraft::TextcraftEnv;

const BLOCK_SEP: &str = "\n\n";
const EXAMPLE_SEP: &str = "\n\n\n\n";

fn opts(id: &str) -> EpisodeOptions {
    EpisodeOptions { episode_id: id.into(), ..EpisodeOptions::default() }
}

fn heat_world() -> HouseholdEnv {
    let spec = bundled_worlds().into_iter().find(|w| w.task.kind == TaskKind::Heat).unwrap();
    HouseholdEnv::new(spec).unwrap()
}

/// Raw context blocks of the first example of a prompt file, in order.
fn first_example_blocks(text: &str, start: &str) -> Vec<String> {
    let body = &text[text.find(start).unwrap()..];
    let first = body.split(EXAMPLE_SEP).next().unwrap();
    first.split(BLOCK_SEP).skip(1).step_by(2).map(str::to_string).collect()
}

#[test]
fn goal_from_textcraft_fixture_prompt() {
    let file = PromptFile::parse(assets::TEXTCRAFT_PROMPT, Dialect::Textcraft).unwrap();
    assert_eq!(extract_goal(&file.examples[0].trace.initial).unwrap(), "craft 1 wooden pickaxe");
    assert_eq!(extract_goal(&file.examples[1].trace.initial).unwrap(), "craft 1 iron sword");
}

#[test]
fn oracle_first_decision_is_plan_head() {
    let env = SharedEnv::new(heat_world());
    let variant = AgentVariant::stateact(Dialect::Household);
    let oracle = OracleBackend::new(env.clone(), variant);
    let few = assets::few_shot(Dialect::Household, Some(TaskKind::Heat)).unwrap();
    let trace = Trace::new(env.initial_observation());
    let d = decide(&trace, &variant, &oracle, &few, &opts("e")).unwrap();
    let plan = env.with(|e| e.oracle_plan());
    assert_eq!(d.context().action, plan[0]);
    assert!(plan[0].starts_with("go to "));
    assert_eq!(oracle.calls(), 1);
}

#[test]
fn replaying_appendix_heat_blocks_reproduces_them() {
    let file = PromptFile::parse(assets::HOUSEHOLD_HEAT, Dialect::Household).unwrap();
    let example = &file.examples[0];
    let blocks = first_example_blocks(assets::HOUSEHOLD_HEAT, "You are in the middle");
    let variant = AgentVariant::stateact(Dialect::Household);
    let few = assets::few_shot(Dialect::Household, Some(TaskKind::Heat)).unwrap();
    let mut trace = Trace::new(example.trace.initial.clone());
    for (i, block) in blocks.iter().enumerate() {
        let backend = ScriptedBackend::new([block.clone()]);
        let d = decide(&trace, &variant, &backend, &few, &opts("heat")).unwrap();
        assert_eq!(serialize_context(d.context(), &variant), *block, "block {i}");
        let expected = match example.trace.steps.get(i) {
            Some((ctx, _)) => ctx.clone(),
            None => example.closing.clone().unwrap(),
        };
        assert_eq!(d.context(), &expected);
        if let Some((ctx, obs)) = example.trace.steps.get(i) {
            trace.push(ctx.clone(), obs.clone()).unwrap();
        }
    }
    let first = &example.trace.steps[0].0;
    assert_eq!(first.goal.as_deref(), Some("put a hot apple in fridge"));
    assert_eq!(first.state.as_ref().unwrap().get("current location"), Some("starting location"));
    assert_eq!(first.action, "go to fridge 1");
}

#[test]
fn disabled_thought_is_absent() {
    let variant = AgentVariant::new(Dialect::Household, true, true, false);
    let few = assets::few_shot(Dialect::Household, None).unwrap();
    let trace = Trace::new(Observation::initial("Your task is to: x."));
    let backend = ScriptedBackend::new([">goal: x\ncurrent location: desk 1\ncurrent inventory: None\naction: look"]);
    let d = decide(&trace, &variant, &backend, &few, &opts("e")).unwrap();
    assert_eq!(d.context().thought, None);
    assert_eq!(d.context().action, "look");
}

#[test]
fn heat_world_oracle_episode() {
    let env = SharedEnv::new(heat_world());
    let variant = AgentVariant::stateact(Dialect::Household);
    let oracle = OracleBackend::new(env.clone(), variant);
    let few = assets::few_shot(Dialect::Household, Some(TaskKind::Heat)).unwrap();
    let plan_len = env.with(|e| e.oracle_plan().len());
    let result = run_episode(&mut env.clone(), &variant, &oracle, &few, 50, &opts("heat"));
    assert!(result.success);
    assert_eq!(result.termination, Termination::Solved);
    assert_eq!(result.steps_taken, plan_len);
    assert!(result.steps_taken <= 12);
    assert_eq!(oracle.calls(), result.steps_taken);
    assert_eq!(result.steps_taken, result.records.len());
}

#[test]
fn no_progress_agent_hits_step_limit() {
    let variant = AgentVariant::act_only(Dialect::Household);
    let few = assets::few_shot(Dialect::Household, None).unwrap();
    let backend = FnBackend(|_: &_| Ok("action: xyzzy".to_string()));
    let mut env = heat_world();
    let result = run_episode(&mut env, &variant, &backend, &few, 7, &opts("x"));
    assert_eq!(result.termination, Termination::StepLimit);
    assert!(!result.success);
    assert_eq!(result.steps_taken, 7);
    assert!(result.records.iter().all(|r| !r.accepted && r.observation == "Nothing happens."));
}

#[test]
fn textcraft_depth_two_oracle_episode() {
    let task = assets::bundled_tasks().into_iter().find(|t| t.depth == 2).unwrap();
    let env = SharedEnv::new(TextcraftEnv::new(assets::bundled_book(), task));
    let variant = AgentVariant::stateact(Dialect::Textcraft);
    let oracle = OracleBackend::new(env.clone(), variant);
    let few = assets::few_shot(Dialect::Textcraft, None).unwrap();
    let result = run_episode(&mut env.clone(), &variant, &oracle, &few, 40, &opts("tc"));
    assert!(result.success);
}

#[test]
fn goal_is_pinned_and_drift_flagged() {
    let variant = AgentVariant::stateact(Dialect::Household);
    let few = assets::few_shot(Dialect::Household, None).unwrap();
    let mut env = heat_world();
    let pinned = extract_goal(&env.initial_observation()).unwrap();
    let backend = ScriptedBackend::new([
        format!(">goal: {pinned}\ncurrent location: starting location\ncurrent inventory: None\nthought: None\naction: look"),
        ">goal: something else\ncurrent location: x 1\ncurrent inventory: None\nthought: None\naction: look".into(),
    ]);
    let result = run_episode(&mut env, &variant, &backend, &few, 3, &opts("g"));
    assert!(result.records.iter().take(2).all(|r| r.goal.as_deref() == Some(pinned.as_str())));
    assert!(!result.records[0].goal_drift);
    assert!(result.records[1].goal_drift);
    // The third call runs out of replies.
    assert_eq!(result.termination, Termination::BackendError);
    assert_eq!(result.steps_taken, 3);
    assert_eq!(backend.calls(), 3);
}

#[test]
fn missing_action_ends_with_parse_failure() {
    let variant = AgentVariant::react(Dialect::Household);
    let few = assets::few_shot(Dialect::Household, None).unwrap();
    let backend = ScriptedBackend::new(["thought: I think we should look around"]);
    let mut env = heat_world();
    let result = run_episode(&mut env, &variant, &backend, &few, 50, &opts("p"));
    assert_eq!(result.termination, Termination::ParseFailure);
    assert!(!result.success);
    assert_eq!(result.steps_taken, 1);
    assert!(result.records[0].error.is_some());
}

#[test]
fn replay_runs_are_byte_identical() {
    let variant = AgentVariant::stateact(Dialect::Household);
    let few = assets::few_shot(Dialect::Household, Some(TaskKind::Heat)).unwrap();
    let env = SharedEnv::new(heat_world());
    let oracle = OracleBackend::new(env.clone(), variant);
    let recorded = run_episode(&mut env.clone(), &variant, &oracle, &few, 50, &opts("r"));
    let replies: Vec<String> = recorded.records.iter().map(|r| r.raw_completion.clone()).collect();
    let runs: Vec<String> = (0..2)
        .map(|_| {
            let backend = ScriptedBackend::new(replies.clone());
            let mut env = heat_world();
            let r = run_episode(&mut env, &variant, &backend, &few, 50, &opts("r"));
            serde_json::to_string(&r).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], serde_json::to_string(&recorded).unwrap());
}

#[test]
fn every_variant_runs_one_call_per_step() {
    for variant in AgentVariant::ablation_grid(Dialect::Household) {
        let env = SharedEnv::new(heat_world());
        let oracle = OracleBackend::new(env.clone(), variant);
        let few = assets::few_shot(Dialect::Household, Some(TaskKind::Heat)).unwrap();
        let result = run_episode(&mut env.clone(), &variant, &oracle, &few, 50, &opts("v"));
        assert!(result.success, "{}", variant.label());
        assert_eq!(oracle.calls(), result.steps_taken);
        for r in &result.records {
            assert_eq!(r.goal.is_some(), variant.include_goal);
            assert_eq!(r.state.is_some(), variant.include_state);
            assert!(r.thought.is_none());
        }
    }
}

#[test]
fn single_call_property_with_counting_backend() {
    use std::cell::Cell;
    let calls = Cell::new(0);
    let backend = FnBackend(|_: &_| {
        calls.set(calls.get() + 1);
        Ok("action: inventory".to_string())
    });
    let variant = AgentVariant::act_only(Dialect::Textcraft);
    let few = assets::few_shot(Dialect::Textcraft, None).unwrap();
    let task = assets::bundled_tasks().remove(0);
    let mut env = TextcraftEnv::new(assets::bundled_book(), task);
    let result = run_episode(&mut env, &variant, &backend as &dyn ModelBackend, &few, 5, &opts("c"));
    assert_eq!(calls.get(), result.steps_taken);
    assert!(result.records.iter().all(|r| r.accepted));
    let _ = AgentContext::action_only("x");
}
