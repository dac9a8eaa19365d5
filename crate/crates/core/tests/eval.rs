use stateact_core::agent::{run_episode, EpisodeOptions, StepRecord};
use stateact_core::assets;
use stateact_core::backend::OracleBackend;
use stateact_core::context::{AgentVariant, Dialect, Observation, StateFields};
use stateact_core::env::{Environment, SharedEnv};
use stateact_core::eval::{
    avg_steps, bucket_success, gold_update, state_accuracy, EpisodeSummary, EvalError, GoldState, MetricsReport,
    StepScope,
};
use stateact_core::household::{bundled_worlds, HouseholdEnv};

fn household(location: &str, inventory: &str) -> GoldState {
    GoldState::Household { location: location.into(), inventory: inventory.into(), visited: Vec::new() }
}

fn obs(text: &str, accepted: bool) -> Observation {
    Observation { step_index: 1, text: text.into(), accepted }
}

fn ep(steps: usize, success: bool) -> EpisodeSummary {
    EpisodeSummary { success, steps_taken: steps, max_steps: 50 }
}

#[test]
fn gold_update_examples() {
    let s = gold_update(&household("table 1", "None"), "go to fridge 1", &obs("The fridge 1 is closed.", true));
    assert_eq!(s.fields().get("current location"), Some("fridge 1"));
    assert_eq!(s.fields().get("current inventory"), Some("None"));

    let any = household("cabinet 3", "mug 1");
    assert_eq!(gold_update(&any, "put mug 1 in/on cabinet 3", &obs("Nothing happens.", false)), any);

    let s = gold_update(
        &household("diningtable 1", "None"),
        "take apple 1 from diningtable 1",
        &obs("You pick up the apple 1 from the diningtable 1.", true),
    );
    assert_eq!(s.fields().get("current inventory"), Some("apple 1"));
    let s = gold_update(&s, "put apple 1 in fridge 1", &obs("You put the apple 1 in/on the fridge 1.", true));
    assert_eq!(s.fields().get("current inventory"), Some("None"));
}

fn record(location: &str, gold_location: &str) -> StepRecord {
    StepRecord {
        step: 0,
        raw_completion: String::new(),
        goal: None,
        state: Some(StateFields::from_pairs([("current location", location), ("current inventory", "None")])),
        thought: None,
        action: "look".into(),
        normalized_action: "look".into(),
        observation: "Nothing happens.".into(),
        accepted: false,
        gold_state: StateFields::from_pairs([("current location", gold_location), ("current inventory", "None")]),
        goal_drift: false,
        recoveries: 0,
        prompt_chars: 0,
        error: None,
    }
}

#[test]
fn state_accuracy_counts_whole_state_matches() {
    let variant = AgentVariant::stateact(Dialect::Household);
    let records = [
        record("fridge 1", "fridge 1"),
        record("Fridge 1 ", "fridge 1"),
        record("sinkbasin 1", "fridge 1"),
        record("countertop 2", "countertop 2"),
    ];
    let acc = state_accuracy(&records, &variant).unwrap();
    assert_eq!(acc.overall, 0.75);
    assert_eq!(acc.per_key, [("current location".to_string(), 0.75), ("current inventory".to_string(), 1.0)]);
    assert_eq!(state_accuracy(&records, &AgentVariant::react(Dialect::Household)), Err(EvalError::NoStateVariant));
}

#[test]
fn oracle_episodes_track_state_perfectly() {
    let variant = AgentVariant::stateact(Dialect::Household);
    for spec in bundled_worlds().into_iter().take(6) {
        let kind = spec.task.kind;
        let env = SharedEnv::new(HouseholdEnv::new(spec).unwrap());
        let oracle = OracleBackend::new(env.clone(), variant);
        let few = assets::few_shot(Dialect::Household, Some(kind)).unwrap();
        let opts = EpisodeOptions { episode_id: env.id(), ..EpisodeOptions::default() };
        let result = run_episode(&mut env.clone(), &variant, &oracle, &few, 50, &opts);
        assert!(result.success);
        assert_eq!(state_accuracy(&result.records, &variant).unwrap().overall, 1.0);
    }
}

#[test]
fn avg_steps_examples() {
    assert_eq!(avg_steps(&[ep(5, true), ep(10, true), ep(15, true)], StepScope::All), Ok(10.0));
    let mixed = [ep(7, true), ep(50, false)];
    assert_eq!(avg_steps(&mixed, StepScope::All), Ok(28.5));
    assert_eq!(avg_steps(&mixed, StepScope::SolvedOnly), Ok(7.0));
    assert!(avg_steps(&mixed, StepScope::All).unwrap() >= avg_steps(&mixed, StepScope::SolvedOnly).unwrap());
    assert_eq!(avg_steps(&[], StepScope::All), Err(EvalError::EmptyInput));
    assert_eq!(avg_steps(&[ep(9, false)], StepScope::SolvedOnly), Err(EvalError::EmptyInput));
}

#[test]
fn bucket_fixture() {
    let episodes = [ep(3, true), ep(12, true), ep(44, true), ep(50, false)];
    let table = bucket_success(&episodes, 10).unwrap();
    let got: Vec<(&str, usize, usize)> = table.iter().map(|b| (b.label.as_str(), b.attempted, b.solved)).collect();
    assert_eq!(got, [("1-10", 1, 1), ("11-20", 1, 1), ("21-30", 0, 0), ("31-40", 0, 0), ("41-50", 2, 1)]);
    assert_eq!(table.iter().map(|b| b.attempted).sum::<usize>(), episodes.len());
    assert!(table.iter().all(|b| b.solved <= b.attempted));
    assert_eq!(bucket_success(&[], 10), Err(EvalError::EmptyInput));
}

#[test]
fn failed_episode_lands_in_budget_bucket() {
    let table = bucket_success(&[ep(4, false)], 10).unwrap();
    assert_eq!(table.len(), 5);
    assert_eq!((table[4].attempted, table[4].solved), (1, 0));
    assert_eq!(table[0].attempted, 0);
}

#[test]
fn report_table_and_json() {
    let variant = AgentVariant::stateact(Dialect::Household);
    let records = [record("fridge 1", "fridge 1")];
    let views = [stateact_core::eval::EpisodeView { summary: ep(1, true), records: &records, parse_failure: false }];
    let report = MetricsReport::compute(&variant, "household", &views, 10).unwrap();
    assert_eq!(report.success_rate, 1.0);
    assert_eq!(report.state_accuracy, Some(1.0));
    let table = report.to_table();
    assert!(table.contains("success rate        1.00"), "{table}");
    let back: MetricsReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
}
