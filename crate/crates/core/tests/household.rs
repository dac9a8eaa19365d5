use proptest::prelude::*;
use stateact_core::env::Environment;
use stateact_core::household::{
    bundled_worlds, generate_world, normalize_action, split_name, ApplianceKind, HouseholdEnv, ObjectSpec,
    ReceptacleSpec, TaskKind, TaskSpec, UnrecognizedAction, Verb, WorldSpec, NOTHING_HAPPENS,
};

fn receptacle(name: &str, openable: bool, appliance: ApplianceKind) -> ReceptacleSpec {
    ReceptacleSpec { name: name.into(), openable, appliance }
}

fn object(name: &str, receptacle: &str) -> ObjectSpec {
    ObjectSpec { name: name.into(), receptacle: receptacle.into(), clean: false, hot: false, cool: false }
}

/// A small hand-built heat world: the apple sits on diningtable 1.
fn kitchen() -> WorldSpec {
    WorldSpec {
        id: "kitchen".into(),
        seed: 0,
        task: TaskSpec { kind: TaskKind::Heat, object_type: "apple".into(), target: "fridge".into() },
        receptacles: vec![
            receptacle("cabinet 1", true, ApplianceKind::None),
            receptacle("cabinet 2", true, ApplianceKind::None),
            receptacle("diningtable 1", false, ApplianceKind::None),
            receptacle("fridge 1", true, ApplianceKind::Fridge),
            receptacle("microwave 1", true, ApplianceKind::Microwave),
        ],
        objects: vec![object("apple 1", "diningtable 1"), object("mug 1", "diningtable 1"), object("egg 1", "cabinet 2")],
    }
}

fn names_in_o0(text: &str) -> Vec<String> {
    let list = text.split("you see ").nth(1).unwrap().split(".\n").next().unwrap();
    list.split(", ").map(|s| s.trim_start_matches("and ").trim_start_matches("a ").to_string()).collect()
}

#[test]
fn o0_lists_receptacles_by_type_then_descending_index() {
    let env = HouseholdEnv::generated(0, TaskKind::Heat);
    let o0 = env.initial_observation().text;
    assert!(o0.starts_with("You are in the middle of a room. Looking quickly around you, you see "));
    assert!(o0.contains("\nYour task is to: "));
    let names = names_in_o0(&o0);
    assert_eq!(names.len(), env.spec().receptacles.len());
    for pair in names.windows(2) {
        let (ta, ia) = split_name(&pair[0]).unwrap();
        let (tb, ib) = split_name(&pair[1]).unwrap();
        assert!(ta < tb || (ta == tb && ia > ib), "{pair:?}");
    }
}

#[test]
fn same_seed_same_world() {
    let a = HouseholdEnv::generated(0, TaskKind::Heat).initial_observation();
    let b = HouseholdEnv::generated(0, TaskKind::Heat).initial_observation();
    assert_eq!(a.text, b.text);
    assert_eq!(generate_world(7, TaskKind::Clean), generate_world(7, TaskKind::Clean));
}

#[test]
fn bundled_worlds_cover_each_kind_four_times() {
    let worlds = bundled_worlds();
    assert_eq!(worlds.len(), 24);
    for kind in TaskKind::ALL {
        assert_eq!(worlds.iter().filter(|w| w.task.kind == kind).count(), 4, "{kind}");
    }
}

#[test]
fn put_prepositions_share_a_canonical_form() {
    let a = normalize_action("put apple 1 in fridge 1", false).unwrap();
    assert_eq!(a.verb, Verb::Put);
    assert_eq!(a.operands, ["apple 1", "fridge 1"]);
    assert_eq!(a.canonical(false), "put apple 1 in/on fridge 1");
    assert_eq!(normalize_action("PUT apple 1 ON fridge 1", false).unwrap(), a);
    assert_eq!(normalize_action("put apple 1 in/on fridge 1", false).unwrap(), a);
    assert_eq!(normalize_action("move apple 1 to fridge 1", true).unwrap(), a);
    assert_eq!(a.canonical(true), "move apple 1 to fridge 1");
    assert!(normalize_action("move apple 1 to fridge 1", false).is_err());
    assert_eq!(
        normalize_action("jump over table 1", false),
        Err(UnrecognizedAction("jump over table 1".into()))
    );
    assert!(normalize_action("take apple from fridge 1", false).is_err());
    assert!(normalize_action("go to", false).is_err());
}

#[test]
fn step_semantics_examples() {
    let mut env = HouseholdEnv::new(kitchen()).unwrap();
    let out = env.step("open fridge 1").unwrap();
    assert_eq!(out.observation.text, NOTHING_HAPPENS);
    assert!(!out.observation.accepted);

    let out = env.step("go to fridge 1").unwrap();
    assert_eq!(out.observation.text, "The fridge 1 is closed.");
    assert!(out.observation.accepted);

    assert_eq!(
        env.step("go to diningtable 1").unwrap().observation.text,
        "On the diningtable 1, you see a apple 1, and a mug 1."
    );
    assert_eq!(
        env.step("take apple 1 from diningtable 1").unwrap().observation.text,
        "You pick up the apple 1 from the diningtable 1."
    );
    assert!(!env.step("take mug 1 from diningtable 1").unwrap().observation.accepted);
    env.step("go to microwave 1").unwrap();
    let out = env.step("heat apple 1 with microwave 1").unwrap();
    assert_eq!(out.observation.text, "You heat the apple 1 using the microwave 1.");
    assert!(out.observation.accepted);
    env.step("go to fridge 1").unwrap();
    assert_eq!(
        env.step("open fridge 1").unwrap().observation.text,
        "You open the fridge 1. The fridge 1 is open. In it, you see nothing."
    );
    let out = env.step("put apple 1 in fridge 1").unwrap();
    assert_eq!(out.observation.text, "You put the apple 1 in/on the fridge 1.");
    assert!(out.done && out.success);
}

#[test]
fn closed_receptacles_hide_their_contents() {
    let mut env = HouseholdEnv::new(kitchen()).unwrap();
    env.step("go to cabinet 2").unwrap();
    assert!(!env.step("take egg 1 from cabinet 2").unwrap().observation.accepted);
    assert_eq!(
        env.step("open cabinet 2").unwrap().observation.text,
        "You open the cabinet 2. The cabinet 2 is open. In it, you see a egg 1."
    );
    assert!(env.step("take egg 1 from cabinet 2").unwrap().observation.accepted);
}

#[test]
fn move_to_syntax_changes_put_wording() {
    let mut spec = kitchen();
    spec.task = TaskSpec { kind: TaskKind::Put, object_type: "mug".into(), target: "cabinet".into() };
    let mut env = HouseholdEnv::new(spec).unwrap().with_move_to_syntax(true);
    env.step("go to diningtable 1").unwrap();
    env.step("take mug 1 from diningtable 1").unwrap();
    env.step("go to cabinet 1").unwrap();
    env.step("open cabinet 1").unwrap();
    let out = env.step("move mug 1 to cabinet 1").unwrap();
    assert_eq!(out.observation.text, "You move the mug 1 to the cabinet 1.");
    assert!(out.success);
}

#[test]
fn oracle_plan_head_goes_to_the_object() {
    let env = HouseholdEnv::new(kitchen()).unwrap();
    assert_eq!(env.oracle_action().as_deref(), Some("go to diningtable 1"));
}

#[test]
fn oracle_solves_every_bundled_world() {
    for spec in bundled_worlds() {
        let kind = spec.task.kind;
        let id = spec.id.clone();
        let mut env = HouseholdEnv::new(spec).unwrap();
        let plan = env.oracle_plan();
        if kind == TaskKind::PutTwo {
            assert_eq!(plan.iter().filter(|a| a.starts_with("put ") && a.contains(" in/on ")).count(), 2, "{id}");
        }
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
        assert!(steps <= 50, "{id}");
    }
}

/// Actions over the world's own vocabulary, plus some junk.
fn vocabulary(spec: &WorldSpec) -> Vec<String> {
    let mut out = vec!["look".to_string(), "jump over table 1".to_string()];
    for r in &spec.receptacles {
        for verb in ["go to", "open", "close", "use"] {
            out.push(format!("{verb} {}", r.name));
        }
        for o in &spec.objects {
            out.push(format!("take {} from {}", o.name, r.name));
            out.push(format!("put {} in {}", o.name, r.name));
            for v in ["heat", "cool", "clean"] {
                out.push(format!("{v} {} with {}", o.name, r.name));
            }
        }
    }
    out
}

type Snapshot = (Vec<(String, Option<String>)>, Option<String>, Vec<(String, String)>);

fn snapshot(env: &HouseholdEnv) -> Snapshot {
    let placements = env.placements().into_iter().map(|(o, p)| (o.to_string(), p.map(str::to_string))).collect();
    let truth = env.ground_truth().iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    (placements, env.location().map(str::to_string), truth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn world_invariants_hold_under_random_actions(
        seed in 0u64..500,
        kind_ix in 0usize..6,
        picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..60),
    ) {
        let spec = generate_world(seed, TaskKind::ALL[kind_ix]);
        let words = vocabulary(&spec);
        let object_count = spec.objects.len();
        let mut env = HouseholdEnv::new(spec).unwrap();
        let mut seen_listing: std::collections::BTreeMap<String, String> = Default::default();
        for pick in picks {
            let action = pick.get(&words).clone();
            let before = snapshot(&env);
            let Ok(out) = env.step(&action) else { break };
            let after = snapshot(&env);

            // Every object is in exactly one place and at most one is held.
            prop_assert_eq!(after.0.len(), object_count);
            prop_assert!(after.0.iter().filter(|(_, p)| p.is_none()).count() <= 1);

            if !out.observation.accepted {
                prop_assert_eq!(&out.observation.text, NOTHING_HAPPENS);
                prop_assert_eq!(&before, &after);
            } else if let Ok(a) = normalize_action(&action, false) {
                match a.verb {
                    Verb::GoTo => {
                        if let Some(prev) = seen_listing.get(&a.operands[0]) {
                            prop_assert_eq!(prev, &out.observation.text);
                        }
                        seen_listing.insert(a.operands[0].clone(), out.observation.text.clone());
                    }
                    Verb::Put | Verb::Take | Verb::Open | Verb::Close => seen_listing.clear(),
                    _ => {}
                }
            }
            if out.done {
                break;
            }
        }
    }
}
