mod common;

use std::collections::BTreeSet;

use actsem::clause::import_clause_theories;
use actsem::induction::{
    effect_set, explain_theory, induce_theory, learn_from_trace, refine_theory, transition_group, LearnConfig,
};
use actsem::knowledge::{builtin_library, ConstantValue, EvaluationContext, KnowledgeConfig, Library};
use actsem::simulator::{builtin_scenario, parse_scenario, random_policy, run_script, ActionKind, Command};
use actsem::trace::{ActionRecord, Binding, Sample, StateSnapshot};
use actsem::types::TypedValue;
use common::*;

fn names(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn four_variable_snapshot(t: i64, y: f64) -> StateSnapshot {
    StateSnapshot::new(
        t,
        vec![
            Binding::observable("r_pos", TypedValue::Pos(vec![9.0, y])),
            Binding::observable("obj_num", TypedValue::Num(1.0)),
            Binding::observable(
                "obj_grab",
                TypedValue::Product(vec![TypedValue::Obj("none".into()), TypedValue::Bool(false)]),
            ),
            Binding::observable(
                "obj_pos",
                TypedValue::Product(vec![TypedValue::Obj("obst".into()), TypedValue::Pos(vec![13.0, 3.0])]),
            ),
        ],
    )
}

#[test]
fn effect_set_of_listed_snapshots() {
    let (prev, next) = (four_variable_snapshot(31, 14.0), four_variable_snapshot(33, 20.0));
    let eff = effect_set(32, &prev, &next, TOL, false).unwrap();
    assert_eq!(eff.effects, names(&["r_pos"]));
    assert_eq!(eff.non_effects, names(&["obj_num", "obj_grab", "obj_pos"]));
}

#[test]
fn worked_triplet_and_candidates() {
    let sample = worked_sample();
    let (action, prev, next) = sample.occurrences().next().unwrap();
    let eff = effect_set(action.t, prev, next, TOL, false).unwrap();
    let group = transition_group(&eff, prev, next, action, false);
    assert_eq!(group.triplets.len(), 1);
    let t = &group.triplets[0];
    assert_eq!(t.before, TypedValue::Pos(vec![9.0, 14.0]));
    assert_eq!(t.parameter, TypedValue::Dist(3.0));
    assert_eq!(t.after, TypedValue::Pos(vec![9.0, 20.0]));
    assert_eq!(t.types().map(|x| x.to_string()), ["pos", "dist", "pos"]);

    let cfg = KnowledgeConfig::default();
    let th = induce_theory(&group, &builtin_library(), &EvaluationContext::new(prev, next, &cfg));
    let two = Some(&ConstantValue::Num(2.0));
    for rel in ["travel_axis1", "has_new_position"] {
        let c = th.candidates("r_pos").iter().find(|c| c.relation == rel).unwrap();
        assert_eq!(c.constants.get("C"), two, "{rel}");
        assert_eq!(c.param_index, Some(0));
    }
    assert!(!th.variables["r_pos"].contains("travel_axis0"));
}

#[test]
fn group_sizes() {
    let vars = ["a", "b", "c", "d"];
    let mk = |t, base: f64| {
        StateSnapshot::new(
            t,
            vars.iter()
                .map(|v| Binding::observable(*v, TypedValue::Num(base)))
                .collect(),
        )
    };
    let prev = mk(1, 0.0);
    let mut next = mk(3, 1.0);
    next.bindings[3].value = TypedValue::Num(0.0);
    let eff = effect_set(2, &prev, &next, TOL, false).unwrap();
    assert_eq!(eff.effects.len(), 3);
    let two = ActionRecord::new("a", 2, vec![TypedValue::Num(1.0), TypedValue::Dist(2.0)]);
    assert_eq!(transition_group(&eff, &prev, &next, &two, false).triplets.len(), 6);
    let none = ActionRecord::new("a", 2, vec![]);
    let g = transition_group(&eff, &prev, &next, &none, false);
    assert!(g.triplets.is_empty());
    let th = induce_theory(
        &g,
        &builtin_library(),
        &EvaluationContext::new(&prev, &next, &KnowledgeConfig::default()),
    );
    assert!(th.variables.is_empty());
}

#[test]
fn arithmetic_triplet_against_hand_arithmetic() {
    let prev = StateSnapshot::new(1, vec![Binding::observable("n", TypedValue::Num(2.0))]);
    let next = StateSnapshot::new(3, vec![Binding::observable("n", TypedValue::Num(5.0))]);
    let action = ActionRecord::new("bump", 2, vec![TypedValue::Num(3.0)]);
    let eff = effect_set(2, &prev, &next, TOL, false).unwrap();
    let group = transition_group(&eff, &prev, &next, &action, false);
    let th = induce_theory(
        &group,
        &builtin_library(),
        &EvaluationContext::new(&prev, &next, &KnowledgeConfig::default()),
    );
    let got: BTreeSet<&str> = th.relations().collect();
    // 2+3=5; 2-3=-1; 2*3=6; 2/3; 5>2
    assert!(got.contains("add_to"));
    for absent in ["sub_from", "mult_by", "div_by", "greater_than", "equals"] {
        assert!(!got.contains(absent), "{absent}");
    }
    assert!(got.contains("less_than"));
}

fn open_scenario(heading: f64) -> actsem::simulator::Scenario {
    parse_scenario(&format!(
        "name = \"open\"\nposition = [0.0, 0.0]\nheading = {heading:.1}\nspeed = 2.0\n"
    ))
    .unwrap()
}

#[test]
fn east_moves_learn_axis0_travel() {
    let scenario = open_scenario(90.0);
    let script = vec![Command::MoveForward(3.0); 5];
    let sample = run_script(&scenario, &script, 1).unwrap();
    for (i, s) in sample.snapshots().iter().enumerate() {
        assert_eq!(s.get("r_pos"), Some(&TypedValue::Pos(vec![6.0 * i as f64, 0.0])));
    }
    let store = learn_from_trace(&sample, &builtin_library(), &LearnConfig::default()).unwrap();
    let th = store.get("move_forward").unwrap();
    let c = th
        .candidates("r_pos")
        .iter()
        .find(|c| c.relation == "travel_axis0")
        .unwrap();
    assert_eq!(c.constants.get("C"), Some(&ConstantValue::Num(2.0)));
    assert_eq!(store.occurrences["move_forward"], 5);
}

#[test]
fn turn_only_trace() {
    let scenario = open_scenario(0.0);
    let script = vec![
        Command::TurnLeft(90.0),
        Command::TurnLeft(30.0),
        Command::TurnRight(45.0),
        Command::TurnLeft(15.0),
    ];
    let sample = run_script(&scenario, &script, 3).unwrap();
    let store = learn_from_trace(&sample, &builtin_library(), &LearnConfig::default()).unwrap();
    let th = store.get("turn_left").unwrap();
    assert!(th.variables["r_dir"].contains("change_in_orientation"));
    assert!(th.variables["r_dir"].contains("rotate_by"));
    assert!(!th.variables.contains_key("r_pos"));
    let rot = th
        .candidates("r_dir")
        .iter()
        .find(|c| c.relation == "rotate_by")
        .unwrap();
    assert_eq!(rot.constants.get("Z"), Some(&ConstantValue::Num(1.0)));
    let right = store.get("turn_right").unwrap();
    let rot = right
        .candidates("r_dir")
        .iter()
        .find(|c| c.relation == "rotate_by")
        .unwrap();
    assert_eq!(rot.constants.get("Z"), Some(&ConstantValue::Num(-1.0)));
}

#[test]
fn no_actions_no_theories() {
    let sample = Sample::new(vec![four_variable_snapshot(1, 0.0)], vec![]).unwrap();
    assert!(learn_from_trace(&sample, &builtin_library(), &LearnConfig::default())
        .unwrap()
        .is_empty());
    assert!(learn_from_trace(&sample, &Library::empty(), &LearnConfig::default()).is_err());
}

#[test]
fn failed_actions_are_skipped_unless_asked() {
    let scenario = open_scenario(0.0);
    let script = vec![
        Command::MoveForward(1.0),
        Command::Drop("x".into()),
        Command::MoveForward(2.0),
    ];
    let sample = run_script(&scenario, &script, 0).unwrap();
    let lib = builtin_library();
    let store = learn_from_trace(&sample, &lib, &LearnConfig::default()).unwrap();
    assert!(store.get("drop").is_none());
    let keep = LearnConfig {
        assume_success: false,
        ..LearnConfig::default()
    };
    let store = learn_from_trace(&sample, &lib, &keep).unwrap();
    assert!(store.get("drop").unwrap().variables.is_empty());
}

#[test]
fn preservation_is_opt_in() {
    let sample = worked_sample();
    let lib = builtin_library();
    let store = learn_from_trace(&sample, &lib, &LearnConfig::default()).unwrap();
    assert!(!store.get("move_forward").unwrap().variables.contains_key("obj_num"));
    let cfg = LearnConfig {
        learn_preservation: true,
        ..LearnConfig::default()
    };
    let store = learn_from_trace(&sample, &lib, &cfg).unwrap();
    let th = store.get("move_forward").unwrap();
    for var in ["obj_num", "obj_grab", "obj_pos", "r_dir"] {
        assert_eq!(th.candidates(var).len(), 1, "{var}");
        assert_eq!(th.candidates(var)[0].relation, "preserves_value");
    }
    assert!(!th.variables["r_pos"].contains("preserves_value"));
}

#[test]
fn refinement_keeps_shared_candidates() {
    let lib = builtin_library();
    let cfg = KnowledgeConfig::default();
    let theory = |y0: f64, y1: f64| {
        let (prev, next) = (snapshot(1, [9.0, y0], 90.0), snapshot(3, [9.0, y1], 90.0));
        let action = ActionRecord::new("move_forward", 2, vec![TypedValue::Dist(3.0)]);
        let eff = effect_set(2, &prev, &next, TOL, false).unwrap();
        induce_theory(
            &transition_group(&eff, &prev, &next, &action, false),
            &lib,
            &EvaluationContext::new(&prev, &next, &cfg),
        )
    };
    let a = theory(14.0, 20.0);
    let b = theory(20.0, 26.0);
    let c = theory(0.0, 9.0);
    let ab = refine_theory(&a, &b, TOL).unwrap();
    assert!(ab.variables["r_pos"].contains("travel_axis1"));
    let abc = refine_theory(&ab, &c, TOL).unwrap();
    assert!(
        !abc.variables["r_pos"].contains("travel_axis1"),
        "C=3 conflicts with C=2"
    );
    assert!(!abc.variables["r_pos"].contains("has_new_position"));
}

#[test]
fn explains_imported_theory() {
    let src = "action_theory(move_forward, [D:dist], relation_is([[r_pos, [has_new_position([X1,Y1]:pos, D:dist, [X2,Y2]:pos)]]])).";
    let th = &import_clause_theories(src, &builtin_library()).unwrap()[0];
    assert!(explain_theory(th).contains("has_new_position([X1,Y1]:pos, D:dist, [X2,Y2]:pos)"));
}

#[test]
fn registered_relation_is_learned() {
    let mut lib = builtin_library();
    lib.load_manifest("[[relation]]\nname = \"doubles\"\nsignature = [\"num\", \"num\", \"num\"]\nbody = \"linear\"\na = 2.0\nb = 0.0\n")
        .unwrap();
    let snaps: Vec<StateSnapshot> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .enumerate()
        .map(|(i, v)| StateSnapshot::new(2 * i as i64 + 1, vec![Binding::observable("n", TypedValue::Num(*v))]))
        .collect();
    let actions = (0..3)
        .map(|i| ActionRecord::new("double", 2 * i + 2, vec![TypedValue::Num(i as f64 + 1.0)]))
        .collect();
    let sample = Sample::new(snaps, actions).unwrap();
    let store = learn_from_trace(&sample, &lib, &LearnConfig::default()).unwrap();
    let rels: Vec<&str> = store.get("double").unwrap().relations().collect();
    assert!(rels.contains(&"doubles"), "{rels:?}");
    assert!(!rels.contains(&"add_to"));
}

#[test]
fn gripper_theories() {
    let scenario = builtin_scenario("two-obstacles").unwrap();
    let script = vec![
        Command::Grab("ball".into()),
        Command::MoveForward(1.0),
        Command::Drop("ball".into()),
        Command::MoveForward(1.0),
        Command::TurnLeft(180.0 - 90.0),
        Command::MoveForward(1.0),
        Command::TurnLeft(90.0),
        Command::MoveForward(1.0),
        Command::Grab("ball".into()),
    ];
    let sample = run_script(&scenario, &script, 0).unwrap();
    let store = learn_from_trace(&sample, &builtin_library(), &LearnConfig::default()).unwrap();
    assert_eq!(store.occurrences["grab"], 2);
    assert!(store.get("grab").unwrap().variables["obj_grab"].contains("takes_hold"));
    assert!(store.get("drop").unwrap().variables["obj_grab"].contains("releases_hold"));
}

#[test]
fn policy_uses_every_action() {
    let scenario = builtin_scenario("two-obstacles").unwrap();
    for seed in 0..20 {
        let seen: BTreeSet<ActionKind> = random_policy(&scenario, 100, seed).iter().map(Command::kind).collect();
        assert_eq!(seen.len(), 5, "seed {seed}: {seen:?}");
    }
}

#[test]
fn simulated_moves_have_length_c_times_x() {
    let scenario = builtin_scenario("two-obstacles").unwrap();
    let script = random_policy(&scenario, 300, 11);
    let sample = run_script(&scenario, &script, 11).unwrap();
    let mut moved = 0;
    for (action, prev, next) in sample.occurrences() {
        let (Some(TypedValue::Pos(p)), Some(TypedValue::Pos(q))) = (prev.get("r_pos"), next.get("r_pos")) else {
            panic!()
        };
        let d = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        match (action.name.as_str(), &action.params[0]) {
            ("move_forward", TypedValue::Dist(x)) if d > 0.0 => {
                moved += 1;
                assert!((d - 2.0 * x).abs() < 1e-9);
            }
            ("move_forward", _) => {}
            _ => assert_eq!(d, 0.0, "{} moved the robot", action.name),
        }
    }
    assert!(moved > 0);
}
