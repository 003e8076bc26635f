#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use actsem::induction::{effect_set, transition_group, TransitionGroup};
use actsem::knowledge::{ConstantValue, Library, RelationDef, BUILTINS};
use actsem::trace::{ActionRecord, Binding, Sample, StateSnapshot};
use actsem::types::{BaseType, TypedValue, ValueType};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;

pub fn snapshot(t: i64, pos: [f64; 2], heading: f64) -> StateSnapshot {
    StateSnapshot::new(
        t,
        vec![
            Binding::observable("r_pos", TypedValue::Pos(pos.to_vec())),
            Binding::observable("r_dir", TypedValue::Angl(heading)),
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

/// Robot at [9,14] facing East moves forward 3 and ends at [9,20].
pub fn worked_sample() -> Sample {
    Sample::new(
        vec![snapshot(31, [9.0, 14.0], 90.0), snapshot(33, [9.0, 20.0], 90.0)],
        vec![ActionRecord::new("move_forward", 32, vec![TypedValue::Dist(3.0)])],
    )
    .unwrap()
}

fn small(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.6) {
        rng.gen_range(-10..=10) as f64
    } else {
        (rng.gen_range(-1000.0..1000.0f64) * 100.0).round() / 100.0
    }
}

pub fn random_base(rng: &mut ChaCha8Rng, ty: BaseType, dim: usize) -> TypedValue {
    match ty {
        BaseType::Num => TypedValue::Num(small(rng)),
        BaseType::Dist => TypedValue::Dist(small(rng).abs()),
        BaseType::Angl => {
            TypedValue::Angl([0.0, 45.0, 90.0, 180.0, 270.0, rng.gen_range(0.0..360.0)][rng.gen_range(0..6)])
        }
        BaseType::Pos => TypedValue::Pos((0..dim).map(|_| small(rng)).collect()),
        BaseType::Bool => TypedValue::Bool(rng.gen()),
        BaseType::Obj => TypedValue::Obj(["none", "ball", "cube", "obst"][rng.gen_range(0..4)].into()),
    }
}

pub fn random_type(rng: &mut ChaCha8Rng) -> ValueType {
    match rng.gen_range(0..8) {
        0..=5 => ValueType::Base(BaseType::ALL[rng.gen_range(0..6)]),
        6 => ValueType::Product(vec![BaseType::Obj, BaseType::Pos]),
        _ => ValueType::Product(vec![BaseType::Obj, BaseType::Bool]),
    }
}

pub fn random_value(rng: &mut ChaCha8Rng, ty: &ValueType, dim: usize) -> TypedValue {
    match ty {
        ValueType::Base(b) => random_base(rng, *b, dim),
        ValueType::Product(parts) => TypedValue::Product(parts.iter().map(|b| random_base(rng, *b, dim)).collect()),
        _ => unreachable!("only value types are generated"),
    }
}

/// A value that differs from `v`, equals it, or is within tolerance of it.
pub fn perturb(rng: &mut ChaCha8Rng, v: &TypedValue, dim: usize) -> TypedValue {
    match rng.gen_range(0..4) {
        0 => v.clone(),
        1 => nudge(rng, v),
        _ => random_value(rng, &v.value_type(), dim),
    }
}

fn nudge(rng: &mut ChaCha8Rng, v: &TypedValue) -> TypedValue {
    let eps = |rng: &mut ChaCha8Rng| rng.gen_range(-0.4e-9..0.4e-9);
    match v {
        TypedValue::Num(x) => TypedValue::Num(x + eps(rng)),
        TypedValue::Dist(x) => TypedValue::Dist((x + eps(rng)).abs()),
        TypedValue::Angl(x) => TypedValue::Angl(if *x > 1.0 { x + eps(rng) } else { *x }),
        TypedValue::Pos(c) => TypedValue::Pos(c.iter().map(|x| x + eps(rng)).collect()),
        TypedValue::Product(parts) => TypedValue::Product(parts.iter().map(|p| nudge(rng, p)).collect()),
        other => other.clone(),
    }
}

/// Two snapshots with a shared random schema.
pub fn random_snapshot_pair(rng: &mut ChaCha8Rng) -> (StateSnapshot, StateSnapshot) {
    let dim = if rng.gen_bool(0.8) { 2 } else { 3 };
    let n = rng.gen_range(1..=8);
    let mut prev = Vec::new();
    let mut next = Vec::new();
    for i in 0..n {
        let ty = random_type(rng);
        let before = random_value(rng, &ty, dim);
        let after = perturb(rng, &before, dim);
        let name = format!("v{i}");
        let internal = rng.gen_bool(0.2);
        let mk = |v: TypedValue| {
            if internal {
                Binding::internal(name.clone(), v)
            } else {
                Binding::observable(name.clone(), v)
            }
        };
        prev.push(mk(before));
        next.push(mk(after));
    }
    (StateSnapshot::new(1, prev), StateSnapshot::new(3, next))
}

/// A random sub-library of the built-ins with at most `max` relations.
pub fn random_library(rng: &mut ChaCha8Rng, max: usize) -> Library {
    let mut all: Vec<_> = BUILTINS.to_vec();
    all.shuffle(rng);
    let n = rng.gen_range(1..=max.min(all.len()));
    let mut lib = Library::empty();
    for b in &all[..n] {
        lib.register(RelationDef::builtin(*b)).unwrap();
    }
    lib
}

fn shifted(rng: &mut ChaCha8Rng, before: &TypedValue, param: &TypedValue, dim: usize) -> TypedValue {
    match (before, param) {
        (TypedValue::Num(x), TypedValue::Num(p)) => {
            TypedValue::Num([x + p, x - p, x * p, if *p != 0.0 { x / p } else { x + 1.0 }][rng.gen_range(0..4)])
        }
        (TypedValue::Pos(c), TypedValue::Dist(d)) => {
            let mut q = c.clone();
            let axis = rng.gen_range(0..c.len());
            q[axis] += [1.0, -1.0, 2.0][rng.gen_range(0..3)] * d;
            TypedValue::Pos(q)
        }
        (TypedValue::Angl(h), TypedValue::Angl(g)) => {
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let v = (h + s * g).rem_euclid(360.0);
            TypedValue::Angl(if v >= 360.0 { 0.0 } else { v })
        }
        _ => random_value(rng, &before.value_type(), dim),
    }
}

/// A random transition group with at most 20 triplets, plus its bracketing snapshots.
pub fn random_group(rng: &mut ChaCha8Rng) -> (TransitionGroup, StateSnapshot, StateSnapshot) {
    let dim = 2;
    let k = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=20 / k - 2);
    let params: Vec<TypedValue> = (0..k)
        .map(|_| {
            let ty = [BaseType::Num, BaseType::Dist, BaseType::Angl, BaseType::Obj][rng.gen_range(0..4)];
            random_base(rng, ty, dim)
        })
        .collect();
    let heading = [0.0, 90.0, 180.0, 270.0][rng.gen_range(0..4)];
    let mut prev = vec![
        Binding::observable("r_dir", TypedValue::Angl(heading)),
        Binding::observable("r_pos", TypedValue::Pos(vec![small(rng), small(rng)])),
    ];
    let mut next = prev.clone();
    if rng.gen_bool(0.5) {
        let turned = (heading + 90.0) % 360.0;
        next[0].value = TypedValue::Angl(turned);
    }
    if rng.gen_bool(0.5) {
        next[1].value = random_base(rng, BaseType::Pos, dim);
    }
    for i in 0..m {
        let ty = match rng.gen_range(0..5) {
            0 => ValueType::Base(BaseType::Num),
            1 => ValueType::Base(BaseType::Pos),
            2 => ValueType::Base(BaseType::Angl),
            _ => random_type(rng),
        };
        let before = random_value(rng, &ty, dim);
        let param = &params[rng.gen_range(0..k)];
        let mut after = if rng.gen_bool(0.7) {
            shifted(rng, &before, param, dim)
        } else {
            random_value(rng, &ty, dim)
        };
        if after.approx_eq(&before, TOL) {
            after = match &before {
                TypedValue::Bool(b) => TypedValue::Bool(!b),
                TypedValue::Obj(o) => TypedValue::Obj(format!("{o}x")),
                TypedValue::Num(x) => TypedValue::Num(x + 1.0),
                TypedValue::Dist(x) => TypedValue::Dist(x + 1.0),
                TypedValue::Angl(x) => TypedValue::Angl((x + 1.0) % 360.0),
                TypedValue::Pos(c) => TypedValue::Pos(c.iter().map(|x| x + 1.0).collect()),
                TypedValue::Product(p) => TypedValue::Product(vec![TypedValue::Obj("moved".into()), p[1].clone()]),
            };
        }
        prev.push(Binding::observable(format!("v{i}"), before));
        next.push(Binding::observable(format!("v{i}"), after));
    }
    let prev = StateSnapshot::new(1, prev);
    let next = StateSnapshot::new(3, next);
    let action = ActionRecord::new("act", 2, params);
    let eff = effect_set(2, &prev, &next, TOL, false).unwrap();
    let group = transition_group(&eff, &prev, &next, &action, false);
    (group, prev, next)
}

/// Candidate identity used by the brute-force oracles.
pub type CandidateKey = (String, Option<usize>, String);

pub fn key(relation: &str, param: Option<usize>, constants: &BTreeMap<String, ConstantValue>) -> CandidateKey {
    let consts: Vec<String> = constants.iter().map(|(k, v)| format!("{k}={v}")).collect();
    (relation.to_string(), param, consts.join(","))
}

pub fn theory_keys(th: &actsem::induction::ActionTheory) -> BTreeMap<String, BTreeSet<CandidateKey>> {
    th.variables
        .iter()
        .map(|(v, vc)| {
            (
                v.clone(),
                vc.candidates
                    .iter()
                    .map(|c| key(&c.relation, c.param_index, &c.constants))
                    .collect(),
            )
        })
        .collect()
}

fn slot_accepts(value: &ValueType, slot: &ValueType) -> bool {
    match (slot, value) {
        (ValueType::Any, _) => true,
        (ValueType::Class(c), ValueType::Base(b)) => c.members().contains(b),
        (ValueType::Class(_), _) => false,
        _ => slot == value,
    }
}

/// Double loop over (triplet, relation) with its own type filter.
pub fn oracle_induce(
    group: &TransitionGroup,
    lib: &Library,
    ctx: &actsem::knowledge::EvaluationContext<'_>,
) -> BTreeMap<String, BTreeSet<CandidateKey>> {
    let mut out: BTreeMap<String, BTreeSet<CandidateKey>> = BTreeMap::new();
    for tr in &group.triplets {
        let found = out.entry(tr.variable.clone()).or_default();
        for rel in lib.iter() {
            let sig = &rel.signature.arg_types;
            let (args, param) = match sig.len() {
                3 => (
                    vec![tr.before.clone(), tr.parameter.clone(), tr.after.clone()],
                    Some(tr.param_index),
                ),
                _ => (vec![tr.before.clone(), tr.after.clone()], None),
            };
            let typed = args.iter().zip(sig).all(|(a, s)| slot_accepts(&a.value_type(), s));
            if !typed {
                continue;
            }
            if let actsem::knowledge::Verdict::Accept(c) = rel.evaluate(&args, ctx) {
                found.insert(key(rel.name(), param, &c));
            }
        }
    }
    out
}

fn same_value(a: &TypedValue, b: &TypedValue, tol: f64) -> bool {
    match (a, b) {
        (TypedValue::Num(x), TypedValue::Num(y))
        | (TypedValue::Dist(x), TypedValue::Dist(y))
        | (TypedValue::Angl(x), TypedValue::Angl(y)) => (x - y).abs() <= tol,
        (TypedValue::Pos(x), TypedValue::Pos(y)) => {
            x.len() == y.len() && (0..x.len()).all(|i| (x[i] - y[i]).abs() <= tol)
        }
        (TypedValue::Bool(x), TypedValue::Bool(y)) => x == y,
        (TypedValue::Obj(x), TypedValue::Obj(y)) => x == y,
        (TypedValue::Product(x), TypedValue::Product(y)) => {
            x.len() == y.len() && (0..x.len()).all(|i| same_value(&x[i], &y[i], tol))
        }
        _ => false,
    }
}

/// Names of observable variables whose values differ, field by field.
pub fn oracle_effects(prev: &StateSnapshot, next: &StateSnapshot, tol: f64) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for b in &prev.bindings {
        if b.internal {
            continue;
        }
        let other = next.bindings.iter().find(|n| n.name == b.name).expect("same schema");
        if !same_value(&b.value, &other.value, tol) {
            out.insert(b.name.clone());
        }
    }
    out
}
