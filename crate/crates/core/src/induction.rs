//! The learning pipeline: effect extraction, transition groups, theory
//! induction by exhaustive typed scanning, and refinement by intersection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::knowledge::{
    bindings_compatible, ConstantBinding, ConstantValue, EvaluationContext, KnowledgeConfig, Library, Verdict,
};
use crate::trace::{ActionRecord, Sample, StateSnapshot};
use crate::types::{signature_match, BaseType, RelationSignature, TypedValue, ValueType};

#[derive(Debug, Error, PartialEq)]
pub enum InductionError {
    #[error("cannot refine theory of `{old}` with theory of `{new}`")]
    ActionMismatch { old: String, new: String },
    #[error("action `{action}` called with parameter types [{old}] and later [{new}]")]
    ParamSignatureMismatch { action: String, old: String, new: String },
    #[error("snapshots t={prev} and t={next} do not share a variable schema")]
    SchemaMismatch { prev: i64, next: i64 },
    #[error("the relation library is empty")]
    EmptyLibrary,
}

/// Knobs for one learning session.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub knowledge: KnowledgeConfig,
    /// Also test `preserves_value` on variables an action left unchanged.
    pub learn_preservation: bool,
    /// Skip occurrences whose effect set is empty (failed actions).
    pub assume_success: bool,
    /// Let internal variables take part in effect sets.
    pub include_internal: bool,
    /// Keep every per-occurrence theory in the store.
    pub record_history: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            knowledge: KnowledgeConfig::default(),
            learn_preservation: false,
            assume_success: true,
            include_internal: false,
            record_history: false,
        }
    }
}

impl LearnConfig {
    pub fn tolerance(&self) -> f64 {
        self.knowledge.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectSet {
    pub t: i64,
    pub effects: BTreeSet<String>,
    pub non_effects: BTreeSet<String>,
}

impl EffectSet {
    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }
}

/// Splits the variables of two snapshots into changed and unchanged ones.
pub fn effect_set(
    t: i64,
    prev: &StateSnapshot,
    next: &StateSnapshot,
    tol: f64,
    include_internal: bool,
) -> Result<EffectSet, InductionError> {
    if prev.schema() != next.schema() {
        return Err(InductionError::SchemaMismatch {
            prev: prev.t,
            next: next.t,
        });
    }
    let mut effects = BTreeSet::new();
    let mut non_effects = BTreeSet::new();
    for b in &prev.bindings {
        if b.internal && !include_internal {
            continue;
        }
        let after = next.get(&b.name).expect("schemas are equal");
        if b.value.approx_eq(after, tol) {
            non_effects.insert(b.name.clone());
        } else {
            effects.insert(b.name.clone());
        }
    }
    Ok(EffectSet {
        t,
        effects,
        non_effects,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTriplet {
    pub variable: String,
    pub before: TypedValue,
    pub param_index: usize,
    pub parameter: TypedValue,
    pub after: TypedValue,
}

impl TransitionTriplet {
    pub fn types(&self) -> [ValueType; 3] {
        [
            self.before.value_type(),
            self.parameter.value_type(),
            self.after.value_type(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGroup {
    pub action: String,
    pub t: i64,
    pub params: Vec<TypedValue>,
    /// One triplet per (effect variable, parameter) pair.
    pub triplets: Vec<TransitionTriplet>,
    /// Same shape over unchanged variables; filled only when preservation is learned.
    pub preserved: Vec<TransitionTriplet>,
}

impl TransitionGroup {
    pub fn param_types(&self) -> Vec<ValueType> {
        self.params.iter().map(TypedValue::value_type).collect()
    }

    fn pos_dimension(&self) -> usize {
        self.triplets
            .iter()
            .chain(&self.preserved)
            .flat_map(|t| [&t.before, &t.parameter])
            .chain(&self.params)
            .find_map(|v| v.as_pos().map(<[f64]>::len))
            .unwrap_or(2)
    }
}

fn triplets_over<'a>(
    vars: impl Iterator<Item = &'a String>,
    prev: &StateSnapshot,
    next: &StateSnapshot,
    params: &[TypedValue],
) -> Vec<TransitionTriplet> {
    let mut out = Vec::new();
    for var in vars {
        let (Some(before), Some(after)) = (prev.get(var), next.get(var)) else {
            continue;
        };
        for (i, p) in params.iter().enumerate() {
            out.push(TransitionTriplet {
                variable: var.clone(),
                before: before.clone(),
                param_index: i,
                parameter: p.clone(),
                after: after.clone(),
            });
        }
    }
    out
}

/// Pairs every effect variable with every action parameter.
pub fn transition_group(
    eff: &EffectSet,
    prev: &StateSnapshot,
    next: &StateSnapshot,
    action: &ActionRecord,
    with_preserved: bool,
) -> TransitionGroup {
    let triplets = triplets_over(eff.effects.iter(), prev, next, &action.params);
    let preserved = if with_preserved {
        triplets_over(eff.non_effects.iter(), prev, next, &action.params)
    } else {
        Vec::new()
    };
    TransitionGroup {
        action: action.name.clone(),
        t: action.t,
        params: action.params.clone(),
        triplets,
        preserved,
    }
}

/// One surviving explanation for a variable's change.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub relation: String,
    pub signature: RelationSignature,
    pub constants: ConstantBinding,
    /// `None` for predicates, which do not consume a parameter.
    pub param_index: Option<usize>,
}

impl Candidate {
    fn sort_key(&self) -> (String, Option<usize>, String) {
        let consts: Vec<String> = self.constants.iter().map(|(k, v)| format!("{k}={v}")).collect();
        (self.relation.clone(), self.param_index, consts.join(","))
    }

    pub fn same_as(&self, other: &Candidate, tol: f64) -> bool {
        self.relation == other.relation
            && self.param_index == other.param_index
            && bindings_compatible(&self.constants, &other.constants, tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableCandidates {
    pub ty: ValueType,
    pub candidates: Vec<Candidate>,
}

impl VariableCandidates {
    fn new(ty: ValueType) -> Self {
        VariableCandidates {
            ty,
            candidates: Vec::new(),
        }
    }

    fn insert(&mut self, c: Candidate, tol: f64) {
        if !self.candidates.iter().any(|x| x.same_as(&c, tol)) {
            self.candidates.push(c);
        }
    }

    fn sort(&mut self) {
        self.candidates.sort_by_key(Candidate::sort_key);
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.candidates.iter().any(|c| c.relation == relation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionTheory {
    pub action: String,
    pub param_types: Vec<ValueType>,
    /// Dimension used when rendering position patterns.
    pub pos_dimension: usize,
    pub variables: BTreeMap<String, VariableCandidates>,
}

impl ActionTheory {
    pub fn new(action: impl Into<String>, param_types: Vec<ValueType>, pos_dimension: usize) -> Self {
        ActionTheory {
            action: action.into(),
            param_types,
            pos_dimension,
            variables: BTreeMap::new(),
        }
    }

    pub fn candidates(&self, var: &str) -> &[Candidate] {
        self.variables.get(var).map(|v| v.candidates.as_slice()).unwrap_or(&[])
    }

    pub fn candidate_count(&self) -> usize {
        self.variables.values().map(|v| v.candidates.len()).sum()
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.variables
            .values()
            .flat_map(|v| v.candidates.iter().map(|c| c.relation.as_str()))
    }

    /// Is every candidate of `self` also (compatibly) present in `other`?
    pub fn is_subset_of(&self, other: &ActionTheory, tol: f64) -> bool {
        self.variables.iter().all(|(var, vc)| {
            other.variables.get(var).is_some_and(|ovc| {
                vc.candidates
                    .iter()
                    .all(|c| ovc.candidates.iter().any(|o| c.same_as(o, tol)))
            })
        })
    }

    /// Does any rendered candidate carry a position pattern?
    pub fn renders_positions(&self) -> bool {
        self.variables
            .values()
            .any(|v| v.ty == ValueType::Base(BaseType::Pos) && !v.candidates.is_empty())
    }

    /// Sorts candidates; the dimension falls back to 2 when nothing shows it.
    pub(crate) fn normalize(&mut self) {
        for v in self.variables.values_mut() {
            v.sort();
        }
        if !self.renders_positions() {
            self.pos_dimension = 2;
        }
    }
}

fn scan_triplet(
    triplet: &TransitionTriplet,
    lib: &Library,
    ctx: &EvaluationContext<'_>,
    only: Option<&str>,
    into: &mut VariableCandidates,
) {
    let types = triplet.types();
    for rel in lib.iter() {
        if only.is_some_and(|name| name != rel.name()) {
            continue;
        }
        if !signature_match(&rel.signature, &types) {
            continue;
        }
        let (args, param_index) = if rel.signature.is_predicate() {
            (vec![triplet.before.clone(), triplet.after.clone()], None)
        } else {
            (
                vec![triplet.before.clone(), triplet.parameter.clone(), triplet.after.clone()],
                Some(triplet.param_index),
            )
        };
        if let Verdict::Accept(constants) = rel.evaluate(&args, ctx) {
            into.insert(
                Candidate {
                    relation: rel.name().to_string(),
                    signature: rel.signature.clone(),
                    constants,
                    param_index,
                },
                ctx.tol(),
            );
        }
    }
}

/// Scans every relation against every triplet of the group.
///
/// Every effect variable gets an entry, possibly with no candidates.
pub fn induce_theory(group: &TransitionGroup, lib: &Library, ctx: &EvaluationContext<'_>) -> ActionTheory {
    let mut theory = ActionTheory::new(group.action.clone(), group.param_types(), group.pos_dimension());
    for triplet in &group.triplets {
        let entry = theory
            .variables
            .entry(triplet.variable.clone())
            .or_insert_with(|| VariableCandidates::new(triplet.before.value_type()));
        scan_triplet(triplet, lib, ctx, None, entry);
    }
    for triplet in &group.preserved {
        let mut found = VariableCandidates::new(triplet.before.value_type());
        scan_triplet(triplet, lib, ctx, Some(PRESERVES_VALUE), &mut found);
        if !found.candidates.is_empty() {
            let entry = theory
                .variables
                .entry(triplet.variable.clone())
                .or_insert_with(|| VariableCandidates::new(found.ty.clone()));
            for c in found.candidates {
                entry.insert(c, ctx.tol());
            }
        }
    }
    theory.normalize();
    theory
}

const PRESERVES_VALUE: &str = "preserves_value";

/// Keeps only the candidates both theories agree on.
pub fn refine_theory(old: &ActionTheory, new: &ActionTheory, tol: f64) -> Result<ActionTheory, InductionError> {
    if old.action != new.action {
        return Err(InductionError::ActionMismatch {
            old: old.action.clone(),
            new: new.action.clone(),
        });
    }
    if old.param_types != new.param_types {
        let show = |ts: &[ValueType]| ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",");
        return Err(InductionError::ParamSignatureMismatch {
            action: old.action.clone(),
            old: show(&old.param_types),
            new: show(&new.param_types),
        });
    }
    let dim = if old.renders_positions() {
        old.pos_dimension
    } else {
        new.pos_dimension
    };
    let mut out = ActionTheory::new(old.action.clone(), old.param_types.clone(), dim);
    for (var, ovc) in &old.variables {
        let Some(nvc) = new.variables.get(var) else { continue };
        if nvc.ty != ovc.ty {
            continue;
        }
        let kept = ovc
            .candidates
            .iter()
            .filter(|c| nvc.candidates.iter().any(|n| c.same_as(n, tol)))
            .cloned()
            .collect();
        out.variables.insert(
            var.clone(),
            VariableCandidates {
                ty: ovc.ty.clone(),
                candidates: kept,
            },
        );
    }
    out.normalize();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub t: i64,
    /// Theory induced from this occurrence alone.
    pub induced: ActionTheory,
    /// Stored theory after refining with `induced`.
    pub refined: ActionTheory,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoryStore {
    pub theories: BTreeMap<String, ActionTheory>,
    /// Occurrences folded into each theory.
    pub occurrences: BTreeMap<String, usize>,
    pub history: BTreeMap<String, Vec<HistoryEntry>>,
}

impl TheoryStore {
    pub fn get(&self, action: &str) -> Option<&ActionTheory> {
        self.theories.get(action)
    }

    pub fn is_empty(&self) -> bool {
        self.theories.is_empty()
    }

    /// Folds a freshly induced theory into the stored one.
    pub fn absorb(
        &mut self,
        t: i64,
        induced: ActionTheory,
        tol: f64,
        record_history: bool,
    ) -> Result<&ActionTheory, InductionError> {
        let name = induced.action.clone();
        let refined = match self.theories.get(&name) {
            Some(current) => refine_theory(current, &induced, tol)?,
            None => induced.clone(),
        };
        if record_history {
            self.history.entry(name.clone()).or_default().push(HistoryEntry {
                t,
                induced,
                refined: refined.clone(),
            });
        }
        *self.occurrences.entry(name.clone()).or_default() += 1;
        self.theories.insert(name.clone(), refined);
        Ok(&self.theories[&name])
    }
}

/// Progress notification emitted once per action occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnEvent {
    pub action: String,
    pub t: i64,
    /// `true` when the occurrence was skipped as a failed action.
    pub skipped: bool,
    /// Candidate count of the stored theory after this step.
    pub candidates: usize,
}

pub fn learn_from_trace(sample: &Sample, lib: &Library, cfg: &LearnConfig) -> Result<TheoryStore, InductionError> {
    learn_from_trace_observed(sample, lib, cfg, |_| {})
}

/// Runs the full pipeline over every action occurrence in time order.
pub fn learn_from_trace_observed(
    sample: &Sample,
    lib: &Library,
    cfg: &LearnConfig,
    mut observe: impl FnMut(&LearnEvent),
) -> Result<TheoryStore, InductionError> {
    if lib.is_empty() {
        return Err(InductionError::EmptyLibrary);
    }
    let tol = cfg.tolerance();
    let mut store = TheoryStore::default();
    for (action, prev, next) in sample.occurrences() {
        let eff = effect_set(action.t, prev, next, tol, cfg.include_internal)?;
        if cfg.assume_success && eff.is_empty() {
            observe(&LearnEvent {
                action: action.name.clone(),
                t: action.t,
                skipped: true,
                candidates: store.get(&action.name).map_or(0, ActionTheory::candidate_count),
            });
            continue;
        }
        let group = transition_group(&eff, prev, next, action, cfg.learn_preservation);
        let ctx = EvaluationContext::new(prev, next, &cfg.knowledge);
        let mut induced = induce_theory(&group, lib, &ctx);
        induced.pos_dimension = sample.pos_dimension();
        induced.normalize();
        let current = store.absorb(action.t, induced, tol, cfg.record_history)?;
        observe(&LearnEvent {
            action: action.name.clone(),
            t: action.t,
            skipped: false,
            candidates: current.candidate_count(),
        });
    }
    Ok(store)
}

fn param_letter(t: &ValueType) -> &'static str {
    match t {
        ValueType::Base(BaseType::Dist) => "D",
        ValueType::Base(BaseType::Angl) => "G",
        ValueType::Base(BaseType::Num) => "N",
        ValueType::Base(BaseType::Pos) => "P",
        ValueType::Base(BaseType::Bool) => "B",
        ValueType::Base(BaseType::Obj) => "O",
        _ => "A",
    }
}

/// Pattern variable names for an action's parameters: `D` for a single
/// distance, `D0, G1` when there are several.
pub fn param_names(param_types: &[ValueType]) -> Vec<String> {
    if param_types.len() == 1 {
        return vec![param_letter(&param_types[0]).to_string()];
    }
    param_types
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}{i}", param_letter(t)))
        .collect()
}

/// Pattern for a before (`suffix = 1`) or after (`suffix = 2`) value.
pub(crate) fn value_pattern(ty: &ValueType, dim: usize, suffix: u8) -> String {
    match ty {
        ValueType::Base(BaseType::Pos) => {
            let axes = ["X", "Y", "Z"];
            let parts: Vec<String> = axes
                .iter()
                .take(dim.clamp(2, 3))
                .map(|a| format!("{a}{suffix}"))
                .collect();
            format!("[{}]", parts.join(","))
        }
        ValueType::Product(_) => format!("V{suffix}"),
        _ => format!("X{suffix}"),
    }
}

/// `rel([X1,Y1]:pos, D:dist, [X2,Y2]:pos)` for one candidate.
pub fn candidate_term(th: &ActionTheory, var_ty: &ValueType, c: &Candidate) -> String {
    let before = format!("{}:{var_ty}", value_pattern(var_ty, th.pos_dimension, 1));
    let after = format!("{}:{var_ty}", value_pattern(var_ty, th.pos_dimension, 2));
    match c.param_index {
        Some(i) => {
            let names = param_names(&th.param_types);
            let (pname, pty) = match (names.get(i), th.param_types.get(i)) {
                (Some(n), Some(t)) => (n.clone(), t.to_string()),
                _ => (format!("A{i}"), "any".to_string()),
            };
            format!("{}({before}, {pname}:{pty}, {after})", c.relation)
        }
        None => format!("{}({before}, {after})", c.relation),
    }
}

pub(crate) fn params_pattern(param_types: &[ValueType]) -> String {
    let parts: Vec<String> = param_names(param_types)
        .iter()
        .zip(param_types)
        .map(|(n, t)| format!("{n}:{t}"))
        .collect();
    format!("[{}]", parts.join(", "))
}

/// Human-readable rendering; candidates listed in relation-name order.
/// Report form of a witness: nine decimals at most, trailing zeros dropped.
fn short_constant(v: &ConstantValue) -> String {
    match v.as_num() {
        Some(x) => {
            let s = format!("{x:.9}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" {
                "0".to_string()
            } else {
                s.to_string()
            }
        }
        None => v.to_string(),
    }
}

pub fn explain_theory(th: &ActionTheory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "action {} {}", th.action, params_pattern(&th.param_types));
    if th.candidate_count() == 0 {
        out.push_str("  no surviving candidates\n");
        if !th.variables.is_empty() {
            let vars: Vec<&str> = th.variables.keys().map(String::as_str).collect();
            let _ = writeln!(out, "  (affected without explanation: {})", vars.join(", "));
        }
        return out;
    }
    for (var, vc) in &th.variables {
        let _ = writeln!(out, "  {var} : {}", vc.ty);
        if vc.candidates.is_empty() {
            out.push_str("    (no surviving candidates)\n");
        }
        let mut cands: Vec<&Candidate> = vc.candidates.iter().collect();
        cands.sort_by_key(|c| c.sort_key());
        for c in cands {
            let _ = write!(out, "    {}", candidate_term(th, &vc.ty, c));
            if !c.constants.is_empty() {
                let consts: Vec<String> = c
                    .constants
                    .iter()
                    .map(|(k, v)| format!("{k}={}", short_constant(v)))
                    .collect();
                let _ = write!(out, " with {}", consts.join(", "));
            }
            let _ = writeln!(out, "    [{}]", c.signature);
        }
    }
    out
}
