//! Learning the semantics of robot actions from observation traces.
//!
//! A trace alternates state snapshots and action records. For every action
//! the learner collects the variables that changed, tries each candidate
//! relation from a background library against them, and intersects the
//! surviving candidates across occurrences.

pub mod clause;
pub mod cli;
pub mod induction;
pub mod knowledge;
pub mod simulator;
pub mod theory_file;
pub mod trace;
pub mod types;

pub use induction::{
    effect_set, explain_theory, induce_theory, learn_from_trace, refine_theory, transition_group, ActionTheory,
    Candidate, EffectSet, InductionError, LearnConfig, TheoryStore, TransitionGroup, TransitionTriplet,
};
pub use knowledge::{builtin_library, EvaluationContext, KnowledgeConfig, Library, RelationDef, Verdict};
pub use simulator::{random_policy, run_script, Command, Scenario, SimError, WorldState};
pub use trace::{
    adjacent_snapshots, ingest_trace, serialize_trace, ActionRecord, Binding, Sample, StateSnapshot, TraceError,
};
pub use types::{signature_match, BaseType, RelationSignature, TypeClass, TypedValue, ValueType};
