//! Background knowledge: typed, evaluable relations scanned during induction.
//!
//! Ternary relations are applied to `(before, parameter, after)`; binary ones
//! are predicates on `(before, after)`. A relation may declare free constants
//! (such as a speed factor `C`), which evaluation solves for and returns as a
//! witness.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::trace::StateSnapshot;
use crate::types::{format_number, RelationSignature, TypeError, TypedValue, ValueType, DEFAULT_TOLERANCE};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("relation `{0}` is already registered")]
    Duplicate(String),
    #[error("relation `{name}`: {reason}")]
    Invalid { name: String, reason: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Value of a solved free constant.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstantValue {
    Num(f64),
    Sym(String),
}

impl ConstantValue {
    pub fn compatible(&self, other: &ConstantValue, tol: f64) -> bool {
        match (self, other) {
            (ConstantValue::Num(a), ConstantValue::Num(b)) => (a - b).abs() <= tol,
            (ConstantValue::Sym(a), ConstantValue::Sym(b)) => a == b,
            _ => false,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            ConstantValue::Num(x) => Some(*x),
            ConstantValue::Sym(_) => None,
        }
    }
}

impl fmt::Display for ConstantValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstantValue::Num(x) => f.write_str(&format_number(*x)),
            ConstantValue::Sym(s) => f.write_str(s),
        }
    }
}

pub type ConstantBinding = BTreeMap<String, ConstantValue>;

/// Two bindings agree when they bind the same names to compatible values.
pub fn bindings_compatible(a: &ConstantBinding, b: &ConstantBinding, tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|((ka, va), (kb, vb))| ka == kb && va.compatible(vb, tol))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstantDomain {
    /// Strictly positive reals, solved in closed form.
    Positive,
    /// Any real, solved in closed form.
    Real,
    /// A finite candidate set, solved by search.
    Finite(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDecl {
    pub name: String,
    pub domain: ConstantDomain,
}

impl ConstantDecl {
    pub fn new(name: &str, domain: ConstantDomain) -> Self {
        ConstantDecl {
            name: name.to_string(),
            domain,
        }
    }

    pub fn admits(&self, v: &ConstantValue) -> bool {
        match (&self.domain, v) {
            (ConstantDomain::Positive, ConstantValue::Num(x)) => *x > 0.0 && x.is_finite(),
            (ConstantDomain::Real, ConstantValue::Num(x)) => x.is_finite(),
            (ConstantDomain::Finite(xs), ConstantValue::Num(x)) => xs.contains(x),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    NotEntailed,
    /// More than one constant assignment proves the body.
    Ambiguous(String),
    ZeroDivisor,
    /// An argument's payload is not of a kind the body handles.
    KindMismatch,
    /// A context observable the body needs is absent or unusable.
    Context(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Accept(ConstantBinding),
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept(_))
    }

    fn accept() -> Verdict {
        Verdict::Accept(ConstantBinding::new())
    }

    fn check(ok: bool) -> Verdict {
        if ok {
            Verdict::accept()
        } else {
            Verdict::Reject(RejectReason::NotEntailed)
        }
    }
}

/// Settings shared by every evaluation in one learning session.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeConfig {
    pub tolerance: f64,
    /// Observable holding the robot's heading (an `angl`).
    pub heading_var: String,
    /// Observable holding the robot's position (a `pos`).
    pub position_var: String,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        KnowledgeConfig {
            tolerance: DEFAULT_TOLERANCE,
            heading_var: "r_dir".into(),
            position_var: "r_pos".into(),
        }
    }
}

/// Read-only view of the snapshots bracketing one action.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationContext<'a> {
    pub prior: &'a StateSnapshot,
    pub posterior: &'a StateSnapshot,
    pub config: &'a KnowledgeConfig,
}

impl<'a> EvaluationContext<'a> {
    pub fn new(prior: &'a StateSnapshot, posterior: &'a StateSnapshot, config: &'a KnowledgeConfig) -> Self {
        EvaluationContext {
            prior,
            posterior,
            config,
        }
    }

    pub fn tol(&self) -> f64 {
        self.config.tolerance
    }

    fn heading(&self, snap: &StateSnapshot) -> Option<f64> {
        match snap.get(&self.config.heading_var) {
            Some(TypedValue::Angl(a)) => Some(*a),
            _ => None,
        }
    }
}

/// User-supplied evaluator: `(args, context, fixed constants)`.
pub type EvaluatorFn = dyn Fn(&[TypedValue], &EvaluationContext<'_>, Option<&ConstantBinding>) -> Verdict + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    AddTo,
    SubFrom,
    MultBy,
    DivBy,
    GreaterThan,
    LessThan,
    Equals,
    LeftOf,
    Dist,
    HasNewPosition,
    TravelAxis(usize),
    ChangeInOrientation,
    RotateBy,
    PreservesValue,
    TakesHold,
    ReleasesHold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Lt,
    Gt,
    Ne,
}

/// Bodies available to relation manifests.
#[derive(Debug, Clone, PartialEq)]
pub enum Template {
    /// `after = a·before + b·param`
    Linear { a: f64, b: f64 },
    /// `after = before + C·param`, `C` solved per instance.
    AffineWithConstant,
    /// `after = param`
    Equality,
    /// `before <op> after`
    Inequality(Comparison),
    /// `before = after`
    Preservation,
}

#[derive(Clone)]
pub enum Body {
    Builtin(Builtin),
    Template(Template),
    Custom(Arc<EvaluatorFn>),
}

impl fmt::Debug for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Body::Builtin(b) => write!(f, "Builtin({b:?})"),
            Body::Template(t) => write!(f, "Template({t:?})"),
            Body::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelationDef {
    pub signature: RelationSignature,
    pub free_constants: Vec<ConstantDecl>,
    pub body: Body,
}

fn ty(s: &str) -> ValueType {
    s.parse().expect("builtin type names are valid")
}

fn sig(name: &str, types: &[&str]) -> RelationSignature {
    RelationSignature::new(name, types.iter().map(|t| ty(t)).collect())
}

impl RelationDef {
    pub fn name(&self) -> &str {
        &self.signature.name
    }

    pub fn builtin(b: Builtin) -> RelationDef {
        let c_pos = || vec![ConstantDecl::new("C", ConstantDomain::Positive)];
        let (signature, free_constants) = match b {
            Builtin::AddTo => (sig("add_to", &["num", "num", "num"]), vec![]),
            Builtin::SubFrom => (sig("sub_from", &["num", "num", "num"]), vec![]),
            Builtin::MultBy => (sig("mult_by", &["num", "num", "num"]), vec![]),
            Builtin::DivBy => (sig("div_by", &["num", "num", "num"]), vec![]),
            Builtin::GreaterThan => (sig("greater_than", &["comp", "comp"]), vec![]),
            Builtin::LessThan => (sig("less_than", &["comp", "comp"]), vec![]),
            Builtin::Equals => (sig("equals", &["comp", "comp"]), vec![]),
            Builtin::LeftOf => (sig("left_of", &["pos", "pos"]), vec![]),
            Builtin::Dist => (sig("dist", &["pos", "pos", "dist"]), vec![]),
            Builtin::HasNewPosition => (sig("has_new_position", &["pos", "dist", "pos"]), c_pos()),
            Builtin::TravelAxis(axis) => (sig(&format!("travel_axis{axis}"), &["pos", "dist", "pos"]), c_pos()),
            Builtin::ChangeInOrientation => (sig("change_in_orientation", &["spatial", "angl", "spatial"]), vec![]),
            Builtin::RotateBy => (
                sig("rotate_by", &["angl", "angl", "angl"]),
                vec![ConstantDecl::new("Z", ConstantDomain::Finite(vec![-1.0, 1.0]))],
            ),
            Builtin::PreservesValue => (sig("preserves_value", &["any", "any", "any"]), vec![]),
            Builtin::TakesHold => (sig("takes_hold", &["obj*bool", "obj", "obj*bool"]), vec![]),
            Builtin::ReleasesHold => (sig("releases_hold", &["obj*bool", "obj", "obj*bool"]), vec![]),
        };
        RelationDef {
            signature,
            free_constants,
            body: Body::Builtin(b),
        }
    }

    pub fn from_template(
        name: &str,
        arg_types: Vec<ValueType>,
        template: Template,
    ) -> Result<RelationDef, KnowledgeError> {
        let invalid = |reason: &str| KnowledgeError::Invalid {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        let arity_ok = match template {
            Template::Linear { .. } | Template::AffineWithConstant | Template::Equality => arg_types.len() == 3,
            Template::Inequality(_) => arg_types.len() == 2,
            Template::Preservation => matches!(arg_types.len(), 2 | 3),
        };
        if !arity_ok {
            return Err(invalid("signature arity does not fit the body template"));
        }
        validate_signature(name, &arg_types)?;
        let free_constants = match template {
            Template::AffineWithConstant => vec![ConstantDecl::new("C", ConstantDomain::Real)],
            _ => vec![],
        };
        Ok(RelationDef {
            signature: RelationSignature::new(name, arg_types),
            free_constants,
            body: Body::Template(template),
        })
    }

    pub fn custom<F>(
        name: &str,
        arg_types: Vec<ValueType>,
        free_constants: Vec<ConstantDecl>,
        f: F,
    ) -> Result<RelationDef, KnowledgeError>
    where
        F: Fn(&[TypedValue], &EvaluationContext<'_>, Option<&ConstantBinding>) -> Verdict + Send + Sync + 'static,
    {
        validate_signature(name, &arg_types)?;
        Ok(RelationDef {
            signature: RelationSignature::new(name, arg_types),
            free_constants,
            body: Body::Custom(Arc::new(f)),
        })
    }

    /// Decides the relation on `args`, solving free constants.
    pub fn evaluate(&self, args: &[TypedValue], ctx: &EvaluationContext<'_>) -> Verdict {
        self.run(args, ctx, None)
    }

    /// Decides the relation with free constants fixed to `constants`.
    pub fn evaluate_fixed(
        &self,
        args: &[TypedValue],
        ctx: &EvaluationContext<'_>,
        constants: &ConstantBinding,
    ) -> Verdict {
        self.run(args, ctx, Some(constants))
    }

    fn run(&self, args: &[TypedValue], ctx: &EvaluationContext<'_>, fixed: Option<&ConstantBinding>) -> Verdict {
        if args.len() != self.signature.arity() {
            return Verdict::Reject(RejectReason::KindMismatch);
        }
        if let Some(fixed) = fixed {
            let declared = fixed.keys().all(|k| self.free_constants.iter().any(|c| &c.name == k));
            if !declared {
                return Verdict::Reject(RejectReason::NotEntailed);
            }
        }
        let verdict = match &self.body {
            Body::Builtin(b) => eval_builtin(*b, args, ctx, fixed),
            Body::Template(t) => eval_template(t, args, ctx, fixed),
            Body::Custom(f) => f(args, ctx, fixed),
        };
        // witnesses must lie in their declared domains
        match verdict {
            Verdict::Accept(binding) => {
                let in_domain = binding.iter().all(|(k, v)| {
                    self.free_constants
                        .iter()
                        .find(|c| &c.name == k)
                        .is_some_and(|c| c.admits(v))
                });
                if in_domain {
                    Verdict::Accept(binding)
                } else {
                    Verdict::Reject(RejectReason::NotEntailed)
                }
            }
            r => r,
        }
    }
}

fn validate_signature(name: &str, arg_types: &[ValueType]) -> Result<(), KnowledgeError> {
    if !crate::types::is_identifier(name) {
        return Err(KnowledgeError::Invalid {
            name: name.to_string(),
            reason: "name must be an identifier".into(),
        });
    }
    if !matches!(arg_types.len(), 2 | 3) {
        return Err(KnowledgeError::Invalid {
            name: name.to_string(),
            reason: format!("arity {} not supported, expected 2 or 3", arg_types.len()),
        });
    }
    Ok(())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

fn fixed_num(fixed: Option<&ConstantBinding>, name: &str) -> Option<Option<f64>> {
    fixed.map(|f| f.get(name).and_then(ConstantValue::as_num))
}

fn one(name: &str, v: f64) -> ConstantBinding {
    let mut b = ConstantBinding::new();
    b.insert(name.to_string(), ConstantValue::Num(v));
    b
}

fn scalars3(args: &[TypedValue]) -> Option<(f64, f64, f64)> {
    Some((args[0].as_scalar()?, args[1].as_scalar()?, args[2].as_scalar()?))
}

/// Solves `delta = C · d` for a strictly positive `C`, or checks a fixed one.
fn solve_speed(delta: f64, d: f64, tol: f64, fixed: Option<Option<f64>>) -> Verdict {
    if delta.abs() <= tol {
        return Verdict::Reject(RejectReason::NotEntailed);
    }
    if d == 0.0 {
        return Verdict::Reject(RejectReason::ZeroDivisor);
    }
    match fixed {
        Some(Some(c)) => {
            if c > 0.0 && close(delta, c * d, tol) {
                Verdict::Accept(one("C", c))
            } else {
                Verdict::Reject(RejectReason::NotEntailed)
            }
        }
        Some(None) => Verdict::Reject(RejectReason::NotEntailed),
        None => {
            let c = delta / d;
            if c > 0.0 && c.is_finite() {
                Verdict::Accept(one("C", c))
            } else {
                Verdict::Reject(RejectReason::NotEntailed)
            }
        }
    }
}

/// West/East sign of a heading: East (90°) is +1, West (270°) is −1.
pub fn orientation_we(heading: f64, tol: f64) -> Option<f64> {
    if close(heading, 90.0, tol) {
        Some(1.0)
    } else if close(heading, 270.0, tol) {
        Some(-1.0)
    } else {
        None
    }
}

fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn compare(a: &TypedValue, b: &TypedValue) -> Option<std::cmp::Ordering> {
    match (a, b) {
        (TypedValue::Obj(x), TypedValue::Obj(y)) => Some(x.cmp(y)),
        _ => match (a.base_type(), b.base_type()) {
            (Some(ta), Some(tb)) if ta == tb => a.as_scalar()?.partial_cmp(&b.as_scalar()?),
            _ => None,
        },
    }
}

fn eval_builtin(
    b: Builtin,
    args: &[TypedValue],
    ctx: &EvaluationContext<'_>,
    fixed: Option<&ConstantBinding>,
) -> Verdict {
    let tol = ctx.tol();
    let mismatch = Verdict::Reject(RejectReason::KindMismatch);
    match b {
        Builtin::AddTo | Builtin::SubFrom | Builtin::MultBy | Builtin::DivBy => {
            let Some((x, y, z)) = scalars3(args) else {
                return mismatch;
            };
            let expected = match b {
                Builtin::AddTo => x + y,
                Builtin::SubFrom => x - y,
                Builtin::MultBy => x * y,
                _ => {
                    if y == 0.0 {
                        return Verdict::Reject(RejectReason::ZeroDivisor);
                    }
                    x / y
                }
            };
            Verdict::check(close(z, expected, tol))
        }
        Builtin::GreaterThan | Builtin::LessThan | Builtin::Equals => {
            let (a, c) = (&args[0], &args[1]);
            if let (Some(x), Some(y)) = (a.as_scalar(), c.as_scalar()) {
                if a.base_type() != c.base_type() {
                    return mismatch;
                }
                return Verdict::check(match b {
                    Builtin::GreaterThan => x - y > tol,
                    Builtin::LessThan => y - x > tol,
                    _ => close(x, y, tol),
                });
            }
            let Some(ord) = compare(a, c) else { return mismatch };
            Verdict::check(match b {
                Builtin::GreaterThan => ord.is_gt(),
                Builtin::LessThan => ord.is_lt(),
                _ => ord.is_eq(),
            })
        }
        Builtin::LeftOf => {
            let (Some(p), Some(q)) = (args[0].as_pos(), args[1].as_pos()) else {
                return mismatch;
            };
            Verdict::check(q[0] - p[0] > tol)
        }
        Builtin::Dist => {
            let (Some(p), Some(q)) = (args[0].as_pos(), args[1].as_pos()) else {
                return mismatch;
            };
            let Some(d) = args[2].as_scalar() else { return mismatch };
            match euclidean_distance(p, q) {
                Some(e) => Verdict::check(close(e, d, tol)),
                None => mismatch,
            }
        }
        Builtin::HasNewPosition => {
            let (Some(p), Some(q)) = (args[0].as_pos(), args[2].as_pos()) else {
                return mismatch;
            };
            let Some(d) = args[1].as_scalar() else { return mismatch };
            let Some(disp) = euclidean_distance(p, q) else {
                return mismatch;
            };
            solve_speed(disp, d, tol, fixed_num(fixed, "C"))
        }
        Builtin::TravelAxis(axis) => {
            let (Some(p), Some(q)) = (args[0].as_pos(), args[2].as_pos()) else {
                return mismatch;
            };
            let Some(d) = args[1].as_scalar() else { return mismatch };
            if p.len() != q.len() || axis >= p.len() {
                return mismatch;
            }
            let others_fixed = (0..p.len()).filter(|&j| j != axis).all(|j| close(p[j], q[j], tol));
            if !others_fixed {
                return Verdict::Reject(RejectReason::NotEntailed);
            }
            let Some(heading) = ctx.heading(ctx.prior) else {
                return Verdict::Reject(RejectReason::Context(format!(
                    "no heading `{}`",
                    ctx.config.heading_var
                )));
            };
            let Some(z) = orientation_we(heading, tol) else {
                return Verdict::Reject(RejectReason::Context(format!(
                    "heading {heading} is neither East nor West"
                )));
            };
            solve_speed(q[axis] - p[axis], z * d, tol, fixed_num(fixed, "C"))
        }
        Builtin::ChangeInOrientation => {
            let (Some(h0), Some(h1)) = (ctx.heading(ctx.prior), ctx.heading(ctx.posterior)) else {
                return Verdict::Reject(RejectReason::Context(format!(
                    "no heading `{}`",
                    ctx.config.heading_var
                )));
            };
            let pos_var = &ctx.config.position_var;
            let (Some(p0), Some(p1)) = (ctx.prior.get(pos_var), ctx.posterior.get(pos_var)) else {
                return Verdict::Reject(RejectReason::Context(format!("no position `{pos_var}`")));
            };
            if close(h0, h1, tol) || !p0.approx_eq(p1, tol) {
                return Verdict::Reject(RejectReason::NotEntailed);
            }
            match (&args[0], &args[2]) {
                (TypedValue::Pos(_), TypedValue::Pos(_)) => Verdict::check(args[0].approx_eq(&args[2], tol)),
                (TypedValue::Angl(a), TypedValue::Angl(c)) => Verdict::check(!close(*a, *c, tol)),
                _ => mismatch,
            }
        }
        Builtin::RotateBy => {
            let Some((x, g, y)) = scalars3(args) else {
                return mismatch;
            };
            let fits = |z: f64| angular_gap(x + z * g, y) <= tol;
            match fixed_num(fixed, "Z") {
                Some(Some(z)) => {
                    if fits(z) {
                        Verdict::Accept(one("Z", z))
                    } else {
                        Verdict::Reject(RejectReason::NotEntailed)
                    }
                }
                Some(None) => Verdict::Reject(RejectReason::NotEntailed),
                None => {
                    let hits: Vec<f64> = [-1.0, 1.0].into_iter().filter(|z| fits(*z)).collect();
                    match hits.as_slice() {
                        [z] => Verdict::Accept(one("Z", *z)),
                        [] => Verdict::Reject(RejectReason::NotEntailed),
                        _ => Verdict::Reject(RejectReason::Ambiguous("Z = -1 and Z = +1 both fit".into())),
                    }
                }
            }
        }
        Builtin::PreservesValue => Verdict::check(args[0].approx_eq(&args[args.len() - 1], tol)),
        Builtin::TakesHold | Builtin::ReleasesHold => {
            let (TypedValue::Product(before), TypedValue::Obj(o), TypedValue::Product(after)) =
                (&args[0], &args[1], &args[2])
            else {
                return mismatch;
            };
            let grip = |v: &[TypedValue]| match v {
                [TypedValue::Obj(s), TypedValue::Bool(h)] => Some((s.clone(), *h)),
                _ => None,
            };
            let (Some((s0, h0)), Some((s1, h1))) = (grip(before), grip(after)) else {
                return mismatch;
            };
            Verdict::check(if b == Builtin::TakesHold {
                !h0 && h1 && &s1 == o
            } else {
                h0 && !h1 && &s0 == o
            })
        }
    }
}

fn eval_template(
    t: &Template,
    args: &[TypedValue],
    ctx: &EvaluationContext<'_>,
    fixed: Option<&ConstantBinding>,
) -> Verdict {
    let tol = ctx.tol();
    let mismatch = Verdict::Reject(RejectReason::KindMismatch);
    match t {
        Template::Linear { a, b } => {
            let Some((x, p, y)) = scalars3(args) else {
                return mismatch;
            };
            Verdict::check(close(y, a * x + b * p, tol))
        }
        Template::AffineWithConstant => {
            let Some((x, p, y)) = scalars3(args) else {
                return mismatch;
            };
            match fixed_num(fixed, "C") {
                Some(Some(c)) => {
                    if close(y, x + c * p, tol) {
                        Verdict::Accept(one("C", c))
                    } else {
                        Verdict::Reject(RejectReason::NotEntailed)
                    }
                }
                Some(None) => Verdict::Reject(RejectReason::NotEntailed),
                None if p == 0.0 => {
                    if close(x, y, tol) {
                        Verdict::Reject(RejectReason::Ambiguous("any C fits a zero parameter".into()))
                    } else {
                        Verdict::Reject(RejectReason::ZeroDivisor)
                    }
                }
                None => Verdict::Accept(one("C", (y - x) / p)),
            }
        }
        Template::Equality => match (args[1].as_scalar(), args[2].as_scalar()) {
            (Some(p), Some(y)) => Verdict::check(close(p, y, tol)),
            _ => Verdict::check(args[1].approx_eq(&args[2], tol)),
        },
        Template::Inequality(op) => {
            let (Some(x), Some(y)) = (args[0].as_scalar(), args[1].as_scalar()) else {
                return mismatch;
            };
            Verdict::check(match op {
                Comparison::Lt => y - x > tol,
                Comparison::Gt => x - y > tol,
                Comparison::Ne => !close(x, y, tol),
            })
        }
        Template::Preservation => Verdict::check(args[0].approx_eq(&args[args.len() - 1], tol)),
    }
}

/// The relation library, iterated in name order.
#[derive(Debug, Clone, Default)]
pub struct Library {
    relations: BTreeMap<String, RelationDef>,
}

impl Library {
    pub fn empty() -> Self {
        Library::default()
    }

    pub fn register(&mut self, rel: RelationDef) -> Result<(), KnowledgeError> {
        let name = rel.name().to_string();
        if self.relations.contains_key(&name) {
            return Err(KnowledgeError::Duplicate(name));
        }
        self.relations.insert(name, rel);
        Ok(())
    }

    pub fn with(mut self, rel: RelationDef) -> Result<Self, KnowledgeError> {
        self.register(rel)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&RelationDef> {
        self.relations.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationDef> {
        self.relations.values()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Registers every relation declared in a manifest.
    pub fn load_manifest(&mut self, text: &str) -> Result<usize, KnowledgeError> {
        let defs = parse_manifest(text)?;
        let n = defs.len();
        for d in defs {
            self.register(d)?;
        }
        Ok(n)
    }

    pub fn load_manifest_file(&mut self, path: &Path) -> Result<usize, KnowledgeError> {
        let text = std::fs::read_to_string(path)?;
        self.load_manifest(&text)
    }
}

pub const BUILTINS: &[Builtin] = &[
    Builtin::AddTo,
    Builtin::SubFrom,
    Builtin::MultBy,
    Builtin::DivBy,
    Builtin::GreaterThan,
    Builtin::LessThan,
    Builtin::Equals,
    Builtin::LeftOf,
    Builtin::Dist,
    Builtin::HasNewPosition,
    Builtin::TravelAxis(0),
    Builtin::TravelAxis(1),
    Builtin::ChangeInOrientation,
    Builtin::RotateBy,
    Builtin::PreservesValue,
    Builtin::TakesHold,
    Builtin::ReleasesHold,
];

/// The compiled-in relation library.
pub fn builtin_library() -> Library {
    let mut lib = Library::empty();
    for b in BUILTINS {
        lib.register(RelationDef::builtin(*b))
            .expect("builtin names are distinct");
    }
    lib
}

/// Names of relations that describe a change of position.
pub fn is_position_changing(name: &str) -> bool {
    name == "has_new_position" || name.starts_with("travel_axis")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    #[serde(default)]
    relation: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    name: String,
    signature: Vec<String>,
    body: String,
    a: Option<f64>,
    b: Option<f64>,
    op: Option<Comparison>,
}

/// Parses a TOML relation manifest:
///
/// ```toml
/// [[relation]]
/// name = "double_up"
/// signature = ["num", "num", "num"]
/// body = "linear"      # linear | affine_const | equality | inequality | preservation
/// a = 2.0
/// b = 0.0
/// ```
pub fn parse_manifest(text: &str) -> Result<Vec<RelationDef>, KnowledgeError> {
    let file: ManifestFile = toml::from_str(text).map_err(|e| KnowledgeError::Manifest(e.to_string()))?;
    file.relation
        .into_iter()
        .map(|e| {
            let types = e
                .signature
                .iter()
                .map(|t| t.parse::<ValueType>())
                .collect::<Result<Vec<_>, _>>()?;
            let template = match e.body.as_str() {
                "linear" => Template::Linear {
                    a: e.a.unwrap_or(1.0),
                    b: e.b.unwrap_or(1.0),
                },
                "affine_const" => Template::AffineWithConstant,
                "equality" => Template::Equality,
                "inequality" => Template::Inequality(e.op.ok_or_else(|| {
                    KnowledgeError::Manifest(format!("relation `{}`: inequality needs `op`", e.name))
                })?),
                "preservation" => Template::Preservation,
                other => {
                    return Err(KnowledgeError::Manifest(format!(
                        "relation `{}`: unknown body template `{other}`",
                        e.name
                    )))
                }
            };
            RelationDef::from_template(&e.name, types, template)
        })
        .collect()
}
