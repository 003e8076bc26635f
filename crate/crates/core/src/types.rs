//! Base types, type classes and typed values.
//!
//! Values observed in traces always carry one of six concrete base types (or a
//! flat product of them). Type classes group base types and only appear in
//! relation signatures, where they widen what a relation will unify with.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Default absolute tolerance for numeric equality.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unknown type name `{0}`")]
    UnknownType(String),
    #[error("class type `{0}` cannot type a value")]
    ClassNotAllowed(String),
    #[error("malformed payload `{payload}` for type {ty}: {reason}")]
    Malformed {
        ty: String,
        payload: String,
        reason: String,
    },
    #[error("value out of range for {ty}: {reason}")]
    Range { ty: String, reason: String },
    #[error("missing `:` separator in typed value `{0}`")]
    MissingSeparator(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseType {
    Num,
    Pos,
    Dist,
    Angl,
    Bool,
    Obj,
}

impl BaseType {
    pub const ALL: [BaseType; 6] = [
        BaseType::Num,
        BaseType::Pos,
        BaseType::Dist,
        BaseType::Angl,
        BaseType::Bool,
        BaseType::Obj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseType::Num => "num",
            BaseType::Pos => "pos",
            BaseType::Dist => "dist",
            BaseType::Angl => "angl",
            BaseType::Bool => "bool",
            BaseType::Obj => "obj",
        }
    }

    /// Accepts the canonical names plus the aliases that show up in
    /// clause-style input (`object`, `angle`, `truthVal`).
    pub fn from_name(name: &str) -> Option<BaseType> {
        Some(match name {
            "num" => BaseType::Num,
            "pos" => BaseType::Pos,
            "dist" => BaseType::Dist,
            "angl" | "angle" => BaseType::Angl,
            "bool" | "truthVal" => BaseType::Bool,
            "obj" | "object" => BaseType::Obj,
            _ => return None,
        })
    }
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeClass {
    Arith,
    Comp,
    Spatial,
    Logic,
}

impl TypeClass {
    pub const ALL: [TypeClass; 4] = [TypeClass::Arith, TypeClass::Comp, TypeClass::Spatial, TypeClass::Logic];

    pub fn name(self) -> &'static str {
        match self {
            TypeClass::Arith => "arith",
            TypeClass::Comp => "comp",
            TypeClass::Spatial => "spatial",
            TypeClass::Logic => "logic",
        }
    }

    pub fn members(self) -> &'static [BaseType] {
        use BaseType::*;
        match self {
            TypeClass::Arith => &[Num, Pos, Dist],
            TypeClass::Comp => &[Num, Obj],
            TypeClass::Spatial => &[Pos, Dist, Angl, Obj],
            TypeClass::Logic => &[Bool, Obj],
        }
    }

    pub fn contains(self, t: BaseType) -> bool {
        self.members().contains(&t)
    }

    pub fn from_name(name: &str) -> Option<TypeClass> {
        Some(match name {
            "arith" => TypeClass::Arith,
            "comp" => TypeClass::Comp,
            "spatial" => TypeClass::Spatial,
            "logic" => TypeClass::Logic,
            _ => return None,
        })
    }
}

impl fmt::Display for TypeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A type as it appears on a value or in a relation signature.
///
/// `Class` and `Any` are signature-only; values are always `Base` or `Product`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueType {
    Base(BaseType),
    Class(TypeClass),
    /// Flat product of base types, e.g. `obj*pos`.
    Product(Vec<BaseType>),
    /// Wildcard slot, unifies with every value type.
    Any,
}

impl ValueType {
    pub fn is_value_type(&self) -> bool {
        matches!(self, ValueType::Base(_) | ValueType::Product(_))
    }
}

impl From<BaseType> for ValueType {
    fn from(b: BaseType) -> Self {
        ValueType::Base(b)
    }
}

impl From<TypeClass> for ValueType {
    fn from(c: TypeClass) -> Self {
        ValueType::Class(c)
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Base(b) => write!(f, "{b}"),
            ValueType::Class(c) => write!(f, "{c}"),
            ValueType::Any => f.write_str("any"),
            ValueType::Product(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ValueType {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "any" {
            return Ok(ValueType::Any);
        }
        if s.contains('*') {
            let parts = s
                .split('*')
                .map(|p| BaseType::from_name(p.trim()).ok_or_else(|| TypeError::UnknownType(p.trim().to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            if parts.len() < 2 {
                return Err(TypeError::UnknownType(s.to_string()));
            }
            return Ok(ValueType::Product(parts));
        }
        if let Some(b) = BaseType::from_name(s) {
            return Ok(ValueType::Base(b));
        }
        if let Some(c) = TypeClass::from_name(s) {
            return Ok(ValueType::Class(c));
        }
        Err(TypeError::UnknownType(s.to_string()))
    }
}

/// Does a value of type `t` fit a slot declared as `target`?
pub fn conforms(t: &ValueType, target: &ValueType) -> bool {
    match (t, target) {
        (_, ValueType::Any) => true,
        (a, b) if a == b => true,
        (ValueType::Base(b), ValueType::Class(c)) => c.contains(*b),
        (ValueType::Product(xs), ValueType::Product(ys)) => xs.len() == ys.len() && xs == ys,
        _ => false,
    }
}

/// A concretely typed observation or action parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum TypedValue {
    Num(f64),
    /// Two or three coordinates.
    Pos(Vec<f64>),
    Dist(f64),
    /// Degrees in `[0, 360)`.
    Angl(f64),
    Bool(bool),
    Obj(String),
    /// Components are never themselves products.
    Product(Vec<TypedValue>),
}

impl TypedValue {
    pub fn value_type(&self) -> ValueType {
        match self {
            TypedValue::Product(parts) => {
                ValueType::Product(parts.iter().map(|p| p.base_type().unwrap_or(BaseType::Obj)).collect())
            }
            other => ValueType::Base(other.base_type().expect("non-product has a base type")),
        }
    }

    pub fn base_type(&self) -> Option<BaseType> {
        Some(match self {
            TypedValue::Num(_) => BaseType::Num,
            TypedValue::Pos(_) => BaseType::Pos,
            TypedValue::Dist(_) => BaseType::Dist,
            TypedValue::Angl(_) => BaseType::Angl,
            TypedValue::Bool(_) => BaseType::Bool,
            TypedValue::Obj(_) => BaseType::Obj,
            TypedValue::Product(_) => return None,
        })
    }

    /// Scalar numeric payload of `num`, `dist` and `angl` values.
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            TypedValue::Num(x) | TypedValue::Dist(x) | TypedValue::Angl(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_pos(&self) -> Option<&[f64]> {
        match self {
            TypedValue::Pos(c) => Some(c),
            _ => None,
        }
    }

    /// Checks the payload invariants for this value's type.
    pub fn validate(&self) -> Result<(), TypeError> {
        let range = |ty: &str, reason: String| TypeError::Range {
            ty: ty.to_string(),
            reason,
        };
        match self {
            TypedValue::Num(x) | TypedValue::Dist(x) => {
                if !x.is_finite() {
                    return Err(range(self.type_name(), format!("{x} is not finite")));
                }
            }
            TypedValue::Angl(x) => {
                if !x.is_finite() || *x < 0.0 || *x >= 360.0 {
                    return Err(range("angl", format!("{x} outside 0 <= x < 360")));
                }
            }
            TypedValue::Pos(c) => {
                if c.len() != 2 && c.len() != 3 {
                    return Err(range("pos", format!("{} coordinates, expected 2 or 3", c.len())));
                }
                if c.iter().any(|x| !x.is_finite()) {
                    return Err(range("pos", "non-finite coordinate".into()));
                }
            }
            TypedValue::Bool(_) => {}
            TypedValue::Obj(s) => {
                if !is_identifier(s) {
                    return Err(range("obj", format!("`{s}` is not an identifier")));
                }
            }
            TypedValue::Product(parts) => {
                if parts.len() < 2 {
                    return Err(range("product", "needs at least two components".into()));
                }
                for p in parts {
                    if matches!(p, TypedValue::Product(_)) {
                        return Err(range("product", "nested products are not supported".into()));
                    }
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    fn type_name(&self) -> &'static str {
        self.base_type().map(BaseType::name).unwrap_or("product")
    }

    /// Equality with numeric components compared under `tol`.
    pub fn approx_eq(&self, other: &TypedValue, tol: f64) -> bool {
        use TypedValue::*;
        match (self, other) {
            (Num(a), Num(b)) | (Dist(a), Dist(b)) | (Angl(a), Angl(b)) => (a - b).abs() <= tol,
            (Pos(a), Pos(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol),
            (Bool(a), Bool(b)) => a == b,
            (Obj(a), Obj(b)) => a == b,
            (Product(a), Product(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y, tol)),
            _ => false,
        }
    }

    /// Payload text without the type prefix.
    pub fn payload_text(&self) -> String {
        match self {
            TypedValue::Num(x) | TypedValue::Dist(x) | TypedValue::Angl(x) => format_number(*x),
            TypedValue::Pos(c) => format_coords(c),
            TypedValue::Bool(b) => if *b { "1" } else { "0" }.to_string(),
            TypedValue::Obj(s) => s.clone(),
            TypedValue::Product(parts) => {
                let inner: Vec<String> = parts.iter().map(|p| p.payload_text()).collect();
                format!("({})", inner.join(";"))
            }
        }
    }
}

impl fmt::Display for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.value_type(), self.payload_text())
    }
}

impl FromStr for TypedValue {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_typed_value(s)
    }
}

/// Shortest text that parses back to the identical `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

pub(crate) fn format_coords(c: &[f64]) -> String {
    let parts: Vec<String> = c.iter().map(|x| format_number(*x)).collect();
    format!("[{}]", parts.join(","))
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses `T:payload`, e.g. `num:5`, `pos:[9,14]`, `obj*pos:(obst;[13,3])`.
pub fn parse_typed_value(text: &str) -> Result<TypedValue, TypeError> {
    let text = text.trim();
    let (ty, payload) = text
        .split_once(':')
        .ok_or_else(|| TypeError::MissingSeparator(text.to_string()))?;
    let ty: ValueType = ty.parse()?;
    parse_payload(&ty, payload.trim())
}

/// Parses a payload against an already known value type.
pub fn parse_payload(ty: &ValueType, payload: &str) -> Result<TypedValue, TypeError> {
    let value = match ty {
        ValueType::Base(b) => parse_base_payload(*b, payload)?,
        ValueType::Product(parts) => {
            let inner = payload
                .strip_prefix('(')
                .and_then(|p| p.strip_suffix(')'))
                .ok_or_else(|| malformed(ty, payload, "product payload must be `(a;b)`"))?;
            let pieces: Vec<&str> = inner.split(';').collect();
            if pieces.len() != parts.len() {
                return Err(malformed(
                    ty,
                    payload,
                    &format!("expected {} components, found {}", parts.len(), pieces.len()),
                ));
            }
            let comps = parts
                .iter()
                .zip(pieces)
                .map(|(b, p)| parse_base_payload(*b, p.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            TypedValue::Product(comps)
        }
        ValueType::Class(c) => return Err(TypeError::ClassNotAllowed(c.to_string())),
        ValueType::Any => return Err(TypeError::ClassNotAllowed("any".into())),
    };
    value.validate()?;
    Ok(value)
}

fn malformed(ty: &dyn fmt::Display, payload: &str, reason: &str) -> TypeError {
    TypeError::Malformed {
        ty: ty.to_string(),
        payload: payload.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_number(ty: BaseType, s: &str) -> Result<f64, TypeError> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| malformed(&ty, s, "not a decimal number"))?;
    if !x.is_finite() {
        return Err(malformed(&ty, s, "not a finite number"));
    }
    Ok(x)
}

fn parse_base_payload(b: BaseType, payload: &str) -> Result<TypedValue, TypeError> {
    let value = match b {
        BaseType::Num => TypedValue::Num(parse_number(b, payload)?),
        BaseType::Dist => TypedValue::Dist(parse_number(b, payload)?),
        BaseType::Angl => TypedValue::Angl(parse_number(b, payload)?),
        BaseType::Bool => match payload {
            "0" => TypedValue::Bool(false),
            "1" => TypedValue::Bool(true),
            _ => {
                return Err(TypeError::Range {
                    ty: "bool".into(),
                    reason: format!("`{payload}` is not 0 or 1"),
                })
            }
        },
        BaseType::Obj => {
            if !is_identifier(payload) {
                return Err(malformed(&b, payload, "symbols must be bare identifiers"));
            }
            TypedValue::Obj(payload.to_string())
        }
        BaseType::Pos => {
            let inner = payload
                .strip_prefix('[')
                .and_then(|p| p.strip_suffix(']'))
                .ok_or_else(|| malformed(&b, payload, "tuple must be `[a,b]` or `[a,b,c]`"))?;
            let coords = inner
                .split(',')
                .map(|c| parse_number(b, c))
                .collect::<Result<Vec<_>, _>>()?;
            TypedValue::Pos(coords)
        }
    };
    value.validate()?;
    Ok(value)
}

/// Types and arity of a background relation.
///
/// Ternary signatures read `before × parameter → after`; binary ones are
/// predicates over `(before, after)` and ignore the parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationSignature {
    pub name: String,
    pub arg_types: Vec<ValueType>,
}

impl RelationSignature {
    pub fn new(name: impl Into<String>, arg_types: Vec<ValueType>) -> Self {
        RelationSignature {
            name: name.into(),
            arg_types,
        }
    }

    pub fn arity(&self) -> usize {
        self.arg_types.len()
    }

    pub fn is_predicate(&self) -> bool {
        self.arity() == 2
    }

    /// `a,b,c` form used in theory files.
    pub fn types_text(&self) -> String {
        self.arg_types
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_types(text: &str) -> Result<Vec<ValueType>, TypeError> {
        text.split(',').map(|t| t.parse()).collect()
    }
}

impl fmt::Display for RelationSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.arg_types.as_slice() {
            [a, b, c] => write!(f, "{}: {a} × {b} → {c}", self.name),
            [a, b] => write!(f, "{}: {a} × {b} → bool", self.name),
            other => {
                let parts: Vec<String> = other.iter().map(|t| t.to_string()).collect();
                write!(f, "{}: {}", self.name, parts.join(" × "))
            }
        }
    }
}

/// Checks a signature against `(before, parameter, after)` types.
pub fn signature_match(sig: &RelationSignature, triplet_types: &[ValueType; 3]) -> bool {
    let [before, param, after] = triplet_types;
    match sig.arg_types.as_slice() {
        [s1, s2, s3] => conforms(before, s1) && conforms(param, s2) && conforms(after, s3),
        [s1, s2] => conforms(before, s1) && conforms(after, s2),
        _ => false,
    }
}
