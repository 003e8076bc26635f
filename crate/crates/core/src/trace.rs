//! Samples of time-stamped state snapshots and the actions issued between them.
//!
//! The canonical on-disk form is one record per line:
//!
//! ```text
//! state t=31 r_pos=pos:[9,14] obj_num=num:1 obj_grab=obj*bool:(none;0)
//! action t=32 name=move_forward params=[dist:3]
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. A binding whose name
//! is written with a leading `$` is an internal (non-observable) variable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use crate::types::{is_identifier, parse_typed_value, TypeError, TypedValue, ValueType};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace contains no state snapshots")]
    Empty,
    #[error("schema error: {0}")]
    Schema(String),
    #[error("order error: {0}")]
    Order(String),
    #[error("action at t={t} is not bracketed by snapshots on both sides")]
    DanglingAction { t: i64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub name: String,
    pub value: TypedValue,
    /// Internal variables are carried along but ignored by default when learning.
    pub internal: bool,
}

impl Binding {
    pub fn observable(name: impl Into<String>, value: TypedValue) -> Self {
        Binding {
            name: name.into(),
            value,
            internal: false,
        }
    }

    pub fn internal(name: impl Into<String>, value: TypedValue) -> Self {
        Binding {
            name: name.into(),
            value,
            internal: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub t: i64,
    pub bindings: Vec<Binding>,
}

impl StateSnapshot {
    pub fn new(t: i64, bindings: Vec<Binding>) -> Self {
        StateSnapshot { t, bindings }
    }

    pub fn get(&self, name: &str) -> Option<&TypedValue> {
        self.bindings.iter().find(|b| b.name == name).map(|b| &b.value)
    }

    pub fn binding(&self, name: &str) -> Option<&Binding> {
        self.bindings.iter().find(|b| b.name == name)
    }

    /// Variable name → (type, internal flag), used for schema comparison.
    pub fn schema(&self) -> BTreeMap<&str, (ValueType, bool)> {
        self.bindings
            .iter()
            .map(|b| (b.name.as_str(), (b.value.value_type(), b.internal)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub name: String,
    pub t: i64,
    pub params: Vec<TypedValue>,
}

impl ActionRecord {
    pub fn new(name: impl Into<String>, t: i64, params: Vec<TypedValue>) -> Self {
        ActionRecord {
            name: name.into(),
            t,
            params,
        }
    }
}

/// A validated trace. Construct through [`Sample::new`] or the readers.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    snapshots: Vec<StateSnapshot>,
    actions: Vec<ActionRecord>,
    pos_dimension: usize,
}

impl Sample {
    pub fn new(snapshots: Vec<StateSnapshot>, actions: Vec<ActionRecord>) -> Result<Sample, TraceError> {
        let first = snapshots.first().ok_or(TraceError::Empty)?;
        let schema = first.schema();
        for snap in &snapshots {
            if snap.bindings.is_empty() {
                return Err(TraceError::Schema(format!(
                    "snapshot t={} binds no variables; at least one is required",
                    snap.t
                )));
            }
            let mut seen = std::collections::BTreeSet::new();
            for b in &snap.bindings {
                if !is_identifier(&b.name) {
                    return Err(TraceError::Schema(format!("`{}` is not a valid variable name", b.name)));
                }
                if !seen.insert(b.name.as_str()) {
                    return Err(TraceError::Schema(format!(
                        "variable `{}` bound twice in snapshot t={}",
                        b.name, snap.t
                    )));
                }
                b.value
                    .validate()
                    .map_err(|e| TraceError::Schema(format!("t={}: {e}", snap.t)))?;
            }
            if snap.schema() != schema {
                return Err(TraceError::Schema(format!(
                    "snapshot t={} binds a different variable set or types than t={}",
                    snap.t, first.t
                )));
            }
        }
        for pair in snapshots.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(TraceError::Order(format!(
                    "snapshot timestamps not strictly increasing ({} then {})",
                    pair[0].t, pair[1].t
                )));
            }
        }
        for pair in actions.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(TraceError::Order(format!(
                    "action timestamps not strictly increasing ({} then {})",
                    pair[0].t, pair[1].t
                )));
            }
        }
        let lo = snapshots.first().map(|s| s.t).unwrap_or_default();
        let hi = snapshots.last().map(|s| s.t).unwrap_or_default();
        for a in &actions {
            if !is_identifier(&a.name) {
                return Err(TraceError::Schema(format!("`{}` is not a valid action name", a.name)));
            }
            if snapshots.binary_search_by_key(&a.t, |s| s.t).is_ok() {
                return Err(TraceError::Order(format!(
                    "action t={} collides with a snapshot timestamp",
                    a.t
                )));
            }
            if a.t <= lo || a.t >= hi {
                return Err(TraceError::DanglingAction { t: a.t });
            }
            for p in &a.params {
                p.validate()
                    .map_err(|e| TraceError::Schema(format!("action t={}: {e}", a.t)))?;
            }
        }

        let mut dims = std::collections::BTreeSet::new();
        let mut collect = |v: &TypedValue| collect_pos_dims(v, &mut dims);
        snapshots
            .iter()
            .flat_map(|s| &s.bindings)
            .for_each(|b| collect(&b.value));
        actions.iter().flat_map(|a| &a.params).for_each(collect);
        if dims.len() > 1 {
            return Err(TraceError::Schema(format!(
                "positions mix dimensions {:?}; a trace uses one",
                dims
            )));
        }
        let pos_dimension = dims.into_iter().next().unwrap_or(2);

        Ok(Sample {
            snapshots,
            actions,
            pos_dimension,
        })
    }

    pub fn snapshots(&self) -> &[StateSnapshot] {
        &self.snapshots
    }

    pub fn actions(&self) -> &[ActionRecord] {
        &self.actions
    }

    pub fn pos_dimension(&self) -> usize {
        self.pos_dimension
    }

    /// Each action together with its bracketing snapshots, in time order.
    pub fn occurrences(&self) -> impl Iterator<Item = (&ActionRecord, &StateSnapshot, &StateSnapshot)> {
        self.actions.iter().map(move |a| {
            let (prev, next) = adjacent_snapshots(self, a).expect("validated at construction");
            (a, prev, next)
        })
    }
}

fn collect_pos_dims(v: &TypedValue, dims: &mut std::collections::BTreeSet<usize>) {
    match v {
        TypedValue::Pos(c) => {
            dims.insert(c.len());
        }
        TypedValue::Product(parts) => parts.iter().for_each(|p| collect_pos_dims(p, dims)),
        _ => {}
    }
}

/// The latest snapshot before and the earliest snapshot after `action.t`.
pub fn adjacent_snapshots<'a>(
    sample: &'a Sample,
    action: &ActionRecord,
) -> Result<(&'a StateSnapshot, &'a StateSnapshot), TraceError> {
    let snaps = sample.snapshots();
    let idx = snaps.partition_point(|s| s.t < action.t);
    if idx == 0 || idx >= snaps.len() || snaps[idx].t == action.t {
        return Err(TraceError::DanglingAction { t: action.t });
    }
    Ok((&snaps[idx - 1], &snaps[idx]))
}

/// Reads the line-delimited trace format.
pub fn ingest_trace<R: BufRead>(reader: R) -> Result<Sample, TraceError> {
    let mut snapshots = Vec::new();
    let mut actions = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| TraceError::Parse { line: lineno, message };
        let mut tokens = line.split_whitespace();
        let tag = tokens.next().unwrap_or_default();
        let fields: Vec<(&str, &str)> = tokens
            .map(|tok| {
                tok.split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, found `{tok}`")))
            })
            .collect::<Result<_, _>>()?;
        match tag {
            "state" => {
                let (first, rest) = fields.split_first().ok_or_else(|| err("missing t=".into()))?;
                let t = parse_time(first, lineno)?;
                let bindings = rest
                    .iter()
                    .map(|(k, v)| {
                        let (name, internal) = match k.strip_prefix('$') {
                            Some(n) => (n, true),
                            None => (*k, false),
                        };
                        let value = parse_typed_value(v).map_err(|e| type_err(lineno, name, e))?;
                        Ok(Binding {
                            name: name.to_string(),
                            value,
                            internal,
                        })
                    })
                    .collect::<Result<Vec<_>, TraceError>>()?;
                snapshots.push(StateSnapshot::new(t, bindings));
            }
            "action" => {
                let [time, (nk, name), (pk, params)] = fields.as_slice() else {
                    return Err(err(
                        "action records are `action t=<int> name=<ident> params=[...]`".into()
                    ));
                };
                if *nk != "name" || *pk != "params" {
                    return Err(err(
                        "action records are `action t=<int> name=<ident> params=[...]`".into()
                    ));
                }
                let t = parse_time(time, lineno)?;
                let inner = params
                    .strip_prefix('[')
                    .and_then(|p| p.strip_suffix(']'))
                    .ok_or_else(|| err(format!("params must be a bracketed list, found `{params}`")))?;
                let params = split_top_level(inner, ',')
                    .into_iter()
                    .filter(|p| !p.is_empty())
                    .map(|p| parse_typed_value(p).map_err(|e| type_err(lineno, "params", e)))
                    .collect::<Result<Vec<_>, _>>()?;
                actions.push(ActionRecord::new(*name, t, params));
            }
            other => return Err(err(format!("unknown record tag `{other}`"))),
        }
    }
    Sample::new(snapshots, actions)
}

fn parse_time((key, value): &(&str, &str), line: usize) -> Result<i64, TraceError> {
    if *key != "t" {
        return Err(TraceError::Parse {
            line,
            message: format!("expected t=<int>, found `{key}=`"),
        });
    }
    value.parse().map_err(|_| TraceError::Parse {
        line,
        message: format!("timestamp `{value}` is not an integer"),
    })
}

fn type_err(line: usize, what: &str, e: TypeError) -> TraceError {
    TraceError::Parse {
        line,
        message: format!("{what}: {e}"),
    }
}

/// Splits on `sep` outside brackets and parentheses.
pub(crate) fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(s[start..i].trim());
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

/// Writes the line-delimited trace format. Records are emitted in timestamp order.
pub fn serialize_trace(sample: &Sample) -> String {
    let mut out = String::new();
    let mut snaps = sample.snapshots().iter().peekable();
    let mut acts = sample.actions().iter().peekable();
    loop {
        let take_snap = match (snaps.peek(), acts.peek()) {
            (Some(s), Some(a)) => s.t < a.t,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_snap {
            let s = snaps.next().unwrap();
            let _ = write!(out, "state t={}", s.t);
            for b in &s.bindings {
                let sigil = if b.internal { "$" } else { "" };
                let _ = write!(out, " {sigil}{}={}", b.name, b.value);
            }
        } else {
            let a = acts.next().unwrap();
            let params: Vec<String> = a.params.iter().map(|p| p.to_string()).collect();
            let _ = write!(out, "action t={} name={} params=[{}]", a.t, a.name, params.join(","));
        }
        out.push('\n');
    }
    out
}
