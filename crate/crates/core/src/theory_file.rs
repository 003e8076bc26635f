//! Line-oriented theory documents written by `learn` and read by `inspect`.
//!
//! ```text
//! theory action=move_forward params=[dist] dim=2 occurrences=37
//! variable name=r_pos type=pos
//! candidate relation=has_new_position signature=pos,dist,pos param=0 constants=C:2
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::induction::{ActionTheory, Candidate, TheoryStore, VariableCandidates};
use crate::knowledge::{ConstantBinding, ConstantValue};
use crate::types::{RelationSignature, ValueType};

#[derive(Debug, Error)]
#[error("theory file line {line}: {message}")]
pub struct TheoryFileError {
    pub line: usize,
    pub message: String,
}

pub fn write_theories(store: &TheoryStore) -> String {
    let mut out = String::new();
    for (name, th) in &store.theories {
        let occ = store.occurrences.get(name).copied().unwrap_or(0);
        write_theory(&mut out, th, occ);
    }
    out
}

fn write_theory(out: &mut String, th: &ActionTheory, occurrences: usize) {
    let params: Vec<String> = th.param_types.iter().map(|t| t.to_string()).collect();
    let _ = writeln!(
        out,
        "theory action={} params=[{}] dim={} occurrences={}",
        th.action,
        params.join(","),
        th.pos_dimension,
        occurrences
    );
    for (var, vc) in &th.variables {
        let _ = writeln!(out, "variable name={var} type={}", vc.ty);
        for c in &vc.candidates {
            let param = c.param_index.map_or("-".to_string(), |i| i.to_string());
            let consts = if c.constants.is_empty() {
                "-".to_string()
            } else {
                c.constants
                    .iter()
                    .map(|(k, v)| format!("{k}:{v}"))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let _ = writeln!(
                out,
                "candidate relation={} signature={} param={param} constants={consts}",
                c.relation,
                c.signature.types_text()
            );
        }
    }
}

pub fn read_theories(text: &str) -> Result<TheoryStore, TheoryFileError> {
    let mut store = TheoryStore::default();
    let mut current: Option<ActionTheory> = None;
    let mut current_var: Option<String> = None;

    let finish = |store: &mut TheoryStore, th: Option<ActionTheory>| {
        if let Some(th) = th {
            store.theories.insert(th.action.clone(), th);
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| TheoryFileError { line, message };
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut toks = raw.split_whitespace();
        let tag = toks.next().unwrap_or_default();
        let fields: BTreeMap<&str, &str> = toks
            .map(|t| {
                t.split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, found `{t}`")))
            })
            .collect::<Result<_, _>>()?;
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| err(format!("missing `{k}=`")));
        let parse_ty = |s: &str| s.parse::<ValueType>().map_err(|e| err(e.to_string()));
        match tag {
            "theory" => {
                finish(&mut store, current.take());
                current_var = None;
                let action = field("action")?.to_string();
                let params = field("params")?;
                let inner = params
                    .strip_prefix('[')
                    .and_then(|p| p.strip_suffix(']'))
                    .ok_or_else(|| err("params must be `[t,...]`".into()))?;
                let param_types = if inner.is_empty() {
                    vec![]
                } else {
                    inner.split(',').map(parse_ty).collect::<Result<Vec<_>, _>>()?
                };
                let dim = field("dim")?.parse().map_err(|_| err("bad dim".into()))?;
                let occ: usize = field("occurrences")?
                    .parse()
                    .map_err(|_| err("bad occurrences".into()))?;
                store.occurrences.insert(action.clone(), occ);
                current = Some(ActionTheory::new(action, param_types, dim));
            }
            "variable" => {
                let th = current
                    .as_mut()
                    .ok_or_else(|| err("variable outside a theory".into()))?;
                let name = field("name")?.to_string();
                let ty = parse_ty(field("type")?)?;
                th.variables.insert(
                    name.clone(),
                    VariableCandidates {
                        ty,
                        candidates: Vec::new(),
                    },
                );
                current_var = Some(name);
            }
            "candidate" => {
                let th = current
                    .as_mut()
                    .ok_or_else(|| err("candidate outside a theory".into()))?;
                let var = current_var
                    .as_ref()
                    .ok_or_else(|| err("candidate before any variable".into()))?;
                let relation = field("relation")?.to_string();
                let arg_types = RelationSignature::parse_types(field("signature")?).map_err(|e| err(e.to_string()))?;
                let param_index = match field("param")? {
                    "-" => None,
                    p => Some(p.parse().map_err(|_| err(format!("bad param index `{p}`")))?),
                };
                let mut constants = ConstantBinding::new();
                let consts = field("constants")?;
                if consts != "-" {
                    for kv in consts.split(',') {
                        let (k, v) = kv.split_once(':').ok_or_else(|| err(format!("bad constant `{kv}`")))?;
                        let value = match v.parse::<f64>() {
                            Ok(x) => ConstantValue::Num(x),
                            Err(_) => ConstantValue::Sym(v.to_string()),
                        };
                        constants.insert(k.to_string(), value);
                    }
                }
                th.variables
                    .get_mut(var)
                    .expect("variable registered")
                    .candidates
                    .push(Candidate {
                        signature: RelationSignature::new(relation.clone(), arg_types),
                        relation,
                        constants,
                        param_index,
                    });
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    finish(&mut store, current);
    for th in store.theories.values_mut() {
        th.normalize();
    }
    Ok(store)
}
