//! Clause-fact dialect: `state_spec/2`, `action/3` and `action_theory/3`.
//!
//! ```text
//! state_spec(31, [[r_pos, [9,14]:pos], [obj_num, 1:num],
//!                 [obj_grab, [none]:obj, 0:truthVal]]).
//! action(move_forward, 32, [3:dist]).
//! action_theory(move_forward, [D:dist],
//!     relation_is([[r_pos, [has_new_position([X1,Y1]:pos, D:dist, [X2,Y2]:pos)-[C=2]]]])).
//! ```
//!
//! Types are written postfix. A variable with several typed value parts is a
//! product value. `%` starts a comment.

use std::fmt::Write as _;

use thiserror::Error;

use crate::induction::{candidate_term, param_names, params_pattern, ActionTheory, Candidate, VariableCandidates};
use crate::knowledge::{ConstantBinding, ConstantValue, Library};
use crate::trace::{ActionRecord, Binding, Sample, StateSnapshot, TraceError};
use crate::types::{BaseType, RelationSignature, TypedValue, ValueType};

#[derive(Debug, Error)]
pub enum ClauseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Num(f64),
    Atom(String),
    Var(String),
    List(Vec<Term>),
    Compound(String, Vec<Term>),
    /// `term:type`
    Typed(Box<Term>, String),
    /// `a-b` or `a=b`
    Infix(char, Box<Term>, Box<Term>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Punct(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ClauseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let x = text.parse().map_err(|_| ClauseError::Syntax {
                line,
                message: format!("bad number `{text}`"),
            })?;
            out.push((Tok::Num(x), line));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), line));
        } else if "()[],:.-=*;".contains(c) {
            out.push((Tok::Punct(c), line));
            i += 1;
        } else {
            return Err(ClauseError::Syntax {
                line,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |(_, l)| *l)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ClauseError> {
        Err(ClauseError::Syntax {
            line: self.line(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn expect(&mut self, c: char) -> Result<(), ClauseError> {
        if self.peek_punct(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ClauseError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn expr(&mut self) -> Result<Term, ClauseError> {
        let mut lhs = self.typed()?;
        while self.peek_punct('-') || self.peek_punct('=') {
            let Some(Tok::Punct(op)) = self.peek().cloned() else {
                unreachable!()
            };
            self.pos += 1;
            let rhs = self.typed()?;
            lhs = Term::Infix(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn typed(&mut self) -> Result<Term, ClauseError> {
        let t = self.primary()?;
        if self.peek_punct(':') {
            self.pos += 1;
            let mut ty = self.ident()?;
            while self.peek_punct('*') {
                self.pos += 1;
                ty.push('*');
                ty.push_str(&self.ident()?);
            }
            return Ok(Term::Typed(Box::new(t), ty));
        }
        Ok(t)
    }

    fn seq(&mut self, close: char) -> Result<Vec<Term>, ClauseError> {
        let mut items = Vec::new();
        if self.peek_punct(close) {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            if self.peek_punct(',') {
                self.pos += 1;
            } else {
                self.expect(close)?;
                return Ok(items);
            }
        }
    }

    fn primary(&mut self) -> Result<Term, ClauseError> {
        match self.peek().cloned() {
            Some(Tok::Num(x)) => {
                self.pos += 1;
                Ok(Term::Num(x))
            }
            Some(Tok::Punct('-')) => {
                self.pos += 1;
                match self.peek().cloned() {
                    Some(Tok::Num(x)) => {
                        self.pos += 1;
                        Ok(Term::Num(-x))
                    }
                    _ => self.err("expected number after `-`"),
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek_punct('(') {
                    self.pos += 1;
                    let args = self.seq(')')?;
                    return Ok(Term::Compound(name, args));
                }
                let first = name.chars().next().unwrap_or('a');
                if first.is_ascii_uppercase() || first == '_' {
                    Ok(Term::Var(name))
                } else {
                    Ok(Term::Atom(name))
                }
            }
            Some(Tok::Punct('[')) => {
                self.pos += 1;
                Ok(Term::List(self.seq(']')?))
            }
            Some(Tok::Punct('(')) => {
                self.pos += 1;
                let t = self.expr()?;
                self.expect(')')?;
                Ok(t)
            }
            _ => self.err("expected a term"),
        }
    }
}

/// Parses a sequence of `term.` statements, each paired with its line.
pub fn parse_statements(src: &str) -> Result<Vec<(Term, usize)>, ClauseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let mut out = Vec::new();
    while p.peek().is_some() {
        let line = p.line();
        let t = p.expr()?;
        p.expect('.')?;
        out.push((t, line));
    }
    Ok(out)
}

fn shape<T>(line: usize, msg: impl Into<String>) -> Result<T, ClauseError> {
    Err(ClauseError::Syntax {
        line,
        message: msg.into(),
    })
}

fn base_payload(term: &Term, b: BaseType, line: usize) -> Result<TypedValue, ClauseError> {
    let num = |t: &Term| match t {
        Term::Num(x) => Some(*x),
        _ => None,
    };
    let v = match (b, term) {
        (BaseType::Num, Term::Num(x)) => TypedValue::Num(*x),
        (BaseType::Dist, Term::Num(x)) => TypedValue::Dist(*x),
        (BaseType::Angl, Term::Num(x)) => TypedValue::Angl(*x),
        (BaseType::Bool, Term::Num(x)) if *x == 0.0 || *x == 1.0 => TypedValue::Bool(*x == 1.0),
        (BaseType::Obj, Term::Atom(s)) => TypedValue::Obj(s.clone()),
        (BaseType::Obj, Term::List(items)) if items.len() == 1 => match &items[0] {
            Term::Atom(s) => TypedValue::Obj(s.clone()),
            _ => return shape(line, "object identifiers are atoms"),
        },
        (BaseType::Pos, Term::List(items)) => {
            let coords: Option<Vec<f64>> = items.iter().map(num).collect();
            match coords {
                Some(c) => TypedValue::Pos(c),
                None => return shape(line, "positions are lists of numbers"),
            }
        }
        _ => return shape(line, format!("payload {term:?} does not fit type {b}")),
    };
    v.validate().map_err(|e| ClauseError::Syntax {
        line,
        message: e.to_string(),
    })?;
    Ok(v)
}

fn typed_value(term: &Term, line: usize) -> Result<TypedValue, ClauseError> {
    let Term::Typed(inner, ty) = term else {
        return shape(line, "values must carry a postfix type, e.g. `3:dist`");
    };
    let parsed: ValueType = ty.parse().map_err(|e: crate::types::TypeError| ClauseError::Syntax {
        line,
        message: e.to_string(),
    })?;
    match parsed {
        ValueType::Base(b) => base_payload(inner, b, line),
        _ => shape(line, format!("`{ty}` cannot type a single value part")),
    }
}

/// Reads a trace written as `state_spec/2` and `action/3` facts.
pub fn import_clause_trace(src: &str) -> Result<Sample, ClauseError> {
    let mut snapshots = Vec::new();
    let mut actions = Vec::new();
    for (term, line) in parse_statements(src)? {
        match term {
            Term::Compound(f, args) if f == "state_spec" && args.len() == 2 => {
                let Term::Num(t) = args[0] else {
                    return shape(line, "state_spec time must be an integer");
                };
                let Term::List(entries) = &args[1] else {
                    return shape(line, "state_spec expects a variable list");
                };
                let mut bindings = Vec::new();
                for e in entries {
                    let Term::List(parts) = e else {
                        return shape(line, "each variable is `[name, Value:type, ...]`");
                    };
                    let Some((Term::Atom(name), values)) = parts.split_first() else {
                        return shape(line, "variable entry must start with a lowercase name");
                    };
                    let values = values
                        .iter()
                        .map(|v| typed_value(v, line))
                        .collect::<Result<Vec<_>, _>>()?;
                    let value = match values.len() {
                        0 => return shape(line, format!("variable `{name}` has no value")),
                        1 => values.into_iter().next().unwrap(),
                        _ => TypedValue::Product(values),
                    };
                    bindings.push(Binding::observable(name.clone(), value));
                }
                snapshots.push(StateSnapshot::new(t as i64, bindings));
            }
            Term::Compound(f, args) if f == "action" && args.len() == 3 => {
                let (Term::Atom(name), Term::Num(t), Term::List(params)) = (&args[0], &args[1], &args[2]) else {
                    return shape(line, "expected action(Name, Time, [Params])");
                };
                let params = params
                    .iter()
                    .map(|p| typed_value(p, line))
                    .collect::<Result<Vec<_>, _>>()?;
                actions.push(ActionRecord::new(name.clone(), *t as i64, params));
            }
            other => return shape(line, format!("unsupported fact {other:?}")),
        }
    }
    // facts may come in any order; the sample itself is time ordered
    snapshots.sort_by_key(|s| s.t);
    actions.sort_by_key(|a| a.t);
    Ok(Sample::new(snapshots, actions)?)
}

fn constants_text(c: &ConstantBinding) -> String {
    let parts: Vec<String> = c.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Renders a theory as an `action_theory/3` fact.
pub fn export_clause(th: &ActionTheory) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "action_theory({}, {}, relation_is([",
        th.action,
        params_pattern(&th.param_types)
    );
    for (vi, (var, vc)) in th.variables.iter().enumerate() {
        if vi > 0 {
            out.push_str(", ");
        }
        if vc.candidates.is_empty() {
            let _ = write!(out, "[{var}:{}, []]", vc.ty);
            continue;
        }
        let _ = write!(out, "[{var}, [");
        for (ci, c) in vc.candidates.iter().enumerate() {
            if ci > 0 {
                out.push_str(", ");
            }
            out.push_str(&candidate_term(th, &vc.ty, c));
            if !c.constants.is_empty() {
                let _ = write!(out, "-{}", constants_text(&c.constants));
            }
        }
        out.push_str("]]");
    }
    out.push_str("])).\n");
    out
}

fn pattern_type(term: &Term, line: usize) -> Result<(ValueType, Option<usize>), ClauseError> {
    let Term::Typed(inner, ty) = term else {
        return shape(line, "candidate arguments must be typed");
    };
    let vt: ValueType = ty.parse().map_err(|e: crate::types::TypeError| ClauseError::Syntax {
        line,
        message: e.to_string(),
    })?;
    let dim = match inner.as_ref() {
        Term::List(items) => Some(items.len()),
        _ => None,
    };
    Ok((vt, dim))
}

fn parse_constants(term: &Term, line: usize) -> Result<ConstantBinding, ClauseError> {
    let Term::List(items) = term else {
        return shape(line, "constants are a list `[C=2]`");
    };
    let mut out = ConstantBinding::new();
    for it in items {
        let Term::Infix('=', k, v) = it else {
            return shape(line, "constants are `Name=Value`");
        };
        let key = match k.as_ref() {
            Term::Var(s) | Term::Atom(s) => s.clone(),
            _ => return shape(line, "constant names are identifiers"),
        };
        let val = match v.as_ref() {
            Term::Num(x) => ConstantValue::Num(*x),
            Term::Atom(s) => ConstantValue::Sym(s.clone()),
            _ => return shape(line, "constant values are numbers or atoms"),
        };
        out.insert(key, val);
    }
    Ok(out)
}

/// Reads `action_theory/3` facts back into theories.
///
/// Relation signatures are taken from `lib` when it knows the relation;
/// otherwise the observed argument types stand in for the signature.
pub fn import_clause_theories(src: &str, lib: &Library) -> Result<Vec<ActionTheory>, ClauseError> {
    let mut out = Vec::new();
    for (term, line) in parse_statements(src)? {
        let Term::Compound(f, args) = term else {
            return shape(line, "expected action_theory/3");
        };
        if f != "action_theory" || args.len() != 3 {
            return shape(line, "expected action_theory(Name, Params, relation_is(...))");
        }
        let name = match &args[0] {
            Term::Atom(s) => s.clone(),
            Term::Compound(f, inner) if f == "theory" && inner.len() == 1 => match &inner[0] {
                Term::Atom(s) => s.clone(),
                _ => return shape(line, "action name must be an atom"),
            },
            _ => return shape(line, "action name must be an atom"),
        };
        let Term::List(params) = &args[1] else {
            return shape(line, "parameters are a list");
        };
        let mut pnames = Vec::new();
        let mut ptypes = Vec::new();
        for p in params {
            let Term::Typed(v, ty) = p else {
                return shape(line, "parameters are `Name:type`");
            };
            let Term::Var(n) = v.as_ref() else {
                return shape(line, "parameter names are variables");
            };
            pnames.push(n.clone());
            ptypes.push(ty.parse::<ValueType>().map_err(|e| ClauseError::Syntax {
                line,
                message: e.to_string(),
            })?);
        }
        if pnames != param_names(&ptypes) {
            return shape(
                line,
                format!("parameter names {pnames:?} do not follow the naming scheme"),
            );
        }
        let Term::Compound(ri, rargs) = &args[2] else {
            return shape(line, "expected relation_is([...])");
        };
        let [Term::List(entries)] = rargs.as_slice() else {
            return shape(line, "expected relation_is([...])");
        };
        if ri != "relation_is" {
            return shape(line, "expected relation_is([...])");
        }
        let mut th = ActionTheory::new(name, ptypes.clone(), 2);
        for e in entries {
            let Term::List(parts) = e else {
                return shape(line, "entries are `[var, [candidates]]`");
            };
            let [var, Term::List(cands)] = parts.as_slice() else {
                return shape(line, "entries are `[var, [candidates]]`");
            };
            let (var, declared_ty) = match var {
                Term::Atom(v) => (v.clone(), None),
                Term::Typed(v, ty) => match v.as_ref() {
                    Term::Atom(v) => (
                        v.clone(),
                        Some(ty.parse::<ValueType>().map_err(|e| ClauseError::Syntax {
                            line,
                            message: e.to_string(),
                        })?),
                    ),
                    _ => return shape(line, "variable names are atoms"),
                },
                _ => return shape(line, "variable names are atoms"),
            };
            let mut var_ty = declared_ty;
            let mut list = Vec::new();
            for c in cands {
                let (body, constants) = match c {
                    Term::Infix('-', body, consts) => (body.as_ref(), parse_constants(consts, line)?),
                    other => (other, ConstantBinding::new()),
                };
                let Term::Compound(rel, cargs) = body else {
                    return shape(line, "candidates are relation terms");
                };
                let (before_ty, dim) = pattern_type(&cargs[0], line)?;
                if let Some(d) = dim {
                    th.pos_dimension = d;
                }
                let (param_index, actual) = match cargs.as_slice() {
                    [_, Term::Typed(pv, pty), _] => {
                        let Term::Var(pname) = pv.as_ref() else {
                            return shape(line, "parameter slot must be a variable");
                        };
                        let idx = pnames
                            .iter()
                            .position(|n| n == pname)
                            .ok_or_else(|| ClauseError::Shape(format!("unknown parameter `{pname}`")))?;
                        let pty: ValueType = pty.parse().map_err(|e| ClauseError::Syntax {
                            line,
                            message: format!("{e}"),
                        })?;
                        (Some(idx), vec![before_ty.clone(), pty, before_ty.clone()])
                    }
                    [_, _] => (None, vec![before_ty.clone(), before_ty.clone()]),
                    _ => return shape(line, format!("candidate `{rel}` has unsupported arity")),
                };
                let signature = lib
                    .get(rel)
                    .map(|r| r.signature.clone())
                    .unwrap_or_else(|| RelationSignature::new(rel.clone(), actual));
                var_ty.get_or_insert(before_ty);
                list.push(Candidate {
                    relation: rel.clone(),
                    signature,
                    constants,
                    param_index,
                });
            }
            let Some(ty) = var_ty else {
                return shape(line, format!("cannot infer the type of `{var}`"));
            };
            th.variables.insert(var, VariableCandidates { ty, candidates: list });
        }
        th.normalize();
        out.push(th);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::builtin_library;
    use crate::trace::serialize_trace;

    const CLAUSE_TRACE: &str = "
% worked example
state_spec(31, [
  [r_pos, [9, 14]:pos],
  [obj_num, 1:num],
  [obj_grab, [none]:obj, 0:truthVal],
  [obj_pos, [obst]:obj, [13,3]:pos]
]).
action(move_forward, 32, [3:dist]).
state_spec(33, [[r_pos, [9, 20]:pos], [obj_num, 1:num], [obj_grab, [none]:obj, 0:truthVal], [obj_pos, [obst]:obj, [13,3]:pos]]).
";

    #[test]
    fn imports_clause_trace() {
        let s = import_clause_trace(CLAUSE_TRACE).unwrap();
        assert_eq!(s.snapshots().len(), 2);
        assert_eq!(s.snapshots()[0].bindings.len(), 4);
        assert_eq!(
            s.snapshots()[0].get("obj_grab"),
            Some(&TypedValue::Product(vec![
                TypedValue::Obj("none".into()),
                TypedValue::Bool(false)
            ]))
        );
        assert_eq!(
            s.actions()[0],
            ActionRecord::new("move_forward", 32, vec![TypedValue::Dist(3.0)])
        );
        let line = serialize_trace(&s);
        assert!(line.starts_with("state t=31 r_pos=pos:[9,14] obj_num=num:1 obj_grab=obj*bool:(none;0)"));
    }

    #[test]
    fn clause_syntax_errors() {
        assert!(matches!(
            import_clause_trace("state_spec(1, [[x, 1:num]]"),
            Err(ClauseError::Syntax { .. })
        ));
        assert!(import_clause_trace("state_spec(1, [[x, 1]]).").is_err());
        assert!(import_clause_trace("state_spec(1, [[x, 400:angl]]).").is_err());
        assert!(matches!(
            import_clause_trace(""),
            Err(ClauseError::Trace(TraceError::Empty))
        ));
    }

    #[test]
    fn parses_negative_numbers_and_operators() {
        let stmts = parse_statements("f([C=-1, Z=2.5e1], a-[b]).").unwrap();
        let Term::Compound(_, args) = &stmts[0].0 else { panic!() };
        let Term::List(items) = &args[0] else { panic!() };
        assert_eq!(
            items[0],
            Term::Infix('=', Box::new(Term::Var("C".into())), Box::new(Term::Num(-1.0)))
        );
        assert_eq!(
            items[1],
            Term::Infix('=', Box::new(Term::Var("Z".into())), Box::new(Term::Num(25.0)))
        );
    }

    #[test]
    fn imports_move_forward_theory_clause() {
        let src = "action_theory(move_forward, [D:dist], relation_is([[r_pos, [has_new_position([X1,Y1]:pos, D:dist, [X2,Y2]:pos)]]])).";
        let ths = import_clause_theories(src, &builtin_library()).unwrap();
        assert_eq!(ths.len(), 1);
        let c = &ths[0].candidates("r_pos")[0];
        assert_eq!(c.relation, "has_new_position");
        assert_eq!(c.param_index, Some(0));
        assert_eq!(export_clause(&ths[0]).trim_end(), src);
    }
}
