//! Constraint temporal logic over bounded finite traces.
//!
//! Formulas mix Boolean propositions, the primitive taken at each instant and
//! linear relations over arithmetic temporal terms (a state variable read
//! `shift` instants away). Evaluation is the reference semantics that every
//! solver answer is replayed against.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primspec::PrimitiveKind;

/// Arithmetic temporal term: `var` read `shift` instants from now.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Att {
    pub var: String,
    pub shift: i64,
}

pub fn att(var: &str, shift: i64) -> Att {
    Att { var: var.to_string(), shift }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Att(Att),
    Max(Box<Term>, Box<Term>),
    Min(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(var: &str, shift: i64) -> Term {
        Term::Att(att(var, shift))
    }

    pub fn max(a: Term, b: Term) -> Term {
        Term::Max(Box::new(a), Box::new(b))
    }

    pub fn min(a: Term, b: Term) -> Term {
        Term::Min(Box::new(a), Box::new(b))
    }

    pub fn atts(&self, out: &mut Vec<Att>) {
        match self {
            Term::Att(a) => out.push(a.clone()),
            Term::Max(a, b) | Term::Min(a, b) => {
                a.atts(out);
                b.atts(out);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Cmp::Eq => lhs == rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// Σ cᵢ·termᵢ ⋈ c₀ with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rel {
    pub terms: Vec<(i64, Term)>,
    pub cmp: Cmp,
    pub constant: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prop {
    Named(String),
    /// π = kind at this instant.
    Primitive(PrimitiveKind),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Prop),
    Rel(Rel),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Prev(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Since(Box<Formula>, Box<Formula>),
    Always(Box<Formula>),
    Eventually(Box<Formula>),
    Last(Box<Formula>),
}

/// Linear expression builder for relations.
#[derive(Clone, Debug, Default)]
pub struct Lin {
    terms: Vec<(i64, Term)>,
    offset: i64,
}

impl Lin {
    pub fn new() -> Lin {
        Lin::default()
    }

    pub fn var(var: &str, shift: i64) -> Lin {
        Lin::new().plus(1, Term::var(var, shift))
    }

    pub fn plus(mut self, c: i64, t: Term) -> Lin {
        if c != 0 {
            self.terms.push((c, t));
        }
        self
    }

    pub fn add(self, c: i64, var: &str, shift: i64) -> Lin {
        self.plus(c, Term::var(var, shift))
    }

    /// Constant added to the left-hand side.
    pub fn offset(mut self, k: i64) -> Lin {
        self.offset += k;
        self
    }

    fn rel(self, cmp: Cmp, rhs: i64) -> Formula {
        Formula::Rel(Rel { terms: self.terms, cmp, constant: rhs - self.offset })
    }

    pub fn eq(self, rhs: i64) -> Formula {
        self.rel(Cmp::Eq, rhs)
    }
    pub fn le(self, rhs: i64) -> Formula {
        self.rel(Cmp::Le, rhs)
    }
    pub fn lt(self, rhs: i64) -> Formula {
        self.rel(Cmp::Lt, rhs)
    }
    pub fn ge(self, rhs: i64) -> Formula {
        self.rel(Cmp::Ge, rhs)
    }
    pub fn gt(self, rhs: i64) -> Formula {
        self.rel(Cmp::Gt, rhs)
    }
}

impl Formula {
    pub fn prop(name: &str) -> Formula {
        Formula::Atom(Prop::Named(name.to_string()))
    }

    pub fn prim(kind: PrimitiveKind) -> Formula {
        Formula::Atom(Prop::Primitive(kind))
    }

    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    /// n-ary conjunction; nested conjunctions are flattened, ⊤ dropped.
    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::and(vec![
            Formula::implies(a.clone(), b.clone()),
            Formula::implies(b, a),
        ])
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn prev(f: Formula) -> Formula {
        Formula::Prev(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn since(a: Formula, b: Formula) -> Formula {
        Formula::Since(Box::new(a), Box::new(b))
    }

    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    pub fn last(f: Formula) -> Formula {
        Formula::Last(Box::new(f))
    }

    /// Node count.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) | Formula::Rel(_) => 1,
            Formula::Not(a)
            | Formula::Next(a)
            | Formula::Prev(a)
            | Formula::Always(a)
            | Formula::Eventually(a)
            | Formula::Last(a) => 1 + a.size(),
            Formula::And(v) | Formula::Or(v) => 1 + v.iter().map(Formula::size).sum::<usize>(),
            Formula::Implies(a, b) | Formula::Until(a, b) | Formula::Since(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(v) => v.iter().flat_map(|f| f.conjuncts()).collect(),
            Formula::True => Vec::new(),
            other => vec![other],
        }
    }

    /// Every variable read by the formula.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Rel(r) = f {
                let mut atts = Vec::new();
                for (_, t) in &r.terms {
                    t.atts(&mut atts);
                }
                out.extend(atts.into_iter().map(|a| a.var));
            }
        });
        out.sort();
        out.dedup();
        out
    }

    /// Every named proposition.
    pub fn propositions(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Atom(Prop::Named(p)) = f {
                out.push(p.clone());
            }
        });
        out.sort();
        out.dedup();
        out
    }

    pub fn mentions_primitives(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| {
            if matches!(f, Formula::Atom(Prop::Primitive(_))) {
                found = true;
            }
        });
        found
    }

    pub fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::True | Formula::False | Formula::Atom(_) | Formula::Rel(_) => {}
            Formula::Not(a)
            | Formula::Next(a)
            | Formula::Prev(a)
            | Formula::Always(a)
            | Formula::Eventually(a)
            | Formula::Last(a) => a.visit(f),
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|x| x.visit(f)),
            Formula::Implies(a, b) | Formula::Until(a, b) | Formula::Since(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    match t {
        Term::Att(a) if a.shift == 0 => write!(f, "{}", a.var),
        Term::Att(a) => write!(f, "{}@{:+}", a.var, a.shift),
        Term::Max(a, b) | Term::Min(a, b) => {
            write!(f, "({} ", if matches!(t, Term::Max(..)) { "max" } else { "min" })?;
            write_term(f, a)?;
            write!(f, " ")?;
            write_term(f, b)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Formula {
    /// Stable s-expression rendering.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, op: &str, xs: &[&Formula]| -> fmt::Result {
            write!(f, "({op}")?;
            for x in xs {
                write!(f, " {x}")?;
            }
            write!(f, ")")
        };
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(Prop::Named(p)) => write!(f, "{p}"),
            Formula::Atom(Prop::Primitive(k)) => write!(f, "(pi {k})"),
            Formula::Rel(r) => {
                write!(f, "({} (+", r.cmp.symbol())?;
                for (c, t) in &r.terms {
                    write!(f, " (* {c} ")?;
                    write_term(f, t)?;
                    write!(f, ")")?;
                }
                write!(f, ") {})", r.constant)
            }
            Formula::Not(a) => list(f, "not", &[a]),
            Formula::And(v) => list(f, "and", &v.iter().collect::<Vec<_>>()),
            Formula::Or(v) => list(f, "or", &v.iter().collect::<Vec<_>>()),
            Formula::Implies(a, b) => list(f, "=>", &[a, b]),
            Formula::Next(a) => list(f, "X", &[a]),
            Formula::Prev(a) => list(f, "Y", &[a]),
            Formula::Until(a, b) => list(f, "U", &[a, b]),
            Formula::Since(a, b) => list(f, "S", &[a, b]),
            Formula::Always(a) => list(f, "G", &[a]),
            Formula::Eventually(a) => list(f, "F", &[a]),
            Formula::Last(a) => list(f, "last", &[a]),
        }
    }
}

/// Valuation over instants 0..=k. Primitive slot 0 is always empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub k: usize,
    pub vars: BTreeMap<String, Vec<f64>>,
    pub props: BTreeMap<String, Vec<bool>>,
    pub prims: Vec<Option<PrimitiveKind>>,
}

impl Trace {
    pub fn new(k: usize) -> Trace {
        Trace { k, vars: BTreeMap::new(), props: BTreeMap::new(), prims: vec![None; k + 1] }
    }

    pub fn set_var(&mut self, name: &str, values: Vec<f64>) {
        self.vars.insert(name.to_string(), values);
    }

    pub fn set_prop(&mut self, name: &str, values: Vec<bool>) {
        self.props.insert(name.to_string(), values);
    }

    pub fn var(&self, name: &str, k: usize) -> Option<f64> {
        self.vars.get(name).and_then(|v| v.get(k)).copied()
    }

    pub fn prop(&self, name: &str, k: usize) -> Option<bool> {
        self.props.get(name).and_then(|v| v.get(k)).copied()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("term {var}@{shift:+} read at instant {at} falls outside 0..={k}")]
    ShiftOutOfRange { var: String, shift: i64, at: usize, k: usize },
    #[error("variable `{0}` missing at instant {1}")]
    MissingVar(String, usize),
    #[error("proposition `{0}` missing at instant {1}")]
    MissingProp(String, usize),
    #[error("primitive missing at instant {0}")]
    MissingPrimitive(usize),
    #[error("instant {0} outside the trace")]
    BadInstant(usize),
}

fn term_value(t: &Term, tr: &Trace, k: usize) -> Result<f64, EvalError> {
    match t {
        Term::Att(a) => {
            let at = k as i64 + a.shift;
            if at < 0 || at > tr.k as i64 {
                return Err(EvalError::ShiftOutOfRange {
                    var: a.var.clone(),
                    shift: a.shift,
                    at: k,
                    k: tr.k,
                });
            }
            tr.var(&a.var, at as usize)
                .ok_or_else(|| EvalError::MissingVar(a.var.clone(), at as usize))
        }
        Term::Max(a, b) => Ok(term_value(a, tr, k)?.max(term_value(b, tr, k)?)),
        Term::Min(a, b) => Ok(term_value(a, tr, k)?.min(term_value(b, tr, k)?)),
    }
}

pub fn eval_rel(r: &Rel, tr: &Trace, k: usize) -> Result<bool, EvalError> {
    let mut lhs = 0.0;
    for (c, t) in &r.terms {
        lhs += *c as f64 * term_value(t, tr, k)?;
    }
    Ok(r.cmp.holds(lhs, r.constant as f64))
}

/// Truth of `f` at instant `k`. Conjunctions, disjunctions and implications
/// short-circuit left to right. ○ at the last instant and ○⁻¹ at instant 0
/// are false.
pub fn eval(f: &Formula, tr: &Trace, k: usize) -> Result<bool, EvalError> {
    if k > tr.k {
        return Err(EvalError::BadInstant(k));
    }
    let kk = tr.k;
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(Prop::Named(p)) => {
            tr.prop(p, k).ok_or_else(|| EvalError::MissingProp(p.clone(), k))?
        }
        Formula::Atom(Prop::Primitive(kind)) => {
            if k == 0 {
                false
            } else {
                let got = tr.prims.get(k).ok_or(EvalError::MissingPrimitive(k))?;
                *got.as_ref().ok_or(EvalError::MissingPrimitive(k))? == *kind
            }
        }
        Formula::Rel(r) => eval_rel(r, tr, k)?,
        Formula::Not(a) => !eval(a, tr, k)?,
        Formula::And(v) => {
            for x in v {
                if !eval(x, tr, k)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(v) => {
            for x in v {
                if eval(x, tr, k)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Implies(a, b) => !eval(a, tr, k)? || eval(b, tr, k)?,
        Formula::Next(a) => k < kk && eval(a, tr, k + 1)?,
        Formula::Prev(a) => k > 0 && eval(a, tr, k - 1)?,
        Formula::Until(a, b) => {
            for i in k..=kk {
                if eval(b, tr, i)? {
                    return Ok(true);
                }
                if !eval(a, tr, i)? {
                    return Ok(false);
                }
            }
            false
        }
        Formula::Since(a, b) => {
            for i in (0..=k).rev() {
                if eval(b, tr, i)? {
                    return Ok(true);
                }
                if !eval(a, tr, i)? {
                    return Ok(false);
                }
            }
            false
        }
        Formula::Always(a) => {
            for i in k..=kk {
                if !eval(a, tr, i)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Eventually(a) => {
            for i in k..=kk {
                if eval(a, tr, i)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Last(a) => eval(a, tr, kk)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckOutcome {
    Satisfied,
    Violated { instant: usize, clause: Formula },
}

impl CheckOutcome {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, CheckOutcome::Satisfied)
    }
}

/// Earliest instant at which a conjunct fails, narrowing □[g → a ∧ b ∧ …]
/// to the individual failing consequent.
fn locate(c: &Formula, tr: &Trace) -> Result<Option<(usize, Formula)>, EvalError> {
    if eval(c, tr, 0)? {
        return Ok(None);
    }
    if let Formula::Always(inner) = c {
        for k in 0..=tr.k {
            if eval(inner, tr, k)? {
                continue;
            }
            let mut best = Formula::Always(inner.clone());
            match inner.as_ref() {
                Formula::And(parts) => {
                    for p in parts {
                        if !eval(p, tr, k)? {
                            best = Formula::always(p.clone());
                            break;
                        }
                    }
                }
                Formula::Implies(g, body) => {
                    if let Formula::And(parts) = body.as_ref() {
                        for p in parts {
                            if !eval(p, tr, k)? {
                                best = Formula::always(Formula::implies((**g).clone(), p.clone()));
                                break;
                            }
                        }
                    }
                }
                _ => {}
            }
            return Ok(Some((k, best)));
        }
    }
    Ok(Some((0, c.clone())))
}

/// Evaluate `f` at instant 0; on failure report the earliest failing instant
/// and the smallest failing top-level conjunct there.
pub fn check_trace(f: &Formula, tr: &Trace) -> Result<CheckOutcome, EvalError> {
    if eval(f, tr, 0)? {
        return Ok(CheckOutcome::Satisfied);
    }
    let mut best: Option<(usize, Formula)> = None;
    for c in f.conjuncts() {
        if let Some((k, clause)) = locate(c, tr)? {
            let better = match &best {
                None => true,
                Some((bk, bc)) => k < *bk || (k == *bk && clause.size() < bc.size()),
            };
            if better {
                best = Some((k, clause));
            }
        }
    }
    let (instant, clause) = best.unwrap_or((0, f.clone()));
    Ok(CheckOutcome::Violated { instant, clause })
}
