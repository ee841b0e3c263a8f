//! Bounded encoding of formulas into quantifier-free linear arithmetic and a
//! subprocess client for SMT-LIB solvers.
//!
//! Every temporal operator is unrolled over the instants 0..=K at encode
//! time. Positive occurrences of until and eventually introduce one integer
//! index for the instant where the goal holds; chained untils of the form
//! P₁ U (G₁ ∧ ○(P₂ U …)) share a strictly increasing index vector.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use thiserror::Error;
use wait_timeout::ChildExt;

use crate::cltlb::{Formula, Prop, Rel, Term, Trace};
use crate::primspec::{is_real_var, PrimitiveKind};

pub const PI: &str = "pi";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Int,
    Real,
}

impl Sort {
    fn smt(self) -> &'static str {
        match self {
            Sort::Bool => "Bool",
            Sort::Int => "Int",
            Sort::Real => "Real",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SmtError {
    #[error("term {var}@{shift:+} at instant {at} leaves 0..={k}; raise K or guard the shift")]
    ShiftOutOfRange { var: String, shift: i64, at: usize, k: usize },
    #[error("cannot start solver `{0}`: {1}")]
    SolverMissing(String, String),
    #[error("solver protocol error: {msg}\n--- raw ---\n{raw}")]
    Protocol { msg: String, raw: String },
}

/// Ground problem over K+1 instants.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedProblem {
    pub k: usize,
    pub n_objects: usize,
    /// (variable, instant, sort); π appears for instants 1..=K.
    pub declarations: Vec<(String, usize, Sort)>,
    pub assertions: Vec<String>,
    pub aux_indices: Vec<String>,
}

pub fn symbol(var: &str, k: usize) -> String {
    format!("{var}@{k}")
}

#[derive(Clone, Debug, PartialEq)]
enum E {
    C(bool),
    S(String),
}

fn not_e(e: E) -> E {
    match e {
        E::C(b) => E::C(!b),
        E::S(s) => match s.strip_prefix("(not ").and_then(|r| r.strip_suffix(')')) {
            Some(inner) if balanced(inner) => E::S(inner.to_string()),
            _ => E::S(format!("(not {s})")),
        },
    }
}

fn balanced(s: &str) -> bool {
    let mut depth = 0i64;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

fn nary(op: &str, parts: Vec<String>) -> String {
    match parts.len() {
        1 => parts.into_iter().next().unwrap(),
        _ => format!("({op} {})", parts.join(" ")),
    }
}

fn int_lit(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn real_lit(v: i64) -> String {
    if v < 0 {
        format!("(- {}.0)", v.unsigned_abs())
    } else {
        format!("{v}.0")
    }
}

struct Encoder {
    k: usize,
    n_objects: usize,
    aux: Vec<String>,
}

impl Encoder {
    fn fresh(&mut self) -> String {
        let name = format!("j{}", self.aux.len() + 1);
        self.aux.push(name.clone());
        name
    }

    fn term(&self, t: &Term, i: usize, real: bool) -> Result<String, SmtError> {
        Ok(match t {
            Term::Att(a) => {
                let at = i as i64 + a.shift;
                if at < 0 || at > self.k as i64 {
                    return Err(SmtError::ShiftOutOfRange {
                        var: a.var.clone(),
                        shift: a.shift,
                        at: i,
                        k: self.k,
                    });
                }
                let s = symbol(&a.var, at as usize);
                if real && !is_real_var(&a.var) {
                    format!("(to_real {s})")
                } else {
                    s
                }
            }
            Term::Max(a, b) | Term::Min(a, b) => {
                let (x, y) = (self.term(a, i, real)?, self.term(b, i, real)?);
                let cmp = if matches!(t, Term::Max(..)) { ">" } else { "<" };
                format!("(ite ({cmp} {x} {y}) {x} {y})")
            }
        })
    }

    fn rel(&self, r: &Rel, i: usize) -> Result<E, SmtError> {
        let mut atts = Vec::new();
        for (_, t) in &r.terms {
            t.atts(&mut atts);
        }
        let real = atts.iter().any(|a| is_real_var(&a.var));
        let lit = |v: i64| if real { real_lit(v) } else { int_lit(v) };
        let mut sum = Vec::new();
        for (c, t) in &r.terms {
            sum.push(format!("(* {} {})", lit(*c), self.term(t, i, real)?));
        }
        let lhs = match sum.len() {
            0 => lit(0),
            _ => nary("+", sum),
        };
        Ok(E::S(format!("({} {lhs} {})", r.cmp.symbol(), lit(r.constant))))
    }

    fn and(&self, parts: impl IntoIterator<Item = Result<E, SmtError>>) -> Result<E, SmtError> {
        let mut out = Vec::new();
        for p in parts {
            match p? {
                E::C(true) => {}
                E::C(false) => return Ok(E::C(false)),
                E::S(s) => out.push(s),
            }
        }
        Ok(if out.is_empty() { E::C(true) } else { E::S(nary("and", out)) })
    }

    fn or(&self, parts: impl IntoIterator<Item = Result<E, SmtError>>) -> Result<E, SmtError> {
        let mut out = Vec::new();
        for p in parts {
            match p? {
                E::C(false) => {}
                E::C(true) => return Ok(E::C(true)),
                E::S(s) => out.push(s),
            }
        }
        Ok(if out.is_empty() { E::C(false) } else { E::S(nary("or", out)) })
    }


    fn enc(&mut self, f: &Formula, i: usize, pos: bool) -> Result<E, SmtError> {
        let k = self.k;
        Ok(match f {
            Formula::True => E::C(true),
            Formula::False => E::C(false),
            Formula::Atom(Prop::Named(p)) => E::S(symbol(p, i)),
            Formula::Atom(Prop::Primitive(kind)) => {
                if i == 0 {
                    E::C(false)
                } else {
                    E::S(format!("(= {} {})", symbol(PI, i), kind.code(self.n_objects)))
                }
            }
            Formula::Rel(r) => self.rel(r, i)?,
            Formula::Not(a) => not_e(self.enc(a, i, !pos)?),
            Formula::And(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    let e = self.enc(p, i, pos)?;
                    if e == E::C(false) {
                        return Ok(e);
                    }
                    out.push(Ok(e));
                }
                self.and(out)?
            }
            Formula::Or(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    let e = self.enc(p, i, pos)?;
                    if e == E::C(true) {
                        return Ok(e);
                    }
                    out.push(Ok(e));
                }
                self.or(out)?
            }
            Formula::Implies(a, b) => {
                match self.enc(a, i, !pos)? {
                    E::C(false) => E::C(true),
                    E::C(true) => self.enc(b, i, pos)?,
                    E::S(sa) => match self.enc(b, i, pos)? {
                        E::C(true) => E::C(true),
                        E::C(false) => not_e(E::S(sa)),
                        E::S(sb) => E::S(format!("(=> {sa} {sb})")),
                    },
                }
            }
            Formula::Next(a) => {
                if i == k {
                    E::C(false)
                } else {
                    self.enc(a, i + 1, pos)?
                }
            }
            Formula::Prev(a) => {
                if i == 0 {
                    E::C(false)
                } else {
                    self.enc(a, i - 1, pos)?
                }
            }
            Formula::Always(a) => {
                let mut out = Vec::new();
                for m in i..=k {
                    let e = self.enc(a, m, pos)?;
                    if e == E::C(false) {
                        return Ok(e);
                    }
                    out.push(Ok(e));
                }
                self.and(out)?
            }
            Formula::Last(a) => self.enc(a, k, pos)?,
            Formula::Eventually(a) => {
                if pos {
                    self.until_chain(&[(Formula::True, (**a).clone())], i)?
                } else {
                    let mut out = Vec::new();
                    for m in i..=k {
                        out.push(self.enc(a, m, pos));
                    }
                    self.or(out)?
                }
            }
            Formula::Until(a, b) => {
                if pos {
                    self.until_chain(&chain_stages(a, b), i)?
                } else {
                    // U[K] = G[K]; U[m] = G[m] ∨ (P[m] ∧ U[m+1])
                    let mut acc = self.enc(b, k, pos)?;
                    for m in (i..k).rev() {
                        let g = self.enc(b, m, pos)?;
                        let p = self.enc(a, m, pos)?;
                        let tail = self.and([Ok(p), Ok(acc)])?;
                        acc = self.or([Ok(g), Ok(tail)])?;
                    }
                    acc
                }
            }
            Formula::Since(a, b) => {
                // S[0] = G[0]; S[m] = G[m] ∨ (P[m] ∧ S[m−1])
                let mut acc = self.enc(b, 0, pos)?;
                for m in 1..=i {
                    let g = self.enc(b, m, pos)?;
                    let p = self.enc(a, m, pos)?;
                    let tail = self.and([Ok(p), Ok(acc)])?;
                    acc = self.or([Ok(g), Ok(tail)])?;
                }
                acc
            }
        })
    }

    /// Positive until chain starting at instant `i`; stage s owns index jₛ
    /// with j₀ ≥ i and jₛ₋₁ < jₛ, its goal at jₛ and its prefix on
    /// [jₛ₋₁+1, jₛ).
    fn until_chain(&mut self, stages: &[(Formula, Formula)], i: usize) -> Result<E, SmtError> {
        let k = self.k;
        if i + stages.len() > k + 1 {
            return Ok(E::C(false));
        }
        let mut cons: Vec<String> = Vec::new();
        let mut prev: Option<String> = None;
        for (s, (p, g)) in stages.iter().enumerate() {
            let j = self.fresh();
            if let Some(pj) = &prev {
                cons.push(format!("(< {pj} {j})"));
            }
            let lo = i + s;
            let hi = k + 1 + s - stages.len();
            if lo > 0 {
                cons.push(format!("(<= {lo} {j})"));
            }
            if hi < k {
                cons.push(format!("(<= {j} {hi})"));
            }
            for m in lo..=hi {
                match self.enc(g, m, true)? {
                    E::C(true) => {}
                    E::C(false) => cons.push(format!("(not (= {j} {m}))")),
                    E::S(e) => cons.push(format!("(=> (= {j} {m}) {e})")),
                }
            }
            for m in i..hi {
                let guard = match &prev {
                    None => format!("(< {m} {j})"),
                    Some(pj) => format!("(and (< {pj} {m}) (< {m} {j}))"),
                };
                match self.enc(p, m, true)? {
                    E::C(true) => {}
                    E::C(false) => cons.push(format!("(not {guard})")),
                    E::S(e) => cons.push(format!("(=> {guard} {e})")),
                }
            }
            prev = Some(j);
        }
        Ok(if cons.is_empty() { E::C(true) } else { E::S(nary("and", cons)) })
    }

    fn assert_at(&mut self, f: &Formula, i: usize, out: &mut Vec<String>) -> Result<(), SmtError> {
        match f {
            Formula::And(parts) => {
                for p in parts {
                    self.assert_at(p, i, out)?;
                }
            }
            Formula::Always(a) => {
                for m in i..=self.k {
                    self.assert_at(a, m, out)?;
                }
            }
            _ => match self.enc(f, i, true)? {
                E::C(true) => {}
                E::C(false) => out.push("false".to_string()),
                E::S(s) => out.push(s),
            },
        }
        Ok(())
    }
}

/// Split P U (G ∧ ○(P' U G')) chains into (prefix, goal) stages.
fn chain_stages(p: &Formula, g: &Formula) -> Vec<(Formula, Formula)> {
    let mut out = Vec::new();
    let (mut p, mut g) = (p.clone(), g.clone());
    loop {
        let next = match &g {
            Formula::And(parts) => match parts.last() {
                Some(Formula::Next(inner)) => match inner.as_ref() {
                    Formula::Until(p2, g2) => {
                        let rest = Formula::and(parts[..parts.len() - 1].to_vec());
                        Some((rest, (**p2).clone(), (**g2).clone()))
                    }
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        };
        match next {
            Some((rest, p2, g2)) => {
                out.push((p, rest));
                p = p2;
                g = g2;
            }
            None => {
                out.push((p, g));
                return out;
            }
        }
    }
}

/// Encode `f` at instant 0 over K+1 instants. `n_objects` fixes the range
/// of the primitive code π ∈ [0, 4n].
pub fn encode(f: &Formula, k: usize, n_objects: usize) -> Result<EncodedProblem, SmtError> {
    let mut enc = Encoder { k, n_objects, aux: Vec::new() };
    let mut assertions = Vec::new();
    enc.assert_at(f, 0, &mut assertions)?;
    let mut declarations = Vec::new();
    for v in f.variables() {
        let sort = if is_real_var(&v) { Sort::Real } else { Sort::Int };
        for i in 0..=k {
            declarations.push((v.clone(), i, sort));
        }
    }
    for p in f.propositions() {
        for i in 0..=k {
            declarations.push((p.clone(), i, Sort::Bool));
        }
    }
    let max_code = PrimitiveKind::code_count(n_objects) - 1;
    for i in 1..=k {
        declarations.push((PI.to_string(), i, Sort::Int));
        assertions.push(format!("(and (<= 0 {s}) (<= {s} {max_code}))", s = symbol(PI, i)));
    }
    for j in &enc.aux {
        assertions.push(format!("(and (<= 0 {j}) (<= {j} {k}))"));
    }
    Ok(EncodedProblem { k, n_objects, declarations, assertions, aux_indices: enc.aux })
}

impl EncodedProblem {
    /// Complete SMT-LIB script: declarations, assertions, check-sat and a
    /// get-value request for every declared symbol.
    pub fn to_smt2(&self) -> String {
        let mut s = String::new();
        s.push_str("(set-option :produce-models true)\n(set-logic QF_LIRA)\n");
        for (v, i, sort) in &self.declarations {
            let _ = writeln!(s, "(declare-const {} {})", symbol(v, *i), sort.smt());
        }
        for j in &self.aux_indices {
            let _ = writeln!(s, "(declare-const {j} Int)");
        }
        for a in &self.assertions {
            let _ = writeln!(s, "(assert {a})");
        }
        s.push_str("(check-sat)\n");
        if !self.declarations.is_empty() {
            let names: Vec<String> =
                self.declarations.iter().map(|(v, i, _)| symbol(v, *i)).collect();
            let _ = writeln!(s, "(get-value ({}))", names.join(" "));
        }
        s.push_str("(exit)\n");
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Bool(b) => b as i64 as f64,
            Value::Int(v) => v as f64,
            Value::Real(v) => v,
        }
    }
}

pub type Model = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq)]
pub enum SolverVerdict {
    Sat(Model),
    Unsat,
    Unknown(String),
}

/// Solver command from the environment, falling back to `z3`.
pub fn default_solver() -> String {
    std::env::var("COSMOPLAN_SOLVER").unwrap_or_else(|_| "z3".to_string())
}

/// Run `solver -in` on the problem. Crashes and timeouts yield `Unknown`.
pub fn solve(p: &EncodedProblem, solver: &str, timeout: Duration) -> Result<SolverVerdict, SmtError> {
    let script = p.to_smt2();
    let mut child = Command::new(solver)
        .arg("-in")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SmtError::SolverMissing(solver.to_string(), e.to_string()))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(script.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        buf
    });
    let status = match child.wait_timeout(timeout) {
        Ok(Some(st)) => st,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            let _ = reader.join();
            return Ok(SolverVerdict::Unknown(format!("timeout after {:?}", timeout)));
        }
        Err(e) => return Ok(SolverVerdict::Unknown(format!("wait failed: {e}"))),
    };
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let mut lines = out.splitn(2, '\n');
    let head = lines.next().unwrap_or("").trim();
    let rest = lines.next().unwrap_or("");
    match head {
        "unsat" => Ok(SolverVerdict::Unsat),
        "unknown" => Ok(SolverVerdict::Unknown("solver answered unknown".to_string())),
        "sat" => {
            let model = parse_model(rest)?;
            for (v, i, _) in &p.declarations {
                if !model.contains_key(&symbol(v, *i)) {
                    return Err(SmtError::Protocol {
                        msg: format!("model lacks {}", symbol(v, *i)),
                        raw: out.clone(),
                    });
                }
            }
            Ok(SolverVerdict::Sat(model))
        }
        _ => Ok(SolverVerdict::Unknown(format!(
            "solver exited with {status}: {}",
            out.trim()
        ))),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn parse_sexprs(text: &str) -> Result<Vec<Sx>, String> {
    let mut stack: Vec<Vec<Sx>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let list = stack.pop().ok_or("unbalanced `)`")?;
                stack.last_mut().ok_or("unbalanced `)`")?.push(Sx::List(list));
            }
            '|' => {
                let mut s = String::new();
                for d in chars.by_ref() {
                    if d == '|' {
                        break;
                    }
                    s.push(d);
                }
                stack.last_mut().unwrap().push(Sx::Atom(s));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sx::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced `(`".to_string());
    }
    Ok(stack.pop().unwrap())
}

fn sx_value(e: &Sx) -> Option<Value> {
    match e {
        Sx::Atom(a) => match a.as_str() {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ if a.contains('.') => a.parse().ok().map(Value::Real),
            _ => a.parse().ok().map(Value::Int),
        },
        Sx::List(items) => match items.as_slice() {
            [Sx::Atom(op), x] if op == "-" => match sx_value(x)? {
                Value::Int(v) => Some(Value::Int(-v)),
                Value::Real(v) => Some(Value::Real(-v)),
                Value::Bool(_) => None,
            },
            [Sx::Atom(op), a, b] if op == "/" => {
                Some(Value::Real(sx_value(a)?.as_f64() / sx_value(b)?.as_f64()))
            }
            [Sx::Atom(op), x] if op == "to_real" => Some(Value::Real(sx_value(x)?.as_f64())),
            _ => None,
        },
    }
}

/// Parse a get-value response `((name value) ...)`.
pub fn parse_model(text: &str) -> Result<Model, SmtError> {
    let proto = |msg: String| SmtError::Protocol { msg, raw: text.to_string() };
    let exprs = parse_sexprs(text).map_err(proto)?;
    let mut model = Model::new();
    for e in exprs {
        let Sx::List(pairs) = e else {
            return Err(proto(format!("unexpected atom in model: {e:?}")));
        };
        for pair in pairs {
            match &pair {
                Sx::List(kv) if kv.len() == 2 => {
                    let Sx::Atom(name) = &kv[0] else {
                        return Err(proto(format!("bad binding {pair:?}")));
                    };
                    let v = sx_value(&kv[1])
                        .ok_or_else(|| proto(format!("bad value for {name}")))?;
                    model.insert(name.clone(), v);
                }
                _ => return Err(proto(format!("bad binding {pair:?}"))),
            }
        }
    }
    Ok(model)
}

/// Rebuild the trace from a total model.
pub fn decode(model: &Model, p: &EncodedProblem) -> Result<Trace, SmtError> {
    let mut tr = Trace::new(p.k);
    let missing = |name: String| SmtError::Protocol {
        msg: format!("model lacks {name}"),
        raw: format!("{model:?}"),
    };
    for (v, i, sort) in &p.declarations {
        let name = symbol(v, *i);
        let val = *model.get(&name).ok_or_else(|| missing(name.clone()))?;
        match sort {
            Sort::Bool => {
                let b = matches!(val, Value::Bool(true));
                tr.props.entry(v.clone()).or_insert_with(|| vec![false; p.k + 1])[*i] = b;
            }
            _ if v == PI => {
                let code = val.as_f64().round() as i64;
                let kind = PrimitiveKind::from_code(code, p.n_objects).ok_or_else(|| {
                    SmtError::Protocol { msg: format!("bad primitive code {code}"), raw: name }
                })?;
                tr.prims[*i] = Some(kind);
            }
            _ => {
                tr.vars.entry(v.clone()).or_insert_with(|| vec![0.0; p.k + 1])[*i] = val.as_f64();
            }
        }
    }
    Ok(tr)
}

/// Encode, solve and decode in one call.
pub fn find_trace(
    f: &Formula,
    k: usize,
    n_objects: usize,
    solver: &str,
    timeout: Duration,
) -> Result<Option<Trace>, SolveFailure> {
    let p = encode(f, k, n_objects)?;
    match solve(&p, solver, timeout)? {
        SolverVerdict::Sat(m) => Ok(Some(decode(&m, &p)?)),
        SolverVerdict::Unsat => Ok(None),
        SolverVerdict::Unknown(r) => Err(SolveFailure::Unknown(r)),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveFailure {
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error("solver gave no verdict: {0}")]
    Unknown(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cltlb::Lin;

    #[test]
    fn always_yields_one_assertion_per_instant() {
        let f = Formula::always(Lin::var("x", 0).ge(0));
        let p = encode(&f, 2, 0).unwrap();
        let x: Vec<_> = p.assertions.iter().filter(|a| a.contains("x@")).collect();
        assert_eq!(x.len(), 3);
        assert_eq!(x[0], "(>= (* 1 x@0) 0)");
    }

    #[test]
    fn max_becomes_ite() {
        let f = Formula::always(Formula::implies(
            Formula::next(Formula::True),
            Lin::new().plus(1, Term::max(Term::var("x", 1), Term::var("x", 0))).le(5),
        ));
        let p = encode(&f, 1, 0).unwrap();
        assert!(p.assertions.iter().any(|a| a == "(<= (* 1 (ite (> x@1 x@0) x@1 x@0)) 5)"));
    }

    #[test]
    fn chained_until_shares_ordered_indices() {
        let stage = |n: &str, rest: Option<Formula>| {
            let g = Formula::prop(n);
            let g = match rest {
                None => g,
                Some(r) => Formula::and(vec![g, Formula::next(r)]),
            };
            Formula::until(Formula::True, g)
        };
        let f = stage("a", Some(stage("b", Some(stage("c", None)))));
        let p = encode(&f, 4, 0).unwrap();
        assert_eq!(p.aux_indices, vec!["j1", "j2", "j3"]);
        let all = p.assertions.join(" ");
        assert!(all.contains("(< j1 j2)") && all.contains("(< j2 j3)"));
    }

    #[test]
    fn unguarded_shift_is_rejected() {
        let f = Formula::always(Lin::var("x", 1).ge(0));
        assert!(matches!(encode(&f, 2, 0), Err(SmtError::ShiftOutOfRange { .. })));
    }

    #[test]
    fn model_parser_reads_negatives_and_fractions() {
        let m = parse_model("((x@0 (- 3))\n (y@1 (/ 1.0 4.0)) (p@0 true) (z@2 (- 2.5)))").unwrap();
        assert_eq!(m["x@0"], Value::Int(-3));
        assert_eq!(m["y@1"], Value::Real(0.25));
        assert_eq!(m["p@0"], Value::Bool(true));
        assert_eq!(m["z@2"], Value::Real(-2.5));
        assert!(parse_model("((x@0 1)").is_err());
    }

    #[test]
    fn decode_maps_primitive_codes() {
        let f = Formula::prim(PrimitiveKind::Res(2));
        let p = encode(&Formula::next(f), 3, 2).unwrap();
        let mut m = Model::new();
        for i in 1..=3 {
            m.insert(symbol(PI, i), Value::Int(if i == 3 { 8 } else { 0 }));
        }
        let tr = decode(&m, &p).unwrap();
        assert_eq!(tr.prims[3], Some(PrimitiveKind::Res(2)));
        assert_eq!(tr.prims[1], Some(PrimitiveKind::GoTo));
    }
}
