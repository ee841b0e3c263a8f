//! Mission decomposition and compositional verification.
//!
//! Local missions are natural projections of the global mission. Whether
//! their joint behaviour stays inside the global mission is checked with an
//! asymmetric assume-guarantee rule whose assumption is learned by L*.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{
    chain_word, included, is_request, is_response, sync_product, Alphabet, AutomataError, Dfa,
    Event, Inclusion, Word,
};

#[derive(Debug, Error, PartialEq)]
pub enum MissionError {
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error("local alphabets do not cover the global alphabet: `{0}` missing")]
    Uncovered(String),
    #[error("mission of agent {agent} is not a single chain (branching at states {states:?})")]
    NotSequential { agent: usize, states: Vec<usize> },
    #[error("anchor event `{0}` not found in responder mission")]
    AnchorNotFound(String),
    #[error("agent index {0} out of range")]
    BadAgent(usize),
    #[error("request and response events disagree on the object")]
    ObjectMismatch,
}

/// K_i = P_i(global) for each agent alphabet.
pub fn decompose(global: &Dfa, local_alphabets: &[Alphabet]) -> Result<Vec<Dfa>, MissionError> {
    let mut union = Alphabet::default();
    for a in local_alphabets {
        union = union.union(a);
    }
    for e in global.alphabet().iter() {
        if !union.contains(e) {
            return Err(MissionError::Uncovered(e.clone()));
        }
    }
    local_alphabets
        .iter()
        .map(|a| global.project(a).map_err(MissionError::from))
        .collect()
}

/// Membership query: does DFA(t) composed with `module` stay inside
/// `property`? DFA(t) generates the prefixes of t over `asm_alphabet`.
pub fn membership_query(
    t: &[Event],
    asm_alphabet: &Alphabet,
    module: &Dfa,
    property: &Dfa,
) -> Result<bool, MissionError> {
    let chain = Dfa::chain(t, asm_alphabet)?;
    let prod = sync_product(&[chain, module.clone()])?;
    Ok(included(&prod, property).holds())
}

/// Minimally adequate teacher for L*.
pub trait Teacher {
    fn member(&mut self, w: &[Event]) -> bool;
    /// `None` when the hypothesis is accepted, otherwise a word on which the
    /// hypothesis (marked language) and the target disagree.
    fn equivalent(&mut self, hypothesis: &Dfa) -> Option<Word>;
}

/// Angluin observation table.
#[derive(Clone, Debug)]
pub struct ObservationTable {
    pub alphabet: Alphabet,
    pub s: Vec<Word>,
    pub e: Vec<Word>,
    pub t: HashMap<Word, bool>,
}

impl ObservationTable {
    pub fn new(alphabet: Alphabet) -> Self {
        ObservationTable { alphabet, s: vec![Vec::new()], e: vec![Vec::new()], t: HashMap::new() }
    }

    fn concat(a: &[Event], b: &[Event]) -> Word {
        let mut w = a.to_vec();
        w.extend_from_slice(b);
        w
    }

    pub fn row(&self, u: &[Event]) -> Vec<bool> {
        self.e.iter().map(|e| self.t[&Self::concat(u, e)]).collect()
    }

    fn extensions(&self) -> Vec<Word> {
        let mut out = Vec::new();
        for u in &self.s {
            for a in self.alphabet.iter() {
                let mut w = u.clone();
                w.push(a.clone());
                out.push(w);
            }
        }
        out
    }

    /// Fill every missing cell of (S ∪ S·Σ)·E.
    pub fn fill<T: Teacher>(&mut self, teacher: &mut T) {
        let mut prefixes = self.s.clone();
        prefixes.extend(self.extensions());
        for u in &prefixes {
            for e in &self.e {
                let w = Self::concat(u, e);
                if !self.t.contains_key(&w) {
                    let v = teacher.member(&w);
                    self.t.insert(w, v);
                }
            }
        }
    }

    /// An extension whose row matches no row of S.
    pub fn unclosed(&self) -> Option<Word> {
        let rows: BTreeSet<Vec<bool>> = self.s.iter().map(|u| self.row(u)).collect();
        self.extensions().into_iter().find(|w| !rows.contains(&self.row(w)))
    }

    /// A suffix a·e that separates two equal rows of S.
    pub fn inconsistency(&self) -> Option<Word> {
        for (i, s1) in self.s.iter().enumerate() {
            for s2 in &self.s[i + 1..] {
                if self.row(s1) != self.row(s2) {
                    continue;
                }
                for a in self.alphabet.iter() {
                    for e in &self.e {
                        let mut x = s1.clone();
                        x.push(a.clone());
                        let mut y = s2.clone();
                        y.push(a.clone());
                        if self.t[&Self::concat(&x, e)] != self.t[&Self::concat(&y, e)] {
                            let mut suffix = vec![a.clone()];
                            suffix.extend_from_slice(e);
                            return Some(suffix);
                        }
                    }
                }
            }
        }
        None
    }

    pub fn is_closed(&self) -> bool {
        self.unclosed().is_none()
    }

    pub fn is_consistent(&self) -> bool {
        self.inconsistency().is_none()
    }

    pub fn add_prefixes(&mut self, w: &[Event]) {
        for i in 0..=w.len() {
            let p = w[..i].to_vec();
            if !self.s.contains(&p) {
                self.s.push(p);
            }
        }
    }

    /// Candidate DFA: one state per distinct row of S; marked iff T(u) = 1.
    pub fn hypothesis(&self) -> Dfa {
        let mut ids: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
        let mut reps: Vec<Word> = Vec::new();
        // ε first so it becomes the initial state
        for u in &self.s {
            let r = self.row(u);
            if !ids.contains_key(&r) {
                ids.insert(r, reps.len());
                reps.push(u.clone());
            }
        }
        let mut marked = Vec::new();
        let mut tr: Vec<(usize, String, usize)> = Vec::new();
        for (i, u) in reps.iter().enumerate() {
            if self.t[u] {
                marked.push(i);
            }
            for a in self.alphabet.iter() {
                let mut w = u.clone();
                w.push(a.clone());
                tr.push((i, a.clone(), ids[&self.row(&w)]));
            }
        }
        let tr_ref: Vec<(usize, &str, usize)> = tr.iter().map(|(s, e, t)| (*s, e.as_str(), *t)).collect();
        Dfa::from_parts(self.alphabet.clone(), reps.len(), 0, &marked, &tr_ref)
            .expect("closed table yields a well-formed automaton")
    }
}

/// Run L* to completion. `on_table` observes every closed and consistent
/// table before a hypothesis is proposed.
pub fn lstar<T: Teacher>(
    alphabet: &Alphabet,
    teacher: &mut T,
    mut on_table: impl FnMut(&ObservationTable),
) -> Dfa {
    let mut table = ObservationTable::new(alphabet.clone());
    loop {
        table.fill(teacher);
        loop {
            if let Some(w) = table.unclosed() {
                table.s.push(w);
                table.fill(teacher);
                continue;
            }
            if let Some(suffix) = table.inconsistency() {
                table.e.push(suffix);
                table.fill(teacher);
                continue;
            }
            break;
        }
        on_table(&table);
        let hyp = table.hypothesis();
        match teacher.equivalent(&hyp) {
            None => return hyp,
            Some(c) => table.add_prefixes(&c),
        }
    }
}

/// Outcome of assumption learning.
#[derive(Clone, Debug)]
pub enum LearnOutcome {
    Assumption(Dfa),
    Violation(Word),
}

#[derive(Clone, Debug, Default)]
pub struct LearnStats {
    pub membership_queries: usize,
    pub equivalence_queries: usize,
}

/// Teacher built on `membership_query`. Queries are memoized, and since
/// the target language is prefix-closed a word with a known rejected prefix
/// is rejected without asking.
struct AgTeacher<'a> {
    module: &'a Dfa,
    property: &'a Dfa,
    env: &'a Dfa,
    alphabet: Alphabet,
    memo: HashMap<Word, bool>,
    stats: LearnStats,
    violation: Option<Word>,
}

impl AgTeacher<'_> {
    fn query(&mut self, w: &[Event]) -> bool {
        if let Some(&v) = self.memo.get(w) {
            return v;
        }
        for i in 0..w.len() {
            if self.memo.get(&w[..i]) == Some(&false) {
                self.memo.insert(w.to_vec(), false);
                return false;
            }
        }
        self.stats.membership_queries += 1;
        let v = membership_query(w, &self.alphabet, self.module, self.property)
            .expect("query words are drawn from the assumption alphabet");
        self.memo.insert(w.to_vec(), v);
        v
    }

    /// First prefix of `c` on which the untrimmed hypothesis and the
    /// membership oracle disagree.
    fn disagreement(&mut self, hyp: &Dfa, c: &[Event]) -> Word {
        for i in 0..=c.len() {
            let p = &c[..i];
            if hyp.marks(p) != self.query(p) {
                return p.to_vec();
            }
        }
        c.to_vec()
    }
}

impl Teacher for AgTeacher<'_> {
    fn member(&mut self, w: &[Event]) -> bool {
        self.query(w)
    }

    fn equivalent(&mut self, hyp: &Dfa) -> Option<Word> {
        self.stats.equivalence_queries += 1;
        let assumption = hyp.trim_to_marked();
        // (i) <A> M <P>
        let composed = sync_product(&[assumption.clone(), self.module.clone()]).expect("non-empty");
        if let Inclusion::Fails(w) = included(&composed, self.property) {
            let c = self.alphabet.project_word(&w);
            return Some(self.disagreement(hyp, &c));
        }
        // (ii) <true> env <A>
        match included(self.env, &assumption) {
            Inclusion::Holds => None,
            Inclusion::Fails(c) => {
                let c = self.alphabet.project_word(&c);
                if !self.query(&c) {
                    self.violation = Some(c);
                    None
                } else {
                    Some(self.disagreement(hyp, &c))
                }
            }
        }
    }
}

/// Learn an assumption A with ⟨A⟩ module ⟨property⟩ and ⟨true⟩ env ⟨A⟩, or
/// return a global violation trace. The assumption alphabet defaults to the
/// environment's alphabet.
pub fn learn_assumption(
    module: &Dfa,
    property: &Dfa,
    env: &Dfa,
    asm_alphabet: Option<&Alphabet>,
) -> Result<(LearnOutcome, LearnStats), MissionError> {
    let alphabet = asm_alphabet.cloned().unwrap_or_else(|| env.alphabet().clone());
    if alphabet.is_empty() {
        return Err(MissionError::Automata(AutomataError::Empty("assumption alphabet")));
    }
    let mut teacher = AgTeacher {
        module,
        property,
        env,
        alphabet: alphabet.clone(),
        memo: HashMap::new(),
        stats: LearnStats::default(),
        violation: None,
    };
    let hyp = lstar(&alphabet, &mut teacher, |_| {});
    let stats = teacher.stats.clone();
    if let Some(c) = teacher.violation {
        let chain = Dfa::chain(&c, &alphabet)?;
        let prod = sync_product(&[chain, module.clone()])?;
        let witness = match included(&prod, property) {
            Inclusion::Fails(w) => w,
            Inclusion::Holds => c,
        };
        return Ok((LearnOutcome::Violation(witness), stats));
    }
    Ok((LearnOutcome::Assumption(hyp.trim_to_marked().minimize()), stats))
}

#[derive(Clone, Debug)]
pub enum RuleVerdict {
    Holds { assumptions: Vec<Dfa> },
    Fails { counterexample: Word },
}

impl RuleVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, RuleVerdict::Holds { .. })
    }
}

/// Asymmetric rule ⟨A⟩M1⟨P⟩, ⟨true⟩M2⟨A⟩ ⊢ ⟨true⟩M1∥M2⟨P⟩. With more than two
/// modules the environment is the product of the remaining ones.
pub fn verify_rule(modules: &[Dfa], property: &Dfa) -> Result<RuleVerdict, MissionError> {
    verify_rule_with_stats(modules, property).map(|(v, _)| v)
}

pub fn verify_rule_with_stats(
    modules: &[Dfa],
    property: &Dfa,
) -> Result<(RuleVerdict, LearnStats), MissionError> {
    match modules {
        [] => Err(MissionError::Automata(AutomataError::Empty("no modules"))),
        [m] => Ok((
            match included(m, property) {
                Inclusion::Holds => RuleVerdict::Holds { assumptions: Vec::new() },
                Inclusion::Fails(w) => RuleVerdict::Fails { counterexample: w },
            },
            LearnStats::default(),
        )),
        [m1, rest @ ..] => {
            let env = sync_product(rest)?;
            let (outcome, stats) = learn_assumption(m1, property, &env, None)?;
            Ok((
                match outcome {
                    LearnOutcome::Assumption(a) => RuleVerdict::Holds { assumptions: vec![a] },
                    LearnOutcome::Violation(w) => RuleVerdict::Fails { counterexample: w },
                },
                stats,
            ))
        }
    }
}

/// Remove P_i(t) and its extensions from each local mission. Agents on whose
/// alphabet t projects to ε are left alone unless t projects to ε everywhere,
/// in which case every mission is emptied. The flag per agent reports whether
/// the projected word was present.
pub fn refine_from_counterexample(
    locals: &[Dfa],
    t: &[Event],
) -> Result<(Vec<Dfa>, Vec<bool>), MissionError> {
    let projections: Vec<Word> = locals.iter().map(|d| d.alphabet().project_word(t)).collect();
    let all_empty = projections.iter().all(|p| p.is_empty());
    let mut out = Vec::new();
    let mut flags = Vec::new();
    for (d, p) in locals.iter().zip(&projections) {
        if p.is_empty() && !all_empty {
            out.push(d.clone());
            flags.push(true);
            continue;
        }
        let (nd, present) = d.subtract_word(p)?;
        out.push(nd);
        flags.push(present);
    }
    Ok((out, flags))
}

/// A request/response pair between two agents about one object. Agents and
/// objects are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinationRequest {
    pub requester: usize,
    pub responder: usize,
    pub object: usize,
}

impl CoordinationRequest {
    pub fn request_event(&self) -> Event {
        format!("?O{}Away", self.object)
    }

    pub fn response_event(&self) -> Event {
        format!("!O{}Away", self.object)
    }
}

/// Object id named by a request or response event.
pub fn coordination_object(e: &str) -> Option<usize> {
    let body = e.strip_prefix('?').or_else(|| e.strip_prefix('!'))?;
    body.strip_prefix('O')?.strip_suffix("Away")?.parse().ok()
}

fn chain_of(d: &Dfa, agent: usize) -> Result<Word, MissionError> {
    chain_word(d).map_err(|states| MissionError::NotSequential { agent, states })
}

/// Insert the request before the requester's first task event (after any
/// requests already there) and the response right after `anchor` (after any
/// responses already there). Events already present are left alone.
pub fn insert_coordination(
    locals: &[Dfa],
    req: &CoordinationRequest,
    anchor: &str,
) -> Result<Vec<Dfa>, MissionError> {
    let (ri, si) = (req.requester, req.responder);
    if ri == 0 || ri > locals.len() {
        return Err(MissionError::BadAgent(ri));
    }
    if si == 0 || si > locals.len() {
        return Err(MissionError::BadAgent(si));
    }
    let (q, r) = (req.request_event(), req.response_event());
    if coordination_object(&q) != coordination_object(&r) {
        return Err(MissionError::ObjectMismatch);
    }
    let mut out = locals.to_vec();

    let resp_word = chain_of(&locals[si - 1], si)?;
    let pos = resp_word
        .iter()
        .position(|e| e == anchor)
        .ok_or_else(|| MissionError::AnchorNotFound(anchor.to_string()))?;

    let req_word = chain_of(&locals[ri - 1], ri)?;
    if !req_word.contains(&q) {
        let at = req_word.iter().take_while(|e| is_request(e)).count();
        let mut w = req_word.clone();
        w.insert(at, q.clone());
        let alphabet = locals[ri - 1].alphabet().with(&q);
        out[ri - 1] = Dfa::chain(&w, &alphabet)?;
    }

    let resp_word = chain_of(&out[si - 1], si)?;
    if !resp_word.contains(&r) {
        let mut at = pos + 1;
        while at < resp_word.len() && is_response(&resp_word[at]) {
            at += 1;
        }
        let mut w = resp_word.clone();
        w.insert(at, r.clone());
        let alphabet = out[si - 1].alphabet().with(&r);
        out[si - 1] = Dfa::chain(&w, &alphabet)?;
    }
    Ok(out)
}

/// Undo an insertion by projecting the event away.
pub fn remove_event(d: &Dfa, e: &str) -> Result<Dfa, MissionError> {
    if !d.alphabet().contains(e) {
        return Ok(d.clone());
    }
    Ok(d.project(&d.alphabet().without(e))?)
}
