//! Finite automata over named event alphabets.
//!
//! A [`Dfa`] carries two language roles. The *generated* language is the set
//! of words that can be traced from the initial state (every reachable state
//! counts), which is always prefix-closed. The *marked* language is the subset
//! of generated words that end in a marked state.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Event = String;
pub type Word = Vec<Event>;

#[derive(Debug, Error, PartialEq)]
pub enum AutomataError {
    #[error("event `{0}` is not in the alphabet")]
    UnknownEvent(String),
    #[error("duplicate event `{0}` in alphabet")]
    DuplicateEvent(String),
    #[error("alphabet is not a subset: `{0}` missing")]
    NotSubset(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("malformed automaton: {0}")]
    Malformed(String),
    #[error("io: {0}")]
    Io(String),
}

pub fn is_request(e: &str) -> bool {
    e.starts_with('?')
}

pub fn is_response(e: &str) -> bool {
    e.starts_with('!')
}

/// Build a word from string slices.
pub fn word<S: AsRef<str>>(events: &[S]) -> Word {
    events.iter().map(|e| e.as_ref().to_string()).collect()
}

pub fn format_word(w: &[Event]) -> String {
    if w.is_empty() {
        "ε".to_string()
    } else {
        w.join("·")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    events: IndexSet<Event>,
}

impl Alphabet {
    pub fn new<S: AsRef<str>>(events: &[S]) -> Result<Self, AutomataError> {
        let mut set = IndexSet::new();
        for e in events {
            if !set.insert(e.as_ref().to_string()) {
                return Err(AutomataError::DuplicateEvent(e.as_ref().to_string()));
            }
        }
        Ok(Alphabet { events: set })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn contains(&self, e: &str) -> bool {
        self.events.contains(e)
    }

    pub fn index_of(&self, e: &str) -> Option<usize> {
        self.events.get_index_of(e)
    }

    pub fn get(&self, i: usize) -> &Event {
        &self.events[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.events.iter()
    }

    pub fn is_subset(&self, other: &Alphabet) -> bool {
        self.events.iter().all(|e| other.contains(e))
    }

    /// Union keeping `self`'s order first.
    pub fn union(&self, other: &Alphabet) -> Alphabet {
        let mut events = self.events.clone();
        for e in other.iter() {
            events.insert(e.clone());
        }
        Alphabet { events }
    }

    pub fn without(&self, e: &str) -> Alphabet {
        let events = self.events.iter().filter(|x| *x != e).cloned().collect();
        Alphabet { events }
    }

    pub fn with(&self, e: &str) -> Alphabet {
        let mut events = self.events.clone();
        events.insert(e.to_string());
        Alphabet { events }
    }

    /// Natural projection of a word onto this alphabet.
    pub fn project_word(&self, w: &[Event]) -> Word {
        w.iter().filter(|e| self.contains(e)).cloned().collect()
    }

    pub fn to_vec(&self) -> Vec<Event> {
        self.events.iter().cloned().collect()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.to_vec().join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Acceptance {
    Marked,
    Generated,
    Rejected,
}

/// Which language an inclusion check compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Generated,
    Marked,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inclusion {
    Holds,
    Fails(Word),
}

impl Inclusion {
    pub fn holds(&self) -> bool {
        matches!(self, Inclusion::Holds)
    }
}

/// Deterministic automaton with partial transitions. A DFA with zero states
/// represents the empty language (not even ε is generated).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    alphabet: Alphabet,
    delta: Vec<Vec<Option<usize>>>,
    marked: Vec<bool>,
    initial: usize,
}

impl Dfa {
    pub fn empty(alphabet: Alphabet) -> Dfa {
        Dfa {
            alphabet,
            delta: Vec::new(),
            marked: Vec::new(),
            initial: 0,
        }
    }

    /// Build from explicit parts. Transitions name events by string.
    pub fn from_parts(
        alphabet: Alphabet,
        states: usize,
        initial: usize,
        marked: &[usize],
        transitions: &[(usize, &str, usize)],
    ) -> Result<Dfa, AutomataError> {
        if states == 0 {
            if !marked.is_empty() || !transitions.is_empty() {
                return Err(AutomataError::Malformed("zero states with content".into()));
            }
            return Ok(Dfa::empty(alphabet));
        }
        if initial >= states {
            return Err(AutomataError::Malformed(format!("initial state {initial} out of range")));
        }
        let mut delta = vec![vec![None; alphabet.len()]; states];
        let mut mk = vec![false; states];
        for &m in marked {
            if m >= states {
                return Err(AutomataError::Malformed(format!("marked state {m} out of range")));
            }
            mk[m] = true;
        }
        for &(s, e, t) in transitions {
            let ei = alphabet
                .index_of(e)
                .ok_or_else(|| AutomataError::UnknownEvent(e.to_string()))?;
            if s >= states || t >= states {
                return Err(AutomataError::Malformed(format!("transition {s} -{e}-> {t} out of range")));
            }
            if let Some(prev) = delta[s][ei] {
                if prev != t {
                    return Err(AutomataError::Malformed(format!(
                        "nondeterministic transition from {s} on {e}"
                    )));
                }
            }
            delta[s][ei] = Some(t);
        }
        Ok(Dfa { alphabet, delta, marked: mk, initial })
    }

    /// Chain automaton generating exactly the prefixes of `w`; only the full
    /// word is marked.
    pub fn chain(w: &[Event], alphabet: &Alphabet) -> Result<Dfa, AutomataError> {
        let n = w.len() + 1;
        let mut delta = vec![vec![None; alphabet.len()]; n];
        for (i, e) in w.iter().enumerate() {
            let ei = alphabet
                .index_of(e)
                .ok_or_else(|| AutomataError::UnknownEvent(e.clone()))?;
            delta[i][ei] = Some(i + 1);
        }
        let mut marked = vec![false; n];
        marked[n - 1] = true;
        Ok(Dfa { alphabet: alphabet.clone(), delta, marked, initial: 0 })
    }

    /// Prefix-closure of a finite set of words, built as a trie. Words in the
    /// set are marked.
    pub fn prefix_closure(words: &[Word], alphabet: &Alphabet) -> Result<Dfa, AutomataError> {
        let mut delta: Vec<Vec<Option<usize>>> = vec![vec![None; alphabet.len()]];
        let mut marked = vec![false];
        for w in words {
            let mut s = 0;
            for e in w {
                let ei = alphabet
                    .index_of(e)
                    .ok_or_else(|| AutomataError::UnknownEvent(e.clone()))?;
                s = match delta[s][ei] {
                    Some(t) => t,
                    None => {
                        delta.push(vec![None; alphabet.len()]);
                        marked.push(false);
                        let t = delta.len() - 1;
                        delta[s][ei] = Some(t);
                        t
                    }
                };
            }
            marked[s] = true;
        }
        Ok(Dfa { alphabet: alphabet.clone(), delta, marked, initial: 0 })
    }

    /// Single-state automaton generating Σ*, state marked.
    pub fn universal(alphabet: &Alphabet) -> Dfa {
        Dfa {
            alphabet: alphabet.clone(),
            delta: vec![(0..alphabet.len()).map(|_| Some(0)).collect()],
            marked: vec![true],
            initial: 0,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn initial(&self) -> Option<usize> {
        if self.is_empty() {
            None
        } else {
            Some(self.initial)
        }
    }

    pub fn is_marked(&self, s: usize) -> bool {
        self.marked[s]
    }

    pub fn marked_states(&self) -> Vec<usize> {
        (0..self.num_states()).filter(|&s| self.marked[s]).collect()
    }

    pub fn step(&self, s: usize, event: usize) -> Option<usize> {
        self.delta[s][event]
    }

    pub fn step_named(&self, s: usize, e: &str) -> Option<usize> {
        self.alphabet.index_of(e).and_then(|i| self.delta[s][i])
    }

    /// All transitions as (src, event, dst), sorted.
    pub fn transitions(&self) -> Vec<(usize, Event, usize)> {
        let mut out = Vec::new();
        for (s, row) in self.delta.iter().enumerate() {
            for (ei, t) in row.iter().enumerate() {
                if let Some(t) = t {
                    out.push((s, self.alphabet.get(ei).clone(), *t));
                }
            }
        }
        out.sort();
        out
    }

    fn run(&self, w: &[Event]) -> Result<Option<usize>, AutomataError> {
        let mut cur = self.initial();
        for e in w {
            let ei = self
                .alphabet
                .index_of(e)
                .ok_or_else(|| AutomataError::UnknownEvent(e.clone()))?;
            cur = cur.and_then(|s| self.delta[s][ei]);
        }
        Ok(cur)
    }

    pub fn accepts(&self, w: &[Event]) -> Result<Acceptance, AutomataError> {
        Ok(match self.run(w)? {
            None => Acceptance::Rejected,
            Some(s) if self.marked[s] => Acceptance::Marked,
            Some(_) => Acceptance::Generated,
        })
    }

    pub fn generates(&self, w: &[Event]) -> bool {
        matches!(self.run(w), Ok(Some(_)))
    }

    pub fn marks(&self, w: &[Event]) -> bool {
        matches!(self.run(w), Ok(Some(s)) if self.marked[s])
    }

    /// Drop states unreachable from the initial state.
    pub fn reachable(&self) -> Dfa {
        if self.is_empty() {
            return self.clone();
        }
        let mut map = vec![usize::MAX; self.num_states()];
        let mut order = vec![self.initial];
        map[self.initial] = 0;
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            for t in self.delta[s].iter().flatten() {
                if map[*t] == usize::MAX {
                    map[*t] = order.len();
                    order.push(*t);
                }
            }
            i += 1;
        }
        let delta = order
            .iter()
            .map(|&s| self.delta[s].iter().map(|t| t.map(|t| map[t])).collect())
            .collect();
        let marked = order.iter().map(|&s| self.marked[s]).collect();
        Dfa { alphabet: self.alphabet.clone(), delta, marked, initial: 0 }
    }

    /// Restrict to the marked states: the generated language becomes the set
    /// of words all of whose prefixes are marked.
    pub fn trim_to_marked(&self) -> Dfa {
        if self.is_empty() || !self.marked[self.initial] {
            return Dfa::empty(self.alphabet.clone());
        }
        let delta = self
            .delta
            .iter()
            .map(|row| row.iter().map(|t| t.filter(|&t| self.marked[t])).collect())
            .collect();
        Dfa {
            alphabet: self.alphabet.clone(),
            delta,
            marked: self.marked.clone(),
            initial: self.initial,
        }
        .reachable()
    }

    /// Every reachable state marked: marked language = generated language.
    pub fn mark_all(&self) -> Dfa {
        let mut d = self.clone();
        d.marked = vec![true; d.num_states()];
        d
    }

    /// Partition-refinement minimization. Missing transitions go to an
    /// implicit sink that is distinct from every real state. The result is
    /// renumbered in breadth-first order (alphabet order breaks ties), so two
    /// equivalent automata minimize to identical structures.
    pub fn minimize(&self) -> Dfa {
        let d = self.reachable();
        let n = d.num_states();
        if n == 0 {
            return d;
        }
        let sink = n;
        let m = d.alphabet.len();
        // block ids: sink gets its own block
        let mut block: Vec<usize> = (0..=n)
            .map(|s| if s == sink { 0 } else if d.marked[s] { 1 } else { 2 })
            .collect();
        loop {
            let mut sigs: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
            let mut next = vec![0; n + 1];
            for s in 0..=n {
                let succ: Vec<usize> = (0..m)
                    .map(|e| {
                        if s == sink {
                            block[sink]
                        } else {
                            block[d.delta[s][e].unwrap_or(sink)]
                        }
                    })
                    .collect();
                let key = (block[s], succ);
                let len = sigs.len();
                next[s] = *sigs.entry(key).or_insert(len);
            }
            let before: BTreeSet<usize> = block.iter().copied().collect();
            let after: BTreeSet<usize> = next.iter().copied().collect();
            block = next;
            if before.len() == after.len() {
                break;
            }
        }
        // quotient, renumbered by BFS
        let sink_block = block[sink];
        let mut rep: BTreeMap<usize, usize> = BTreeMap::new();
        for s in 0..n {
            rep.entry(block[s]).or_insert(s);
        }
        let mut map: HashMap<usize, usize> = HashMap::new();
        let mut order = vec![block[d.initial]];
        map.insert(block[d.initial], 0);
        let mut i = 0;
        while i < order.len() {
            let s = rep[&order[i]];
            for e in 0..m {
                if let Some(t) = d.delta[s][e] {
                    let b = block[t];
                    if b != sink_block && !map.contains_key(&b) {
                        map.insert(b, order.len());
                        order.push(b);
                    }
                }
            }
            i += 1;
        }
        let delta = order
            .iter()
            .map(|b| {
                let s = rep[b];
                (0..m)
                    .map(|e| {
                        d.delta[s][e]
                            .filter(|&t| block[t] != sink_block)
                            .map(|t| map[&block[t]])
                    })
                    .collect()
            })
            .collect();
        let marked = order.iter().map(|b| d.marked[rep[b]]).collect();
        Dfa { alphabet: d.alphabet.clone(), delta, marked, initial: 0 }
    }

    /// Natural projection onto `sub`: erase other events, determinize by
    /// subset construction and minimize.
    pub fn project(&self, sub: &Alphabet) -> Result<Dfa, AutomataError> {
        if sub.is_empty() {
            return Err(AutomataError::Empty("projection alphabet"));
        }
        for e in sub.iter() {
            if !self.alphabet.contains(e) {
                return Err(AutomataError::NotSubset(e.clone()));
            }
        }
        if self.is_empty() {
            return Ok(Dfa::empty(sub.clone()));
        }
        let keep: Vec<Option<usize>> = self.alphabet.iter().map(|e| sub.index_of(e)).collect();
        let closure = |set: &BTreeSet<usize>| -> BTreeSet<usize> {
            let mut out = set.clone();
            let mut stack: Vec<usize> = set.iter().copied().collect();
            while let Some(s) = stack.pop() {
                for (ei, t) in self.delta[s].iter().enumerate() {
                    if keep[ei].is_none() {
                        if let Some(t) = t {
                            if out.insert(*t) {
                                stack.push(*t);
                            }
                        }
                    }
                }
            }
            out
        };
        let start = closure(&BTreeSet::from([self.initial]));
        let mut index: HashMap<BTreeSet<usize>, usize> = HashMap::new();
        let mut sets = vec![start.clone()];
        index.insert(start, 0);
        let mut delta: Vec<Vec<Option<usize>>> = Vec::new();
        let mut i = 0;
        while i < sets.len() {
            let cur = sets[i].clone();
            let mut row = vec![None; sub.len()];
            for (ei, k) in keep.iter().enumerate() {
                let Some(k) = k else { continue };
                let moved: BTreeSet<usize> =
                    cur.iter().filter_map(|&s| self.delta[s][ei]).collect();
                if moved.is_empty() {
                    continue;
                }
                let target = closure(&moved);
                let id = match index.get(&target) {
                    Some(&id) => id,
                    None => {
                        sets.push(target.clone());
                        index.insert(target, sets.len() - 1);
                        sets.len() - 1
                    }
                };
                row[*k] = Some(id);
            }
            delta.push(row);
            i += 1;
        }
        let marked = sets.iter().map(|set| set.iter().any(|&s| self.marked[s])).collect();
        Ok(Dfa { alphabet: sub.clone(), delta, marked, initial: 0 }.minimize())
    }

    /// Same automaton over a larger alphabet; the new events get no
    /// transitions.
    pub fn extend_alphabet(&self, alphabet: &Alphabet) -> Result<Dfa, AutomataError> {
        for e in self.alphabet.iter() {
            if !alphabet.contains(e) {
                return Err(AutomataError::NotSubset(e.clone()));
            }
        }
        let delta = self
            .delta
            .iter()
            .map(|row| {
                alphabet
                    .iter()
                    .map(|e| self.alphabet.index_of(e).and_then(|i| row[i]))
                    .collect()
            })
            .collect();
        Ok(Dfa {
            alphabet: alphabet.clone(),
            delta,
            marked: self.marked.clone(),
            initial: self.initial,
        })
    }

    /// Remove `w` and all its extensions from the generated language. Returns
    /// the new automaton and whether `w` was generated at all.
    pub fn subtract_word(&self, w: &[Event]) -> Result<(Dfa, bool), AutomataError> {
        if self.run(w)?.is_none() {
            return Ok((self.clone(), false));
        }
        if w.is_empty() {
            return Ok((Dfa::empty(self.alphabet.clone()), true));
        }
        // product with the chain of w: track position along w, or "off" once
        // the run has left it
        let d = self.reachable();
        let n = w.len();
        let word_idx: Vec<usize> = w.iter().map(|e| d.alphabet.index_of(e).unwrap()).collect();
        let mut index: HashMap<(usize, Option<usize>), usize> = HashMap::new();
        let mut states = vec![(d.initial, Some(0usize))];
        index.insert((d.initial, Some(0)), 0);
        let mut delta: Vec<Vec<Option<usize>>> = Vec::new();
        let mut i = 0;
        while i < states.len() {
            let (s, pos) = states[i];
            let mut row = vec![None; d.alphabet.len()];
            for ei in 0..d.alphabet.len() {
                let Some(t) = d.delta[s][ei] else { continue };
                let npos = match pos {
                    Some(p) if word_idx[p] == ei => {
                        if p + 1 == n {
                            continue; // completing w is forbidden
                        }
                        Some(p + 1)
                    }
                    _ => None,
                };
                let key = (t, npos);
                let id = match index.get(&key) {
                    Some(&id) => id,
                    None => {
                        states.push(key);
                        index.insert(key, states.len() - 1);
                        states.len() - 1
                    }
                };
                row[ei] = Some(id);
            }
            delta.push(row);
            i += 1;
        }
        let marked = states.iter().map(|(s, _)| d.marked[*s]).collect();
        let out = Dfa { alphabet: d.alphabet.clone(), delta, marked, initial: 0 }.minimize();
        Ok((out, true))
    }

    /// Shortest marked word, if any (breadth-first, alphabet order).
    pub fn shortest_marked(&self) -> Option<Word> {
        let init = self.initial()?;
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.num_states()];
        let mut seen = vec![false; self.num_states()];
        seen[init] = true;
        let mut queue = VecDeque::from([init]);
        while let Some(s) = queue.pop_front() {
            if self.marked[s] {
                let mut w = Vec::new();
                let mut cur = s;
                while let Some((p, e)) = prev[cur] {
                    w.push(self.alphabet.get(e).clone());
                    cur = p;
                }
                w.reverse();
                return Some(w);
            }
            for e in 0..self.alphabet.len() {
                if let Some(t) = self.delta[s][e] {
                    if !seen[t] {
                        seen[t] = true;
                        prev[t] = Some((s, e));
                        queue.push_back(t);
                    }
                }
            }
        }
        None
    }

    pub fn from_json_str(s: &str) -> Result<Dfa, AutomataError> {
        let raw: DfaJson = serde_json::from_str(s).map_err(|e| AutomataError::Malformed(e.to_string()))?;
        raw.into_dfa()
    }

    pub fn to_json_string(&self) -> String {
        let raw = DfaJson::from_dfa(self);
        serde_json::to_string_pretty(&raw).expect("dfa serializes")
    }

    pub fn load(path: &Path) -> Result<Dfa, AutomataError> {
        let s = std::fs::read_to_string(path).map_err(|e| AutomataError::Io(format!("{}: {e}", path.display())))?;
        Dfa::from_json_str(&s)
    }

    pub fn save(&self, path: &Path) -> Result<(), AutomataError> {
        std::fs::write(path, self.to_json_string() + "\n")
            .map_err(|e| AutomataError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Serialize, Deserialize)]
struct DfaJson {
    alphabet: Vec<String>,
    states: usize,
    initial: usize,
    marked: Vec<usize>,
    transitions: Vec<(usize, String, usize)>,
}

impl DfaJson {
    fn from_dfa(d: &Dfa) -> DfaJson {
        DfaJson {
            alphabet: d.alphabet.to_vec(),
            states: d.num_states(),
            initial: d.initial,
            marked: d.marked_states(),
            transitions: d.transitions(),
        }
    }

    fn into_dfa(self) -> Result<Dfa, AutomataError> {
        let alphabet = Alphabet::new(&self.alphabet)?;
        let tr: Vec<(usize, &str, usize)> =
            self.transitions.iter().map(|(s, e, t)| (*s, e.as_str(), *t)).collect();
        Dfa::from_parts(alphabet, self.states, self.initial, &self.marked, &tr)
    }
}

/// Synchronous product over the union alphabet. Each event moves every
/// component that owns it; the others stay put.
pub fn sync_product(ds: &[Dfa]) -> Result<Dfa, AutomataError> {
    let first = ds.first().ok_or(AutomataError::Empty("product of no automata"))?;
    let mut alphabet = first.alphabet.clone();
    for d in &ds[1..] {
        alphabet = alphabet.union(&d.alphabet);
    }
    if ds.iter().any(|d| d.is_empty()) {
        return Ok(Dfa::empty(alphabet));
    }
    let owners: Vec<Vec<Option<usize>>> = ds
        .iter()
        .map(|d| alphabet.iter().map(|e| d.alphabet.index_of(e)).collect())
        .collect();
    let start: Vec<usize> = ds.iter().map(|d| d.initial).collect();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut states = vec![start.clone()];
    index.insert(start, 0);
    let mut delta = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let cur = states[i].clone();
        let mut row = vec![None; alphabet.len()];
        'ev: for e in 0..alphabet.len() {
            let mut next = cur.clone();
            for (c, d) in ds.iter().enumerate() {
                if let Some(local) = owners[c][e] {
                    match d.delta[cur[c]][local] {
                        Some(t) => next[c] = t,
                        None => continue 'ev,
                    }
                }
            }
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    states.push(next.clone());
                    index.insert(next, states.len() - 1);
                    states.len() - 1
                }
            };
            row[e] = Some(id);
        }
        delta.push(row);
        i += 1;
    }
    let marked = states
        .iter()
        .map(|tuple| tuple.iter().zip(ds).all(|(&s, d)| d.marked[s]))
        .collect();
    Ok(Dfa { alphabet, delta, marked, initial: 0 })
}

/// Language inclusion L(a) ⊆ L(b) for the chosen role. When the alphabets
/// differ, `b` is lifted to `a`'s alphabet by inverse projection: events of
/// `a` that `b` does not know leave `b` where it is. Returns a shortest
/// witness on failure (breadth-first, alphabet order).
pub fn included_role(a: &Dfa, b: &Dfa, role: Role) -> Inclusion {
    let Some(a0) = a.initial() else { return Inclusion::Holds };
    let b_idx: Vec<Option<usize>> = a.alphabet.iter().map(|e| b.alphabet.index_of(e)).collect();
    let bad = |sa: usize, sb: Option<usize>| match role {
        Role::Generated => sb.is_none(),
        Role::Marked => a.marked[sa] && !sb.map(|s| b.marked[s]).unwrap_or(false),
    };
    let b0 = b.initial();
    let mut prev: HashMap<(usize, Option<usize>), Option<((usize, Option<usize>), usize)>> =
        HashMap::new();
    let rebuild = |prev: &HashMap<(usize, Option<usize>), Option<((usize, Option<usize>), usize)>>,
                   mut cur: (usize, Option<usize>)| {
        let mut w = Vec::new();
        while let Some(Some((p, e))) = prev.get(&cur) {
            w.push(a.alphabet.get(*e).clone());
            cur = *p;
        }
        w.reverse();
        w
    };
    prev.insert((a0, b0), None);
    if bad(a0, b0) {
        return Inclusion::Fails(Vec::new());
    }
    let mut queue = VecDeque::from([(a0, b0)]);
    while let Some((sa, sb)) = queue.pop_front() {
        for e in 0..a.alphabet.len() {
            let Some(ta) = a.delta[sa][e] else { continue };
            let tb = match (sb, b_idx[e]) {
                (None, _) => None,
                (Some(s), Some(be)) => b.delta[s][be],
                (Some(s), None) => Some(s),
            };
            let key = (ta, tb);
            if prev.contains_key(&key) {
                continue;
            }
            prev.insert(key, Some(((sa, sb), e)));
            if bad(ta, tb) {
                return Inclusion::Fails(rebuild(&prev, key));
            }
            queue.push_back(key);
        }
    }
    Inclusion::Holds
}

/// Generated-language inclusion.
pub fn included(a: &Dfa, b: &Dfa) -> Inclusion {
    included_role(a, b, Role::Generated)
}

/// Two-way generated-language inclusion.
pub fn equivalent(a: &Dfa, b: &Dfa) -> bool {
    included(a, b).holds() && included(b, a).holds()
}

pub fn equivalent_role(a: &Dfa, b: &Dfa, role: Role) -> bool {
    included_role(a, b, role).holds() && included_role(b, a, role).holds()
}

/// If the generated language is a single finite chain, return its longest
/// word. Branching or cyclic automata yield the states where the chain breaks.
pub fn chain_word(d: &Dfa) -> Result<Word, Vec<usize>> {
    let d = d.reachable();
    let Some(mut s) = d.initial() else { return Ok(Vec::new()) };
    let mut w = Vec::new();
    let mut seen = BTreeSet::new();
    loop {
        if !seen.insert(s) {
            return Err(vec![s]);
        }
        let out: Vec<(usize, usize)> = (0..d.alphabet.len())
            .filter_map(|e| d.delta[s][e].map(|t| (e, t)))
            .collect();
        match out.len() {
            0 => return Ok(w),
            1 => {
                w.push(d.alphabet.get(out[0].0).clone());
                s = out[0].1;
            }
            _ => {
                let branching: Vec<usize> = (0..d.num_states())
                    .filter(|&q| d.delta[q].iter().flatten().count() > 1)
                    .collect();
                return Err(branching);
            }
        }
    }
}
