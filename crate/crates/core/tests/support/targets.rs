use cosmoplan_core::automata::{included_role, Alphabet, Dfa, Inclusion, Role, Word};
use cosmoplan_core::mission::Teacher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EVENTS: [&str; 4] = ["a", "b", "c", "d"];

pub fn random_dfa(seed: u64, max_states: usize, max_events: usize) -> Dfa {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_states);
    let m = rng.gen_range(1..=max_events);
    let alphabet = Alphabet::new(&EVENTS[..m]).unwrap();
    let marked: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
    let mut tr = Vec::new();
    for s in 0..n {
        for e in &EVENTS[..m] {
            if rng.gen_bool(0.8) {
                tr.push((s, *e, rng.gen_range(0..n)));
            }
        }
    }
    Dfa::from_parts(alphabet, n, 0, &marked, &tr).unwrap()
}

/// Exact teacher for the marked language of a known automaton.
pub struct Oracle<'a>(pub &'a Dfa);

impl Teacher for Oracle<'_> {
    fn member(&mut self, w: &[String]) -> bool {
        self.0.marks(w)
    }

    fn equivalent(&mut self, h: &Dfa) -> Option<Word> {
        for (a, b) in [(h, self.0), (self.0, h)] {
            if let Inclusion::Fails(w) = included_role(a, b, Role::Marked) {
                return Some(w);
            }
        }
        None
    }
}
