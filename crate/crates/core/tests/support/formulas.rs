use std::time::Duration;

use cosmoplan_core::cltlb::{eval, Cmp, Formula, Lin, Rel, Term, Trace};
use cosmoplan_core::smtgate::{decode, encode, solve, SolverVerdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VARS: [&str; 3] = ["x", "y", "z"];
const BUDGET: usize = 40_000;

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    nv: usize,
    lo: i64,
    hi: i64,
}

impl Gen<'_> {
    fn term(&mut self, shifts: &[i64]) -> Term {
        let v = VARS[self.rng.gen_range(0..self.nv)];
        let s = shifts[self.rng.gen_range(0..shifts.len())];
        let t = Term::var(v, s);
        match self.rng.gen_range(0..8) {
            0 => Term::max(t, self.term(shifts)),
            1 => Term::min(t, self.term(shifts)),
            _ => t,
        }
    }

    fn rel(&mut self, shifts: &[i64]) -> Formula {
        let n = self.rng.gen_range(1..=2);
        let terms = (0..n)
            .map(|_| {
                let c = [-2, -1, 1, 2][self.rng.gen_range(0..4)];
                (c, self.term(shifts))
            })
            .collect();
        let cmp = [Cmp::Eq, Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge][self.rng.gen_range(0..5)];
        let constant = self.rng.gen_range(2 * self.lo - 1..=2 * self.hi + 1);
        Formula::Rel(Rel { terms, cmp, constant })
    }

    fn atom(&mut self) -> Formula {
        match self.rng.gen_range(0..10) {
            0 => Formula::next(self.rel(&[-1, 0])),
            1 => Formula::prev(self.rel(&[0, 1])),
            2 => Formula::True,
            _ => self.rel(&[0]),
        }
    }

    fn formula(&mut self, depth: usize) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.atom();
        }
        let d = depth - 1;
        let b = |g: &mut Self| Box::new(g.formula(d));
        match self.rng.gen_range(0..11) {
            0 => Formula::Not(b(self)),
            1 => Formula::And(vec![self.formula(d), self.formula(d)]),
            2 => Formula::Or(vec![self.formula(d), self.formula(d)]),
            3 => Formula::Implies(b(self), b(self)),
            4 => Formula::Next(b(self)),
            5 => Formula::Prev(b(self)),
            6 => Formula::Until(b(self), b(self)),
            7 => Formula::Since(b(self), b(self)),
            8 => Formula::Always(b(self)),
            9 => Formula::Eventually(b(self)),
            _ => Formula::Last(b(self)),
        }
    }
}

/// Decide satisfiability by walking every trace over the domain.
fn brute_force(f: &Formula, k: usize, nv: usize, lo: i64, hi: i64) -> bool {
    let slots = nv * (k + 1);
    let width = (hi - lo + 1) as usize;
    let mut digits = vec![0usize; slots];
    loop {
        let mut tr = Trace::new(k);
        for (vi, v) in VARS.iter().take(nv).enumerate() {
            let vals = (0..=k).map(|i| (lo + digits[vi * (k + 1) + i] as i64) as f64).collect();
            tr.set_var(v, vals);
        }
        if eval(f, &tr, 0).expect("generated shifts are guarded") {
            return true;
        }
        let mut i = 0;
        loop {
            if i == slots {
                return false;
            }
            digits[i] += 1;
            if digits[i] < width {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn domain(nv: usize, lo: i64, hi: i64) -> Formula {
    Formula::always(Formula::and(
        VARS.iter()
            .take(nv)
            .flat_map(|v| {
                [Lin::var(v, 0).ge(lo), Lin::var(v, 0).le(hi)]
            })
            .collect(),
    ))
}

pub fn solver_available(solver: &str) -> bool {
    std::process::Command::new(solver).arg("-version").output().is_ok()
}

/// Random formulas checked against the solver: each verdict must match
/// enumeration and each model must replay. Returns (sat, unsat) counts.
pub fn agreement(seed: u64, cases: usize, solver: &str) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sat, mut unsat) = (0, 0);
    for case in 0..cases {
        let k = rng.gen_range(1..=4usize);
        let nv = rng.gen_range(1..=3usize);
        let slots = (nv * (k + 1)) as u32;
        let mut width = rng.gen_range(2..=5i64);
        while width > 2 && (width as usize).pow(slots) > BUDGET {
            width -= 1;
        }
        let lo = rng.gen_range(-2..=1);
        let hi = lo + width - 1;
        let body = Gen { rng: &mut rng, nv, lo, hi }.formula(3);
        let f = Formula::and(vec![domain(nv, lo, hi), body]);

        let expected = brute_force(&f, k, nv, lo, hi);
        let p = encode(&f, k, 0).map_err(|e| format!("case {case}: {e}"))?;
        match solve(&p, solver, Duration::from_secs(30)).map_err(|e| format!("case {case}: {e}"))? {
            SolverVerdict::Sat(m) => {
                if !expected {
                    return Err(format!("case {case}: solver sat, enumeration unsat: {f}"));
                }
                let tr = decode(&m, &p).map_err(|e| format!("case {case}: {e}"))?;
                if !eval(&f, &tr, 0).unwrap_or(false) {
                    return Err(format!("case {case}: model does not replay: {f}"));
                }
                sat += 1;
            }
            SolverVerdict::Unsat => {
                if expected {
                    return Err(format!("case {case}: solver unsat, enumeration sat: {f}"));
                }
                unsat += 1;
            }
            SolverVerdict::Unknown(r) => return Err(format!("case {case}: no verdict ({r})")),
        }
    }
    Ok((sat, unsat))
}
