//! Constraint formulas for the motion primitives and for mission events.
//!
//! Instant k carries the state after the primitive π[k] was taken from
//! instant k−1, so each primitive clause has the shape
//! □[π = X → C(○⁻¹q, q)]. π is undefined at instant 0, which makes every such
//! clause vacuous there.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{chain_word, Dfa};
use crate::cltlb::{Formula, Lin, Term};
use crate::scene::{Scene, Segment};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrimitiveKind {
    GoTo,
    PickUp(usize),
    DropOff(usize),
    Req(usize),
    Res(usize),
}

impl PrimitiveKind {
    /// Integer code: 0 for GoTo, then one block of `n_objects` codes per
    /// object primitive in the order PickUp, DropOff, Req, Res.
    pub fn code(self, n_objects: usize) -> i64 {
        let n = n_objects as i64;
        match self {
            PrimitiveKind::GoTo => 0,
            PrimitiveKind::PickUp(j) => j as i64,
            PrimitiveKind::DropOff(j) => n + j as i64,
            PrimitiveKind::Req(j) => 2 * n + j as i64,
            PrimitiveKind::Res(j) => 3 * n + j as i64,
        }
    }

    pub fn from_code(code: i64, n_objects: usize) -> Option<PrimitiveKind> {
        let n = n_objects as i64;
        if code == 0 {
            return Some(PrimitiveKind::GoTo);
        }
        if code < 1 || code > 4 * n {
            return None;
        }
        let block = (code - 1) / n;
        let j = ((code - 1) % n + 1) as usize;
        Some(match block {
            0 => PrimitiveKind::PickUp(j),
            1 => PrimitiveKind::DropOff(j),
            2 => PrimitiveKind::Req(j),
            _ => PrimitiveKind::Res(j),
        })
    }

    /// Number of codes for a scene with `n_objects` objects.
    pub fn code_count(n_objects: usize) -> i64 {
        4 * n_objects as i64 + 1
    }

    pub fn object(self) -> Option<usize> {
        match self {
            PrimitiveKind::GoTo => None,
            PrimitiveKind::PickUp(j)
            | PrimitiveKind::DropOff(j)
            | PrimitiveKind::Req(j)
            | PrimitiveKind::Res(j) => Some(j),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::GoTo => "GoTo",
            PrimitiveKind::PickUp(_) => "PickUp",
            PrimitiveKind::DropOff(_) => "DropOff",
            PrimitiveKind::Req(_) => "Req",
            PrimitiveKind::Res(_) => "Res",
        }
    }

    pub fn from_name(name: &str, obj: Option<usize>) -> Option<PrimitiveKind> {
        Some(match (name, obj) {
            ("GoTo", _) => PrimitiveKind::GoTo,
            ("PickUp", Some(j)) => PrimitiveKind::PickUp(j),
            ("DropOff", Some(j)) => PrimitiveKind::DropOff(j),
            ("Req", Some(j)) => PrimitiveKind::Req(j),
            ("Res", Some(j)) => PrimitiveKind::Res(j),
            _ => return None,
        })
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.object() {
            None => write!(f, "{}", self.name()),
            Some(j) => write!(f, "{}_{}", self.name(), j),
        }
    }
}

pub const RX: &str = "r.x";
pub const RY: &str = "r.y";
pub const RA: &str = "r.alpha";

pub fn bx(j: usize) -> String {
    format!("b{j}.x")
}
pub fn by(j: usize) -> String {
    format!("b{j}.y")
}
pub fn bp(j: usize) -> String {
    format!("b{j}.p")
}
pub fn ba(j: usize) -> String {
    format!("b{j}.a")
}

/// Variables holding real values; everything else is an integer.
pub fn is_real_var(name: &str) -> bool {
    name.ends_with(".alpha")
}

/// Tuning knobs for the generated constraints. Both default to zero, which
/// gives the plain geometric formulas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecOptions {
    /// Extra margin (mm) kept between a moving robot and walls or objects.
    pub clearance: i64,
    /// Extra gap (mm) between robot and object faces when picking up or
    /// dropping off.
    pub reach: i64,
}

/// Line frame of a wall segment. When `is_y` the parallel line is written
/// y = m∥·x + b∥ and the perpendicular lines x = m⊥·y + b⊥; otherwise the
/// roles of x and y swap. Endpoints are ordered so that b⊥ᵢ ≤ b⊥f.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentFrame {
    pub is_y: bool,
    pub m_par: Ratio<i64>,
    pub m_perp: Ratio<i64>,
    pub b_par: Ratio<i64>,
    pub b_perp_i: Ratio<i64>,
    pub b_perp_f: Ratio<i64>,
}

impl SegmentFrame {
    pub fn new(o: &Segment) -> SegmentFrame {
        let is_y = (o.yf - o.yi).abs() <= (o.xf - o.xi).abs();
        let (xi, yi, xf, yf) = if (is_y && o.xi <= o.xf) || (!is_y && o.yi <= o.yf) {
            (o.xi, o.yi, o.xf, o.yf)
        } else {
            (o.xf, o.yf, o.xi, o.yi)
        };
        let r = |v: i64| Ratio::from_integer(v);
        let (dx, dy) = (xf - xi, yf - yi);
        if is_y {
            let m_par = Ratio::new(dy, dx);
            let m_perp = -Ratio::new(dy, dx);
            SegmentFrame {
                is_y,
                m_par,
                m_perp,
                b_par: r(yi) - m_par * r(xi),
                b_perp_i: r(xi) - m_perp * r(yi),
                b_perp_f: r(xf) - m_perp * r(yf),
            }
        } else {
            let m_par = Ratio::new(dx, dy);
            let m_perp = -Ratio::new(dx, dy);
            SegmentFrame {
                is_y,
                m_par,
                m_perp,
                b_par: r(xi) - m_par * r(yi),
                b_perp_i: r(yi) - m_perp * r(xi),
                b_perp_f: r(yf) - m_perp * r(xf),
            }
        }
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// u − m·w ≤ b − h(1+|m|) − c (below = true) or u − m·w ≥ b + h(1+|m|) + c,
/// with h = side/2, cleared of denominators. (u, w) name the coordinates of
/// a point read at `shift`.
fn half_plane(
    u: &str,
    w: &str,
    shift: i64,
    m: Ratio<i64>,
    b: Ratio<i64>,
    side: i64,
    margin: i64,
    below: bool,
) -> Formula {
    let infl = Ratio::new(side, 2) * (Ratio::from_integer(1) + if *m.numer() < 0 { -m } else { m }) + Ratio::from_integer(margin);
    let rhs = if below { b - infl } else { b + infl };
    let l = lcm(*m.denom(), *rhs.denom());
    let cm = (m * Ratio::from_integer(l)).to_integer();
    let crhs = (rhs * Ratio::from_integer(l)).to_integer();
    let lin = Lin::new().add(l, u, shift).add(-cm, w, shift);
    if below {
        lin.le(crhs)
    } else {
        lin.ge(crhs)
    }
}

/// The four regions (below, above, left, right) of a segment for a square
/// of side `side` centred at (x, y), each as a list of points (shifts).
fn segment_regions(
    o: &Segment,
    x: &str,
    y: &str,
    shifts: &[i64],
    side: i64,
    margin: i64,
) -> Vec<Formula> {
    let f = SegmentFrame::new(o);
    let (pu, pw, qu, qw) = if f.is_y { (y, x, x, y) } else { (x, y, y, x) };
    let region = |u: &str, w: &str, m, b, below| {
        Formula::and(
            shifts
                .iter()
                .map(|&s| half_plane(u, w, s, m, b, side, margin, below))
                .collect(),
        )
    };
    vec![
        region(pu, pw, f.m_par, f.b_par, true),
        region(pu, pw, f.m_par, f.b_par, false),
        region(qu, qw, f.m_perp, f.b_perp_i, true),
        region(qu, qw, f.m_perp, f.b_perp_f, false),
    ]
}

/// Both endpoints of a straight robot move in one common region of `o`.
pub fn robot_segment_clause(o: &Segment, robot_l: i64, margin: i64) -> Formula {
    Formula::or(segment_regions(o, RX, RY, &[-1, 0], robot_l, margin))
}

/// An object of side `obj_l` at its current position lies in one region.
pub fn object_segment_clause(o: &Segment, j: usize, obj_l: i64) -> Formula {
    Formula::or(segment_regions(o, &bx(j), &by(j), &[0], obj_l, 0))
}

fn pi(kind: PrimitiveKind) -> Formula {
    Formula::prim(kind)
}

fn prop(name: String) -> Formula {
    Formula::prop(&name)
}

fn was(name: String) -> Formula {
    Formula::prev(Formula::prop(&name))
}

fn eq_prev(var: &str) -> Formula {
    Lin::var(var, 0).add(-1, var, -1).eq(0)
}

fn r_static() -> Formula {
    Formula::and(vec![eq_prev(RX), eq_prev(RY), eq_prev(RA)])
}

fn p_static(l: usize) -> Formula {
    Formula::iff(prop(bp(l)), was(bp(l)))
}

fn a_static(l: usize) -> Formula {
    Formula::iff(prop(ba(l)), was(ba(l)))
}

fn all_objects(scene: &Scene) -> impl Iterator<Item = usize> {
    1..=scene.num_objects()
}

/// Object l carries exactly j at the instant shifted by `shift` (0 or −1).
fn carry(j: usize, l: usize, shift: i64) -> Formula {
    let p = if shift == 0 { prop(bp(l)) } else { was(bp(l)) };
    if j == l {
        p
    } else {
        Formula::not(p)
    }
}

fn free_before(l: usize) -> Formula {
    Formula::and(vec![Formula::not(was(bp(l))), Formula::not(was(ba(l)))])
}

/// Robot and object face-to-face distance d = (aᵢ.l + bⱼ.l)/2 plus reach,
/// doubled to stay integral.
fn twice_d(scene: &Scene, i: usize, j: usize, opts: &SpecOptions) -> i64 {
    scene.robot(i).l + scene.object(j).l + 2 * opts.reach
}

/// Region test of a robot move against a square object at its previous
/// position: max/min of the two endpoints clear of the expanded box.
fn robot_object_clause(scene: &Scene, i: usize, j: usize, opts: &SpecOptions) -> Formula {
    let d2 = scene.robot(i).l + scene.object(j).l + 2 * opts.clearance;
    let mx = |v: &str| Term::max(Term::var(v, -1), Term::var(v, 0));
    let mn = |v: &str| Term::min(Term::var(v, -1), Term::var(v, 0));
    Formula::or(vec![
        Lin::new().plus(2, mx(RX)).add(-2, &bx(j), -1).le(-d2),
        Lin::new().plus(2, mn(RX)).add(-2, &bx(j), -1).ge(d2),
        Lin::new().plus(2, mx(RY)).add(-2, &by(j), -1).le(-d2),
        Lin::new().plus(2, mn(RY)).add(-2, &by(j), -1).ge(d2),
    ])
}

pub fn goto_spec(i: usize, scene: &Scene, opts: &SpecOptions) -> Formula {
    let g = || pi(PrimitiveKind::GoTo);
    let mut parts = vec![Formula::always(Formula::implies(
        g(),
        Formula::and(all_objects(scene).flat_map(|l| [p_static(l), a_static(l)]).collect()),
    ))];
    let l = scene.robot(i).l;
    for o in &scene.obstacles {
        parts.push(Formula::always(Formula::implies(g(), robot_segment_clause(o, l, opts.clearance))));
    }
    for j in all_objects(scene) {
        parts.push(Formula::always(Formula::implies(
            Formula::and(vec![g(), free_before(j)]),
            robot_object_clause(scene, i, j, opts),
        )));
    }
    Formula::and(parts)
}

pub fn pickup_spec(i: usize, scene: &Scene, opts: &SpecOptions) -> Formula {
    let mut parts = Vec::new();
    for j in all_objects(scene) {
        let mut body = Vec::new();
        for l in all_objects(scene) {
            body.push(Formula::not(was(bp(l))));
            body.push(carry(j, l, 0));
            body.push(a_static(l));
        }
        body.push(r_static());
        body.push(Lin::var(RA, -1).eq(0));
        body.push(Lin::var(RY, -1).add(-1, &by(j), -1).eq(0));
        body.push(Lin::new().add(2, RX, -1).add(-2, &bx(j), -1).eq(-twice_d(scene, i, j, opts)));
        parts.push(Formula::always(Formula::implies(
            pi(PrimitiveKind::PickUp(j)),
            Formula::and(body),
        )));
    }
    Formula::and(parts)
}

pub fn dropoff_spec(i: usize, scene: &Scene, opts: &SpecOptions) -> Formula {
    let mut parts = Vec::new();
    for j in all_objects(scene) {
        let drop = || pi(PrimitiveKind::DropOff(j));
        let mut body = Vec::new();
        for l in all_objects(scene) {
            body.push(carry(j, l, -1));
            body.push(Formula::not(prop(bp(l))));
            body.push(a_static(l));
        }
        body.push(r_static());
        body.push(Lin::var(RA, -1).eq(0));
        body.push(Lin::var(&by(j), 0).add(-1, RY, -1).eq(0));
        body.push(Lin::new().add(2, &bx(j), 0).add(-2, RX, -1).eq(twice_d(scene, i, j, opts)));
        parts.push(Formula::always(Formula::implies(drop(), Formula::and(body))));
        for l in all_objects(scene).filter(|&l| l != j) {
            let db2 = scene.object(j).l + scene.object(l).l;
            let (xj, yj, xl, yl) = (bx(j), by(j), bx(l), by(l));
            parts.push(Formula::always(Formula::implies(
                Formula::and(vec![drop(), free_before(l)]),
                Formula::or(vec![
                    Lin::new().add(2, &yj, 0).add(-2, &yl, 0).le(-db2),
                    Lin::new().add(2, &yj, 0).add(-2, &yl, 0).ge(db2),
                    Lin::new().add(2, &xj, 0).add(-2, &xl, 0).le(-db2),
                    Lin::new().add(2, &xj, 0).add(-2, &xl, 0).ge(db2),
                ]),
            )));
        }
        for o in &scene.obstacles {
            parts.push(Formula::always(Formula::implies(
                drop(),
                object_segment_clause(o, j, scene.object(j).l),
            )));
        }
    }
    Formula::and(parts)
}

/// Object positions change only through DropOff.
pub fn carry_spec(scene: &Scene) -> Formula {
    Formula::and(
        all_objects(scene)
            .map(|j| {
                Formula::always(Formula::implies(
                    Formula::and(vec![
                        Formula::prev(Formula::True),
                        Formula::not(pi(PrimitiveKind::DropOff(j))),
                    ]),
                    Formula::and(vec![eq_prev(&bx(j)), eq_prev(&by(j))]),
                ))
            })
            .collect(),
    )
}

/// Robot i stands clear of object j so another robot can take it, read at
/// the instant shifted by `shift`.
pub fn r_away(i: usize, j: usize, scene: &Scene, shift: i64) -> Formula {
    let (la, lb) = (scene.robot(i).l, scene.object(j).l);
    Formula::or(vec![
        Lin::var(RX, shift).add(-1, &bx(j), shift).le(-(lb + la)),
        Lin::new().add(2, RX, shift).add(-2, &bx(j), shift).ge(lb),
        Lin::new().add(2, RY, shift).add(-2, &by(j), shift).le(-la),
        Lin::new().add(2, RY, shift).add(-2, &by(j), shift).ge(la),
    ])
}

pub fn req_res_spec(i: usize, scene: &Scene) -> Formula {
    let mut parts = Vec::new();
    for j in all_objects(scene) {
        let mut req = Vec::new();
        for l in all_objects(scene) {
            req.push(p_static(l));
            if l == j {
                req.push(Formula::not(was(ba(l))));
                req.push(prop(ba(l)));
            } else {
                req.push(a_static(l));
            }
        }
        req.push(r_static());
        req.push(r_away(i, j, scene, -1));
        parts.push(Formula::always(Formula::implies(pi(PrimitiveKind::Req(j)), Formula::and(req))));

        let mut res = vec![was(bp(j))];
        for l in all_objects(scene) {
            res.push(p_static(l));
            res.push(a_static(l));
        }
        res.push(r_static());
        res.push(Formula::eventually(r_away(i, j, scene, 0)));
        parts.push(Formula::always(Formula::implies(pi(PrimitiveKind::Res(j)), Formula::and(res))));
    }
    Formula::and(parts)
}

/// State at instant 0: robot at home, objects at rest, free and present.
pub fn initial_spec(i: usize, scene: &Scene) -> Formula {
    let r = scene.robot(i);
    let mut parts = vec![
        Lin::var(RX, 0).eq(r.x().round() as i64),
        Lin::var(RY, 0).eq(r.y().round() as i64),
        Lin::var(RA, 0).eq(r.alpha().round() as i64),
    ];
    for j in all_objects(scene) {
        let b = scene.object(j);
        parts.push(Lin::var(&bx(j), 0).eq(b.pos[0]));
        parts.push(Lin::var(&by(j), 0).eq(b.pos[1]));
        parts.push(Formula::not(prop(bp(j))));
        parts.push(Formula::not(prop(ba(j))));
    }
    Formula::and(parts)
}

/// φ_P(M) for robot i: every primitive clause plus object stasis.
pub fn primitives_spec(i: usize, scene: &Scene, opts: &SpecOptions) -> Formula {
    Formula::and(vec![
        goto_spec(i, scene, opts),
        pickup_spec(i, scene, opts),
        dropoff_spec(i, scene, opts),
        carry_spec(scene),
        req_res_spec(i, scene),
    ])
}

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("unknown event `{0}`")]
    Unknown(String),
    #[error("event `{0}` names object {1}, which the scene does not have")]
    NoObject(String, usize),
    #[error("event `{0}` names workspace {1}, which the scene does not have")]
    NoWorkspace(String, usize),
    #[error("mission is not sequential (branching at states {0:?})")]
    NotSequential(Vec<usize>),
}

/// Parsed mission event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Pick { robot: usize, object: usize },
    Drop { robot: usize, object: usize, window: usize },
    Home { robot: usize },
    Request { object: usize },
    Response { object: usize },
}

fn leading_number(s: &str) -> Option<(usize, &str)> {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    if end == 0 {
        return None;
    }
    Some((s[..end].parse().ok()?, &s[end..]))
}

impl EventKind {
    pub fn parse(e: &str) -> Option<EventKind> {
        if let Some(rest) = e.strip_prefix('?') {
            let (j, tail) = leading_number(rest.strip_prefix('O')?)?;
            return (tail == "Away").then_some(EventKind::Request { object: j });
        }
        if let Some(rest) = e.strip_prefix('!') {
            let (j, tail) = leading_number(rest.strip_prefix('O')?)?;
            return (tail == "Away").then_some(EventKind::Response { object: j });
        }
        if let Some(rest) = e.strip_prefix('r') {
            let (i, tail) = leading_number(rest)?;
            return tail.is_empty().then_some(EventKind::Home { robot: i });
        }
        let rest = e.strip_prefix('R')?;
        let (i, tail) = leading_number(rest)?;
        if let Some(t) = tail.strip_prefix("pO") {
            let (j, t) = leading_number(t)?;
            return t.is_empty().then_some(EventKind::Pick { robot: i, object: j });
        }
        let t = tail.strip_prefix("dO")?;
        let (j, t) = leading_number(t)?;
        let (k, t) = leading_number(t.strip_prefix("aW")?)?;
        t.is_empty().then_some(EventKind::Drop { robot: i, object: j, window: k })
    }

    pub fn object(self) -> Option<usize> {
        match self {
            EventKind::Pick { object, .. }
            | EventKind::Drop { object, .. }
            | EventKind::Request { object }
            | EventKind::Response { object } => Some(object),
            EventKind::Home { .. } => None,
        }
    }
}

/// Prefix and goal of an event: the event holds once `goal` is reached with
/// `prefix` holding at every instant before it.
pub fn event_parts(e: &str, scene: &Scene, i: usize) -> Result<(Formula, Formula), EventError> {
    let kind = EventKind::parse(e).ok_or_else(|| EventError::Unknown(e.to_string()))?;
    if let Some(j) = kind.object() {
        if j == 0 || j > scene.num_objects() {
            return Err(EventError::NoObject(e.to_string(), j));
        }
    }
    let moving_or_requesting = |skip: Option<usize>| {
        let mut alts = vec![pi(PrimitiveKind::GoTo)];
        for l in all_objects(scene).filter(|&l| Some(l) != skip) {
            alts.push(pi(PrimitiveKind::Req(l)));
        }
        Formula::or(alts)
    };
    Ok(match kind {
        EventKind::Pick { object: j, .. } => {
            (moving_or_requesting(Some(j)), pi(PrimitiveKind::PickUp(j)))
        }
        EventKind::Drop { object: j, window: k, .. } => {
            let w = *scene
                .workspaces
                .get(k.wrapping_sub(1))
                .ok_or_else(|| EventError::NoWorkspace(e.to_string(), k))?;
            let goal = Formula::and(vec![
                Formula::not(prop(bp(j))),
                Lin::var(&bx(j), 0).ge(w.xlo),
                Lin::var(&bx(j), 0).le(w.xhi),
                Lin::var(&by(j), 0).ge(w.ylo),
                Lin::var(&by(j), 0).le(w.yhi),
            ]);
            (moving_or_requesting(Some(j)), goal)
        }
        EventKind::Home { .. } => {
            let r = scene.robot(i);
            let goal = Formula::and(vec![
                Lin::var(RA, 0).eq(r.alpha().round() as i64),
                Lin::var(RX, 0).eq(r.x().round() as i64),
                Lin::var(RY, 0).eq(r.y().round() as i64),
            ]);
            (moving_or_requesting(None), goal)
        }
        EventKind::Request { object: j } => (
            moving_or_requesting(Some(j)),
            Formula::and(vec![pi(PrimitiveKind::Req(j)), prop(ba(j))]),
        ),
        EventKind::Response { object: j } => (
            Formula::or(vec![pi(PrimitiveKind::GoTo), pi(PrimitiveKind::PickUp(j))]),
            pi(PrimitiveKind::Res(j)),
        ),
    })
}

/// Stand-alone event formula prefix U goal.
pub fn encode_event(e: &str, scene: &Scene, i: usize) -> Result<Formula, EventError> {
    let (p, g) = event_parts(e, scene, i)?;
    Ok(Formula::until(p, g))
}

/// Sequential mission e₁…eₙ as ○(P₁ U (G₁ ∧ ○(P₂ U (G₂ ∧ …)))): each event
/// completes strictly after the previous one, starting at instant 1.
pub fn encode_mission(mission: &Dfa, scene: &Scene, i: usize) -> Result<Formula, EventError> {
    let w = chain_word(mission).map_err(EventError::NotSequential)?;
    encode_word(&w, scene, i)
}

pub fn encode_word(w: &[String], scene: &Scene, i: usize) -> Result<Formula, EventError> {
    let mut acc: Option<Formula> = None;
    for e in w.iter().rev() {
        let (p, g) = event_parts(e, scene, i)?;
        let goal = match acc {
            None => g,
            Some(rest) => Formula::and(vec![g, Formula::next(rest)]),
        };
        acc = Some(Formula::until(p, goal));
    }
    Ok(acc.map(Formula::next).unwrap_or(Formula::True))
}
