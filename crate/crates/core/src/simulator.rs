//! Deterministic lockstep simulation of plans: a passive-safe dynamic window
//! controller for GoTo, instantaneous pick/drop, and a request/response bus.
//!
//! Footprints are axis-aligned squares. Gaps use the ∞-norm; the sensed
//! distance that the safety test sees is the free travel of the footprint
//! along the current heading, so obstacles beside or behind a robot never
//! pin it down. Walls and resting objects are static obstacles; other
//! robots move at most V and are grown by what they can cover while the
//! robot brakes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::planner::{Plan, PlanStep};
use crate::primspec::PrimitiveKind;
use crate::scene::{
    point_segment_inf_distance, square_segment_distance, square_square_distance, ObjectSpec, RobotSpec, Scene, Segment,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwaParams {
    /// Maximum acceleration, mm/s².
    pub a: f64,
    /// Maximum braking, mm/s².
    pub b: f64,
    /// Maximum |ω|, deg/s.
    pub omega: f64,
    /// Maximum cycle time, s.
    pub eps: f64,
    /// Maximum speed of moving obstacles, mm/s.
    pub v_obs: f64,
    pub sensor_range: f64,
    /// Preferred translational speed, mm/s; must not exceed `v_obs`.
    pub cruise: f64,
    pub grid_v: usize,
    pub grid_w: usize,
    pub w_heading: f64,
    pub w_velocity: f64,
    pub w_clearance: f64,
    pub w_progress: f64,
    pub pos_tol: f64,
    /// Position tolerance of a GoTo that docks for a pick or drop.
    #[serde(default = "default_dock_tol")]
    pub dock_tol: f64,
    pub ang_tol: f64,
    /// Cell size of the routing grid, mm.
    #[serde(default = "default_route_cell")]
    pub route_cell: f64,
}

fn default_route_cell() -> f64 {
    100.0
}

fn default_dock_tol() -> f64 {
    10.0
}

impl Default for DwaParams {
    fn default() -> Self {
        DwaParams {
            a: 500.0,
            b: 500.0,
            omega: 90.0,
            eps: 0.2,
            v_obs: 600.0,
            sensor_range: 2000.0,
            cruise: 500.0,
            grid_v: 11,
            grid_w: 11,
            w_heading: 1.0,
            w_velocity: 0.3,
            w_clearance: 0.6,
            w_progress: 1.0,
            pos_tol: 50.0,
            dock_tol: default_dock_tol(),
            ang_tol: 5.0,
            route_cell: default_route_cell(),
        }
    }
}

impl DwaParams {
    pub fn validate(&self) -> Result<(), String> {
        let pos = [("A", self.a), ("b", self.b), ("Ω", self.omega), ("ε", self.eps)];
        for (n, v) in pos {
            if !(v > 0.0) {
                return Err(format!("{n} must be positive"));
            }
        }
        if !(self.v_obs >= 0.0) {
            return Err("V must be non-negative".into());
        }
        if self.cruise > self.v_obs {
            return Err("cruise speed exceeds V, robots would break the obstacle bound".into());
        }
        if self.grid_v < 2 || self.grid_w < 2 {
            return Err("sampling grid needs at least 2×2 points".into());
        }
        Ok(())
    }

    fn with_v(&self, v: f64) -> DwaParams {
        DwaParams { v_obs: v, ..self.clone() }
    }
}

/// One control setpoint held for `t` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlArc {
    pub v: f64,
    /// deg/s
    pub w: f64,
    pub t: f64,
}

/// φ_safe for one obstacle class: stopped, or farther than the worst-case
/// stopping envelope.
pub fn is_safe(v: f64, dist: f64, b: f64, v_obs: f64) -> bool {
    v == 0.0 || dist > v * v / (2.0 * b) + v_obs * v / b
}

/// The `safe` test of the velocity cap: whether full acceleration for one
/// cycle still leaves room to stop.
pub fn safe_condition(v: f64, p: &DwaParams, dist: f64) -> bool {
    let (a, b, e, vo) = (p.a, p.b, p.eps, p.v_obs);
    dist > (a / b + 1.0) * (a / 2.0 * e * e + e * v) + v * v / (2.0 * b) + vo * (e + (v + a * e) / b)
}

/// Closed-form speed bound for distance `dist` before the final adjustment.
pub fn v_max(p: &DwaParams, dist: f64) -> f64 {
    let (a, b, e, vo) = (p.a, p.b, p.eps, p.v_obs);
    b * ((a / b + 1.0) * e * e + (vo / b).powi(2) + 2.0 * dist / b).sqrt()
        - b * e * (a / b + 1.0)
        - vo
}

/// Unclamped (safe-true, safe-false) values of the cap.
pub fn v_cap_branches(p: &DwaParams, dist: f64) -> (f64, f64) {
    let vm = v_max(p, dist);
    (vm + p.a * p.eps, vm - p.b * p.eps)
}

/// Translational speed cap for current speed `v` at ∞-norm distance `dist`.
pub fn compute_v_cap(v: f64, p: &DwaParams, dist: f64) -> f64 {
    let (hi, lo) = v_cap_branches(p, dist);
    let cap = if safe_condition(v, p, dist) { hi } else { lo };
    cap.max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// degrees
    pub alpha: f64,
}

/// Exact unicycle motion along the arc.
pub fn integrate(p: Pose, u: ControlArc) -> Pose {
    let a0 = p.alpha.to_radians();
    let w = u.w.to_radians();
    let a1 = a0 + w * u.t;
    let (x, y) = if w.abs() < 1e-12 {
        (p.x + u.v * u.t * a0.cos(), p.y + u.v * u.t * a0.sin())
    } else {
        let r = u.v / w;
        (p.x + r * (a1.sin() - a0.sin()), p.y - r * (a1.cos() - a0.cos()))
    };
    Pose { x, y, alpha: p.alpha + u.w * u.t }
}

/// An obstacle footprint: the segment a → a + d thickened by half side `h`
/// (d = 0 for a square).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shape {
    pub a: (f64, f64),
    pub d: (f64, f64),
    pub h: f64,
}

impl Shape {
    pub fn wall(s: &Segment) -> Shape {
        Shape {
            a: (s.xi as f64, s.yi as f64),
            d: ((s.xf - s.xi) as f64, (s.yf - s.yi) as f64),
            h: 0.0,
        }
    }

    pub fn square(x: f64, y: f64, h: f64) -> Shape {
        Shape { a: (x, y), d: (0.0, 0.0), h }
    }

    /// ∞-norm gap to a robot square centred at (x, y) with half side `rh`.
    pub fn gap(&self, x: f64, y: f64, rh: f64) -> f64 {
        let b = (self.a.0 + self.d.0, self.a.1 + self.d.1);
        (point_segment_inf_distance(x, y, self.a, b) - rh - self.h).max(0.0)
    }

    /// Smallest s ≥ 0 with c + s·u within ∞-distance `big` of the segment,
    /// or infinity. Solved as a two-variable LP over (s, t) by vertex
    /// enumeration.
    fn ray_entry(&self, c: (f64, f64), u: (f64, f64), big: f64) -> f64 {
        let (ox, oy) = (c.0 - self.a.0, c.1 - self.a.1);
        let (dx, dy) = self.d;
        // rows: cs·s + ct·t ≤ r
        let rows = [
            (u.0, -dx, big - ox),
            (-u.0, dx, big + ox),
            (u.1, -dy, big - oy),
            (-u.1, dy, big + oy),
            (0.0, 1.0, 1.0),
            (0.0, -1.0, 0.0),
            (-1.0, 0.0, 0.0),
        ];
        let tol = 1e-7 * (1.0 + big + ox.abs() + oy.abs());
        let mut best = f64::INFINITY;
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let (a1, b1, r1) = rows[i];
                let (a2, b2, r2) = rows[j];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-12 {
                    continue;
                }
                let s = (r1 * b2 - r2 * b1) / det;
                let t = (a1 * r2 - a2 * r1) / det;
                if s < best && rows.iter().all(|&(a, b, r)| a * s + b * t <= r + tol) {
                    best = s.max(0.0);
                }
            }
        }
        best
    }

    /// Free travel from `c` along unit `u` before the robot square (half
    /// side `rh`) meets this shape grown by `infl`. Shapes the robot is
    /// already inside of (grown) count only while the real gap shrinks.
    pub fn ahead(&self, c: (f64, f64), u: (f64, f64), rh: f64, infl: f64) -> f64 {
        let s = self.ray_entry(c, u, rh + self.h + infl);
        if s > 1e-9 || s.is_infinite() {
            return s;
        }
        let g0 = self.gap(c.0, c.1, rh);
        let g1 = self.gap(c.0 + u.0, c.1 + u.1, rh);
        if g1 > g0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

impl Shape {
    /// Whether the max-norm gap to this square grows along `u` for every
    /// placement of the square within `margin` of where it is now. Each axis
    /// that could become the dominant one must be moving apart.
    pub fn recedes(&self, c: (f64, f64), u: (f64, f64), rh: f64, margin: f64) -> bool {
        if self.d != (0.0, 0.0) {
            return false;
        }
        let offs = [(c.0 - self.a.0, u.0), (c.1 - self.a.1, u.1)];
        let m = offs[0].0.abs().max(offs[1].0.abs());
        if m - rh - self.h <= margin {
            return false;
        }
        offs.iter()
            .filter(|(off, _)| off.abs() >= m - 2.0 * margin)
            .all(|(off, du)| du * off.signum() > 1e-9)
    }

    /// Free travel toward a moving square grown by `infl`; receding squares
    /// do not count.
    pub fn ahead_moving(&self, c: (f64, f64), u: (f64, f64), rh: f64, infl: f64, margin: f64) -> f64 {
        if self.recedes(c, u, rh, margin) {
            return f64::INFINITY;
        }
        self.ray_entry(c, u, rh + self.h + infl)
    }
}

/// Obstacles around one robot, split by worst-case speed.
#[derive(Clone, Debug, Default)]
pub struct Sensed {
    /// Walls and resting objects.
    pub statics: Vec<Shape>,
    /// Squares that may move up to V.
    pub dynamics: Vec<Shape>,
}

impl Sensed {
    /// Omnidirectional ∞-norm gap to the nearest (static, dynamic) obstacle.
    pub fn gaps(&self, x: f64, y: f64, h: f64) -> (f64, f64) {
        let min = |v: &[Shape]| v.iter().map(|o| o.gap(x, y, h)).fold(f64::INFINITY, f64::min);
        (min(&self.statics), min(&self.dynamics))
    }

    /// Sensed distances (static, dynamic) along the heading at speed `v`.
    /// Dynamic obstacles are grown by the ground they can cover while the
    /// robot brakes, plus `extra`, and must recede by more than `extra` to
    /// be ignored.
    pub fn ahead(&self, pose: Pose, h: f64, v: f64, p: &DwaParams, extra: f64) -> (f64, f64) {
        let a = pose.alpha.to_radians();
        let (c, u) = ((pose.x, pose.y), (a.cos(), a.sin()));
        let ds = self.statics.iter().map(|o| o.ahead(c, u, h, 0.0)).fold(f64::INFINITY, f64::min);
        let grow = p.v_obs * v / p.b + extra;
        let dd = self
            .dynamics
            .iter()
            .map(|o| o.ahead_moving(c, u, h, grow, extra))
            .fold(f64::INFINITY, f64::min);
        (ds, dd)
    }

    fn within(&self, x: f64, y: f64, h: f64, range: f64) -> Sensed {
        let keep = |v: &[Shape]| v.iter().filter(|o| o.gap(x, y, h) <= range).copied().collect();
        Sensed { statics: keep(&self.statics), dynamics: keep(&self.dynamics) }
    }
}

/// Whether arc `u` from `pose` is collision free and ends in a state from
/// which braking still stops in time, even if dynamic obstacles move at V
/// for the rest of the cycle.
pub fn admissible(pose: Pose, u: ControlArc, h: f64, sensed: &Sensed, p: &DwaParams) -> bool {
    if u.v == 0.0 {
        return true;
    }
    for k in 1..=4 {
        let q = integrate(pose, ControlArc { t: u.t * k as f64 / 4.0, ..u });
        let (gs, gd) = sensed.gaps(q.x, q.y, h);
        if gs <= 0.0 || gd <= 0.0 {
            return false;
        }
    }
    let end = integrate(pose, u);
    let (ds, dd) = sensed.ahead(end, h, u.v, p, p.v_obs * u.t);
    is_safe(u.v, ds, p.b, 0.0) && is_safe(u.v, dd, p.b, p.v_obs)
}

/// Ticks without progress before a robot tries a detour.
const STALL_TICKS: usize = 40;
/// Clearance kept by routed paths, mm.
const ROUTE_MARGIN: f64 = 30.0;

fn wrap(deg: f64) -> f64 {
    let mut d = deg % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d <= -180.0 {
        d += 360.0;
    }
    d
}

/// One control decision toward `goal` (position only). `v` is the current
/// speed, `h` the robot half side, `t` the cycle length.
#[allow(clippy::too_many_arguments)]
pub fn dwa_step(
    pose: Pose,
    v: f64,
    h: f64,
    goal: (f64, f64),
    sensed: &Sensed,
    p: &DwaParams,
    t: f64,
    rng: &mut impl Rng,
) -> ControlArc {
    let brake = ControlArc { v: (v - p.b * t).max(0.0), w: 0.0, t };
    let (gx, gy) = (goal.0 - pose.x, goal.1 - pose.y);
    let dist_goal = gx.hypot(gy);
    let bearing = gy.atan2(gx).to_degrees();
    let err = wrap(bearing - pose.alpha);

    if err.abs() > 60.0 {
        // turn toward the goal once stopped
        let w = (err / t).clamp(-p.omega, p.omega);
        return ControlArc { v: brake.v, w: if brake.v == 0.0 { w } else { 0.0 }, t };
    }

    let v_lo = (v - p.b * t).max(0.0);
    let look = 0.6;
    let mut best: Option<(f64, ControlArc)> = None;
    for iw in 0..p.grid_w {
        let cw = -p.omega + 2.0 * p.omega * iw as f64 / (p.grid_w - 1) as f64;
        // the cap looks where this arc is headed
        let facing = Pose { alpha: pose.alpha + cw * t, ..pose };
        let (ds, dd) = sensed.ahead(facing, h, v, p, 0.0);
        let cap = compute_v_cap(v, p, dd)
            .min(compute_v_cap(v, &p.with_v(0.0), ds))
            .min((2.0 * p.b * dist_goal).sqrt())
            .min(dist_goal / t)
            .min(p.cruise);
        let v_hi = (v + p.a * t).min(cap).max(v_lo);
        for iv in 0..p.grid_v {
            let cv = v_lo + (v_hi - v_lo) * iv as f64 / (p.grid_v - 1) as f64;
            let u = ControlArc { v: cv, w: cw, t };
            if !admissible(pose, u, h, sensed, p) {
                continue;
            }
            let ahead = integrate(pose, ControlArc { t: look, ..u });
            let (hx, hy) = (goal.0 - ahead.x, goal.1 - ahead.y);
            let e = wrap(hy.atan2(hx).to_degrees() - ahead.alpha).abs();
            let heading = 1.0 - e / 180.0;
            let (s2, d2) = sensed.gaps(ahead.x, ahead.y, h);
            let clearance = (s2.min(d2 / 2.0).min(1000.0)) / 1000.0;
            let progress = (dist_goal - hx.hypot(hy)) / (p.cruise * look);
            let score = p.w_heading * heading
                + p.w_velocity * cv / p.cruise
                + p.w_clearance * clearance
                + p.w_progress * progress
                + rng.gen::<f64>() * 1e-9;
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, u));
            }
        }
    }
    best.map(|(_, u)| u).unwrap_or(brake)
}

/// A short escape target for a robot that has made no progress: the first
/// side direction whose sensed corridor is clear for a while.
pub fn detour_point(pose: Pose, h: f64, sensed: &Sensed, p: &DwaParams) -> Option<(f64, f64)> {
    let hop = 4.0 * h;
    [90.0, -90.0, 135.0, -135.0, 180.0, 45.0, -45.0].into_iter().find_map(|rel: f64| {
        let q = Pose { alpha: pose.alpha + rel, ..pose };
        let (ds, dd) = sensed.ahead(q, h, p.cruise / 2.0, p, 0.0);
        let a = q.alpha.to_radians();
        (ds > 1.5 * hop && dd > 1.5 * hop).then(|| (pose.x + hop * a.cos(), pose.y + hop * a.sin()))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub tick: usize,
    pub robot: usize,
    pub x: f64,
    pub y: f64,
    pub alpha: f64,
    pub v: f64,
    pub omega: f64,
    pub d_static: f64,
    pub d_dynamic: f64,
    pub safe: bool,
    pub primitive: String,
    pub status: String,
}

impl LogRow {
    pub fn min_dist(&self) -> f64 {
        self.d_static.min(self.d_dynamic)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusEvent {
    pub tick: usize,
    pub kind: String,
    pub object: usize,
    pub from: usize,
    pub to: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Completed { tick: usize },
    Deadlock { blocked: Vec<usize> },
    Fault { tick: usize, robot: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub tick: f64,
    pub params: DwaParams,
    pub rows: Vec<LogRow>,
    pub bus: Vec<BusEvent>,
    pub outcome: Outcome,
    pub final_poses: Vec<Pose>,
    pub final_objects: Vec<(f64, f64)>,
}

impl SimLog {
    pub fn completed(&self) -> bool {
        matches!(self.outcome, Outcome::Completed { .. })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "tick", "robot", "x", "y", "alpha", "v", "omega", "min_dist", "safe", "primitive", "status",
        ])
        .expect("in-memory csv");
        for r in &self.rows {
            let d = r.min_dist();
            w.write_record([
                r.tick.to_string(),
                r.robot.to_string(),
                format!("{:.3}", r.x),
                format!("{:.3}", r.y),
                format!("{:.3}", r.alpha),
                format!("{:.3}", r.v),
                format!("{:.3}", r.omega),
                if d.is_finite() { format!("{d:.3}") } else { "inf".into() },
                r.safe.to_string(),
                r.primitive.clone(),
                r.status.clone(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
    }

    pub fn bus_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tick", "kind", "object", "from", "to"]).expect("in-memory csv");
        for e in &self.bus {
            w.write_record([
                e.tick.to_string(),
                e.kind.clone(),
                e.object.to_string(),
                e.from.to_string(),
                e.to.map(|t| t.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
    }

    /// Trajectory plot: walls as lines, objects (initial and final) as
    /// squares, one polyline per robot.
    pub fn to_svg(&self, scene: &Scene) -> String {
        let (x0, x1, y0, y1) = scene.bounds();
        let pad = 300.0;
        let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
        let tx = |x: f64| x - x0 + pad;
        let ty = |y: f64| y1 - y + pad;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.0} {h:.0}" width="800" height="{:.0}">"#,
            800.0 * h / w
        );
        for o in &scene.obstacles {
            let _ = writeln!(
                s,
                r#"<line x1="{:.0}" y1="{:.0}" x2="{:.0}" y2="{:.0}" stroke="black" stroke-width="30"/>"#,
                tx(o.xi as f64),
                ty(o.yi as f64),
                tx(o.xf as f64),
                ty(o.yf as f64)
            );
        }
        for ws in &scene.workspaces {
            let _ = writeln!(
                s,
                r##"<rect x="{:.0}" y="{:.0}" width="{:.0}" height="{:.0}" fill="#ddd"/>"##,
                tx(ws.xlo as f64),
                ty(ws.yhi as f64),
                (ws.xhi - ws.xlo).max(20) as f64,
                (ws.yhi - ws.ylo).max(20) as f64
            );
        }
        let square = |s: &mut String, x: f64, y: f64, l: f64, style: &str| {
            let _ = writeln!(
                s,
                r#"<rect x="{:.0}" y="{:.0}" width="{l:.0}" height="{l:.0}" {style}/>"#,
                tx(x - l / 2.0),
                ty(y + l / 2.0)
            );
        };
        for (b, f) in scene.objects.iter().zip(&self.final_objects) {
            square(&mut s, b.pos[0] as f64, b.pos[1] as f64, b.l as f64, r#"fill="none" stroke="gray""#);
            square(&mut s, f.0, f.1, b.l as f64, r#"fill="black""#);
        }
        let colors = ["red", "blue", "green", "orange", "purple", "brown", "teal", "magenta", "olive", "navy"];
        let mut by_robot: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &self.rows {
            by_robot.entry(r.robot).or_default().push((r.x, r.y));
        }
        for (i, pts) in by_robot {
            let c = colors[(i - 1) % colors.len()];
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.0},{:.0}", tx(*x), ty(*y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="20"/>"#,
                path.join(" ")
            );
            if let Some(a) = scene.agents.get(i - 1) {
                square(&mut s, a.x(), a.y(), a.l as f64, &format!(r#"fill="none" stroke="{c}""#));
            }
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write_all(&self, scene: &Scene, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sim_log.csv"), self.to_csv())?;
        std::fs::write(dir.join("bus.csv"), self.bus_csv())?;
        std::fs::write(dir.join("trajectories.svg"), self.to_svg(scene))?;
        Ok(())
    }
}

/// Every (tick, robot) whose logged state breaks φ_safe: static obstacles
/// are held at speed 0, robots at V.
pub fn monitor_passive_safety(log: &SimLog) -> Result<(), Vec<(usize, usize)>> {
    let p = &log.params;
    let bad: Vec<(usize, usize)> = log
        .rows
        .iter()
        .filter(|r| !(is_safe(r.v, r.d_static, p.b, 0.0) && is_safe(r.v, r.d_dynamic, p.b, p.v_obs)))
        .map(|r| (r.tick, r.robot))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct ObjState {
    x: f64,
    y: f64,
    carrier: Option<usize>,
    away: bool,
}

#[derive(Clone, Debug)]
struct RobotState {
    pose: Pose,
    v: f64,
    w: f64,
    step: usize,
    /// Final rotation of the current GoTo has started.
    settling: bool,
    status: &'static str,
    detour: Option<(f64, f64)>,
    detour_ticks: usize,
    /// Remaining turning points of the current GoTo, ending at its goal.
    route: Vec<(f64, f64)>,
    /// Last position from which the robot made progress, and when.
    anchor: (f64, f64),
    anchor_tick: usize,
}

struct World<'a> {
    scene: &'a Scene,
    plans: Vec<&'a Plan>,
    robots: Vec<RobotState>,
    objects: Vec<ObjState>,
    responded: BTreeSet<usize>,
    requested: BTreeMap<usize, usize>,
    bus: Vec<BusEvent>,
}

impl<'a> World<'a> {
    fn spec(&self, i: usize) -> &RobotSpec {
        self.scene.robot(i)
    }

    /// Obstacles seen by robot i.
    fn sensed(&self, i: usize) -> Sensed {
        let mut s = Sensed { statics: self.scene.obstacles.iter().map(Shape::wall).collect(), ..Default::default() };
        for (o, spec) in self.objects.iter().zip(&self.scene.objects) {
            if o.carrier.is_none() {
                s.statics.push(Shape::square(o.x, o.y, spec.l as f64 / 2.0));
            }
        }
        for (k, r) in self.robots.iter().enumerate() {
            if k + 1 != i {
                let sq = Shape::square(r.pose.x, r.pose.y, self.spec(k + 1).l as f64 / 2.0);
                // a robot that has finished its plan and stopped rests for good
                if r.step >= self.plans[k].steps.len() && r.v == 0.0 {
                    s.statics.push(sq);
                } else {
                    s.dynamics.push(sq);
                }
            }
        }
        s
    }

    fn expected_objects(&self, i: usize, step: usize) -> Option<&Vec<crate::planner::ObjectState>> {
        if step == 0 {
            return None;
        }
        self.plans[i - 1].steps.get(step - 1).and_then(|s| s.objects.as_ref())
    }
}

fn fault(tick: usize, robot: usize, message: String) -> Outcome {
    Outcome::Fault { tick, robot, message }
}

/// Advance robot i by one tick. Returns a fault message if an instantaneous
/// primitive finds its precondition broken.
fn advance(
    world: &mut World,
    i: usize,
    tick: usize,
    t: f64,
    p: &DwaParams,
    rng: &mut ChaCha8Rng,
) -> Result<(), String> {
    let plan = world.plans[i - 1];
    let st = world.robots[i - 1].clone();
    let Some(step) = plan.steps.get(st.step) else {
        let r = &mut world.robots[i - 1];
        let brake = (r.v - p.b * t).max(0.0);
        let u = ControlArc { v: brake, w: 0.0, t };
        r.pose = integrate(r.pose, u);
        r.v = brake;
        r.w = 0.0;
        r.status = "done";
        return Ok(());
    };
    let half = world.spec(i).l as f64 / 2.0;
    // messages do not move the robot, so look past them
    let docking = matches!(
        plan.steps[st.step + 1..]
            .iter()
            .map(|s| s.prim)
            .find(|k| !matches!(k, PrimitiveKind::Req(_) | PrimitiveKind::Res(_))),
        Some(PrimitiveKind::PickUp(_) | PrimitiveKind::DropOff(_))
    );
    let tol = if docking { p.dock_tol } else { p.pos_tol };
    let near = |pose: &Pose, s: &PlanStep| (pose.x - s.pose[0]).hypot(pose.y - s.pose[1]) <= tol;
    match step.prim {
        PrimitiveKind::GoTo => {
            let goal = (step.pose[0], step.pose[1]);
            let at_goal = near(&st.pose, step);
            let all = world.sensed(i);
            let sensed = all.within(st.pose.x, st.pose.y, half, p.sensor_range);
            let here = (st.pose.x, st.pose.y);
            let moving = !at_goal && !st.settling;
            let stalled = moving && tick - st.anchor_tick >= STALL_TICKS;
            let (mut route, mut detour, mut fresh) = (st.route.clone(), st.detour, false);
            if let Some(d) = detour {
                let done = (here.0 - d.0).hypot(here.1 - d.1) <= 2.0 * p.pos_tol || st.detour_ticks >= STALL_TICKS;
                if done || !moving {
                    detour = None;
                }
            }
            if moving && (route.is_empty() || stalled) {
                // route around what rests; after a stall, around everyone
                let mut shapes = all.statics.clone();
                if stalled {
                    shapes.extend(all.dynamics.iter().copied());
                }
                route = grid_path(&shapes, here, goal, half, p.route_cell, ROUTE_MARGIN).unwrap_or_else(|| vec![goal]);
                if stalled && detour.is_none() {
                    detour = detour_point(st.pose, half, &sensed, p);
                    if detour.is_none() && route.len() == 1 {
                        route.clear();
                    }
                }
                fresh = true;
            }
            while route.len() > 1 && (here.0 - route[0].0).hypot(here.1 - route[0].1) <= 3.0 * p.pos_tol {
                route.remove(0);
            }
            let target = detour.or(route.first().copied()).unwrap_or(goal);
            let (u, status) = if moving {
                let s = if detour.is_some() { "detour" } else { "moving" };
                (dwa_step(st.pose, st.v, half, target, &sensed, p, t, rng), s)
            } else if st.v > 0.0 {
                (ControlArc { v: (st.v - p.b * t).max(0.0), w: 0.0, t }, "stopping")
            } else {
                let err = wrap(step.pose[2] - st.pose.alpha);
                (ControlArc { v: 0.0, w: (err / t).clamp(-p.omega, p.omega), t }, "rotating")
            };
            let r = &mut world.robots[i - 1];
            r.pose = integrate(r.pose, u);
            r.pose.alpha = wrap(r.pose.alpha);
            r.v = u.v;
            r.w = u.w;
            r.status = status;
            r.detour_ticks = if detour.is_some() && r.detour == detour { r.detour_ticks + 1 } else { 0 };
            r.detour = detour;
            r.route = route;
            if fresh || (r.pose.x - r.anchor.0).hypot(r.pose.y - r.anchor.1) > p.pos_tol / 2.0 || r.settling {
                r.anchor = (r.pose.x, r.pose.y);
                r.anchor_tick = tick;
            }
            if at_goal {
                r.settling = true;
            }
            if r.settling && r.v == 0.0 && wrap(step.pose[2] - r.pose.alpha).abs() <= p.ang_tol {
                r.step += 1;
                r.settling = false;
                r.route.clear();
                r.status = "reached";
            }
        }
        prim => {
            if st.v > 0.0 {
                let r = &mut world.robots[i - 1];
                let brake = (r.v - p.b * t).max(0.0);
                r.pose = integrate(r.pose, ControlArc { v: brake, w: 0.0, t });
                r.v = brake;
                r.status = "stopping";
                return Ok(());
            }
            world.robots[i - 1].w = 0.0;
            let j = prim.object().expect("object primitive");
            if j == 0 || j > world.objects.len() {
                return Err(format!("{prim} names a missing object"));
            }
            let obj = world.objects[j - 1];
            match prim {
                PrimitiveKind::PickUp(_) => {
                    if obj.carrier.is_some() {
                        return Err(format!("{prim}: object already carried"));
                    }
                    if (st.pose.x - step.pose[0]).hypot(st.pose.y - step.pose[1]) > p.pos_tol {
                        return Err(format!("{prim}: robot not at the pick pose"));
                    }
                    if let Some(exp) = world.expected_objects(i, st.step) {
                        let e = exp[j - 1].pos;
                        if (e[0] - obj.x).abs() > 1.0 || (e[1] - obj.y).abs() > 1.0 {
                            return Err(format!("{prim}: object moved from its planned position"));
                        }
                    }
                    world.objects[j - 1].carrier = Some(i);
                }
                PrimitiveKind::DropOff(_) => {
                    if obj.carrier != Some(i) {
                        return Err(format!("{prim}: robot does not carry the object"));
                    }
                    let target = match &step.objects {
                        Some(o) => (o[j - 1].pos[0], o[j - 1].pos[1]),
                        None => {
                            let d = (world.spec(i).l + world.scene.object(j).l) as f64 / 2.0
                                + plan.options.reach as f64;
                            (st.pose.x + d, st.pose.y)
                        }
                    };
                    world.objects[j - 1] = ObjState { x: target.0, y: target.1, carrier: None, away: obj.away };
                }
                PrimitiveKind::Req(_) => {
                    world.robots[i - 1].anchor_tick = tick;
                    if !world.requested.contains_key(&j) {
                        world.requested.insert(j, i);
                        world.objects[j - 1].away = true;
                        world.bus.push(BusEvent { tick, kind: "request".into(), object: j, from: i, to: None });
                    }
                    if !world.responded.contains(&j) {
                        world.robots[i - 1].status = "waiting";
                        return Ok(());
                    }
                }
                PrimitiveKind::Res(_) => {
                    if obj.carrier != Some(i) {
                        return Err(format!("{prim}: object not picked up yet"));
                    }
                    world.responded.insert(j);
                    let to = world.requested.get(&j).copied();
                    world.bus.push(BusEvent { tick, kind: "response".into(), object: j, from: i, to });
                }
                PrimitiveKind::GoTo => unreachable!(),
            }
            let r = &mut world.robots[i - 1];
            r.step += 1;
            r.status = "executed";
            r.anchor_tick = tick;
        }
    }
    Ok(())
}

/// Execute the plans in lockstep (robots in index order within a tick).
pub fn run(plans: &[Plan], scene: &Scene, params: &DwaParams, tick: f64, t_max: f64, seed: u64) -> SimLog {
    assert!(tick > 0.0 && tick <= params.eps, "tick must lie in (0, ε]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_robot: Vec<Option<&Plan>> = vec![None; scene.agents.len()];
    for p in plans {
        if p.robot >= 1 && p.robot <= scene.agents.len() {
            by_robot[p.robot - 1] = Some(p);
        }
    }
    let idle: Vec<Plan> = (1..=scene.agents.len())
        .map(|i| Plan { robot: i, options: Default::default(), steps: Vec::new() })
        .collect();
    let plans: Vec<&Plan> = by_robot
        .iter()
        .enumerate()
        .map(|(k, p)| p.unwrap_or(&idle[k]))
        .collect();
    let mut world = World {
        scene,
        plans,
        robots: scene
            .agents
            .iter()
            .map(|a| RobotState {
                pose: Pose { x: a.x(), y: a.y(), alpha: a.alpha() },
                v: 0.0,
                w: 0.0,
                step: 0,
                settling: false,
                status: "idle",
                detour: None,
                detour_ticks: 0,
                route: Vec::new(),
                anchor: (a.x(), a.y()),
                anchor_tick: 0,
            })
            .collect(),
        objects: scene
            .objects
            .iter()
            .map(|b: &ObjectSpec| ObjState { x: b.pos[0] as f64, y: b.pos[1] as f64, carrier: None, away: false })
            .collect(),
        responded: BTreeSet::new(),
        requested: BTreeMap::new(),
        bus: Vec::new(),
    };
    let n = scene.agents.len();
    let max_ticks = (t_max / tick).round() as usize;
    let mut rows = Vec::new();
    let log_rows = |world: &World, tick: usize, rows: &mut Vec<LogRow>| {
        for i in 1..=n {
            let r = &world.robots[i - 1];
            let half = world.spec(i).l as f64 / 2.0;
            let (ds, dd) = world.sensed(i).ahead(r.pose, half, r.v, params, 0.0);
            let prim = world.plans[i - 1]
                .steps
                .get(r.step)
                .map(|s| s.prim.to_string())
                .unwrap_or_else(|| "-".into());
            rows.push(LogRow {
                tick,
                robot: i,
                x: r.pose.x,
                y: r.pose.y,
                alpha: r.pose.alpha,
                v: r.v,
                omega: r.w,
                d_static: ds,
                d_dynamic: dd,
                safe: is_safe(r.v, ds, params.b, 0.0) && is_safe(r.v, dd, params.b, params.v_obs),
                primitive: prim,
                status: r.status.to_string(),
            });
        }
    };
    log_rows(&world, 0, &mut rows);
    let finished = |w: &World| (0..n).all(|k| w.robots[k].step >= w.plans[k].steps.len() && w.robots[k].v == 0.0);
    let mut outcome = None;
    for tk in 1..=max_ticks {
        if finished(&world) {
            outcome = Some(Outcome::Completed { tick: tk - 1 });
            break;
        }
        for i in 1..=n {
            if let Err(msg) = advance(&mut world, i, tk, tick, params, &mut rng) {
                outcome = Some(fault(tk, i, msg));
                break;
            }
        }
        log_rows(&world, tk, &mut rows);
        if outcome.is_some() {
            break;
        }
    }
    let outcome = outcome.unwrap_or_else(|| {
        if finished(&world) {
            Outcome::Completed { tick: max_ticks }
        } else {
            Outcome::Deadlock {
                blocked: (1..=n).filter(|&i| world.robots[i - 1].step < world.plans[i - 1].steps.len()).collect(),
            }
        }
    });
    SimLog {
        tick,
        params: params.clone(),
        rows,
        bus: world.bus,
        outcome,
        final_poses: world.robots.iter().map(|r| r.pose).collect(),
        final_objects: world.objects.iter().map(|o| (o.x, o.y)).collect(),
    }
}

/// Two robots crossing at right angles in an empty square room.
pub fn crossing_scenario() -> (Scene, Vec<Plan>) {
    let scene = Scene {
        obstacles: vec![
            Segment::new(-2500, -2500, 2500, -2500),
            Segment::new(2500, -2500, 2500, 2500),
            Segment::new(2500, 2500, -2500, 2500),
            Segment::new(-2500, 2500, -2500, -2500),
        ],
        agents: vec![
            RobotSpec { l: 400, pose: [-1500.0, 0.0, 0.0] },
            RobotSpec { l: 400, pose: [0.0, -1500.0, 90.0] },
        ],
        objects: Vec::new(),
        workspaces: Vec::new(),
    };
    let goto = |robot, x, y, a| Plan {
        robot,
        options: Default::default(),
        steps: vec![PlanStep { prim: PrimitiveKind::GoTo, pose: [x, y, a], objects: None }],
    };
    let plans = vec![goto(1, 1500.0, 0.0, 0.0), goto(2, 0.0, 1500.0, 90.0)];
    (scene, plans)
}

/// Random room with a few interior walls and 2–4 robots, each given a
/// single GoTo to a free spot.
pub fn random_scenario(seed: u64) -> (Scene, Vec<Plan>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 3000i64;
    let mut obstacles = vec![
        Segment::new(-half, -half, half, -half),
        Segment::new(half, -half, half, half),
        Segment::new(half, half, -half, half),
        Segment::new(-half, half, -half, -half),
    ];
    for _ in 0..rng.gen_range(0..=3) {
        let x = rng.gen_range(-2000..=2000);
        let y = rng.gen_range(-2000..=2000);
        let len = rng.gen_range(300..=1200);
        if rng.gen_bool(0.5) {
            obstacles.push(Segment::new(x, y, x + len, y));
        } else {
            obstacles.push(Segment::new(x, y, x, y + len));
        }
    }
    let n = rng.gen_range(2..=4);
    let l = 400.0;
    let free = |x: f64, y: f64, taken: &[(f64, f64)], obstacles: &[Segment]| {
        obstacles.iter().all(|s| square_segment_distance(x, y, l / 2.0, s) > 150.0)
            && taken.iter().all(|&(a, b)| square_square_distance(x, y, l / 2.0, a, b, l / 2.0) > 150.0)
    };
    let mut starts: Vec<(f64, f64)> = Vec::new();
    let mut goals: Vec<(f64, f64)> = Vec::new();
    let pick = |rng: &mut ChaCha8Rng, taken: &[(f64, f64)]| loop {
        let x = rng.gen_range(-2600.0..2600.0f64).round();
        let y = rng.gen_range(-2600.0..2600.0f64).round();
        if free(x, y, taken, &obstacles) {
            return (x, y);
        }
    };
    for _ in 0..n {
        let s = pick(&mut rng, &starts);
        starts.push(s);
    }
    for _ in 0..n {
        let mut taken = goals.clone();
        taken.extend(&starts);
        let g = pick(&mut rng, &taken);
        goals.push(g);
    }
    let agents = starts
        .iter()
        .map(|&(x, y)| RobotSpec { l: l as i64, pose: [x, y, rng.gen_range(-180.0..180.0f64).round()] })
        .collect();
    let plans = goals
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| Plan {
            robot: k + 1,
            options: Default::default(),
            steps: vec![PlanStep { prim: PrimitiveKind::GoTo, pose: [x, y, 0.0], objects: None }],
        })
        .collect();
    (Scene { obstacles, agents, objects: Vec::new(), workspaces: Vec::new() }, plans)
}

/// Whether a square of half side `h` slides from `p` to `q` keeping more
/// than `margin` from every shape.
pub fn line_clear(shapes: &[Shape], p: (f64, f64), q: (f64, f64), h: f64, margin: f64) -> bool {
    let len = (q.0 - p.0).hypot(q.1 - p.1);
    if len == 0.0 {
        return shapes.iter().all(|o| o.gap(p.0, p.1, h) > margin);
    }
    let u = ((q.0 - p.0) / len, (q.1 - p.1) / len);
    shapes.iter().all(|o| o.ray_entry(p, u, h + o.h + margin) > len)
}

/// Shortest 8-connected route on a grid of `cell` mm whose cells keep a
/// square of half side `h` more than `margin` from every shape. The two
/// endpoints are exempt from the clearance test. Returns the turning points
/// after line-of-sight pruning, ending at `goal`.
pub fn grid_path(
    shapes: &[Shape],
    start: (f64, f64),
    goal: (f64, f64),
    h: f64,
    cell: f64,
    margin: f64,
) -> Option<Vec<(f64, f64)>> {
    use petgraph::graph::{NodeIndex, UnGraph};
    let snap = |p: (f64, f64)| ((p.0 / cell).round() as i64, (p.1 / cell).round() as i64);
    let (mut x0, mut x1, mut y0, mut y1) = (start.0.min(goal.0), start.0.max(goal.0), start.1.min(goal.1), start.1.max(goal.1));
    for o in shapes {
        for (x, y) in [o.a, (o.a.0 + o.d.0, o.a.1 + o.d.1)] {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    // room to pass around the ends of free-standing walls
    let pad = 2.0 * (h + margin) + cell;
    let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
    let (s_cell, g_cell) = (snap(start), snap(goal));
    let free = |c: (i64, i64)| {
        c == s_cell || c == g_cell || shapes.iter().all(|o| o.gap(c.0 as f64 * cell, c.1 as f64 * cell, h) > margin)
    };
    let mut g: UnGraph<(i64, i64), f64> = UnGraph::new_undirected();
    let mut ids: BTreeMap<(i64, i64), NodeIndex> = BTreeMap::new();
    for x in (x0 / cell).floor() as i64..=(x1 / cell).ceil() as i64 {
        for y in (y0 / cell).floor() as i64..=(y1 / cell).ceil() as i64 {
            if free((x, y)) {
                ids.insert((x, y), g.add_node((x, y)));
            }
        }
    }
    for (&(x, y), &a) in &ids {
        for (dx, dy) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
            if let Some(&b) = ids.get(&(x + dx, y + dy)) {
                g.add_edge(a, b, if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 });
            }
        }
    }
    let (s, t) = (*ids.get(&s_cell)?, *ids.get(&g_cell)?);
    let target = g[t];
    let (_, path) = petgraph::algo::astar(
        &g,
        s,
        |n| n == t,
        |e| *e.weight(),
        |n| {
            let (x, y) = g[n];
            (((x - target.0) as f64).powi(2) + ((y - target.1) as f64).powi(2)).sqrt()
        },
    )?;
    let mut pts: Vec<(f64, f64)> = path.into_iter().map(|n| (g[n].0 as f64 * cell, g[n].1 as f64 * cell)).collect();
    pts[0] = start;
    *pts.last_mut().expect("non-empty path") = goal;
    // keep only the points where the line of sight breaks
    let mut out = Vec::new();
    let mut from = 0;
    while from + 1 < pts.len() {
        let mut to = pts.len() - 1;
        while to > from + 1 && !line_clear(shapes, pts[from], pts[to], h, margin / 2.0) {
            to -= 1;
        }
        out.push(pts[to]);
        from = to;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_reduces_to_braking_distance() {
        let p = DwaParams { eps: 0.0, v_obs: 0.0, b: 2.0, ..Default::default() };
        assert!((compute_v_cap(0.0, &p, 400.0) - 40.0).abs() < 1e-9);
    }

    #[test]
    fn straight_and_arc_integration() {
        let p = integrate(Pose { x: 0.0, y: 0.0, alpha: 0.0 }, ControlArc { v: 100.0, w: 0.0, t: 1.0 });
        assert!((p.x - 100.0).abs() < 1e-9 && p.y.abs() < 1e-9);
        // a quarter circle of radius r ends at (r, r)
        let r = 1000.0;
        let w: f64 = 90.0;
        let v = r * w.to_radians();
        let q = integrate(Pose { x: 0.0, y: 0.0, alpha: 0.0 }, ControlArc { v, w, t: 1.0 });
        assert!((q.x - r).abs() < 1e-6 && (q.y - r).abs() < 1e-6 && (q.alpha - 90.0).abs() < 1e-9);
    }

    #[test]
    fn wrap_angles() {
        assert_eq!(wrap(190.0), -170.0);
        assert_eq!(wrap(-190.0), 170.0);
        assert_eq!(wrap(180.0), 180.0);
    }
}
