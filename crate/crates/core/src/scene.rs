//! Scene description: wall segments, square robots and square movable
//! objects. Lengths are millimetres, angles degrees. Indices exposed to the
//! rest of the crate are 1-based, matching the constraint formulas.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scene schema: {0}")]
    Schema(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct Segment {
    pub xi: i64,
    pub yi: i64,
    pub xf: i64,
    pub yf: i64,
}

impl From<[i64; 4]> for Segment {
    fn from(a: [i64; 4]) -> Self {
        Segment { xi: a[0], yi: a[1], xf: a[2], yf: a[3] }
    }
}

impl From<Segment> for [i64; 4] {
    fn from(s: Segment) -> Self {
        [s.xi, s.yi, s.xf, s.yf]
    }
}

impl Segment {
    pub fn new(xi: i64, yi: i64, xf: i64, yf: i64) -> Self {
        Segment { xi, yi, xf, yf }
    }

    pub fn is_degenerate(&self) -> bool {
        self.xi == self.xf && self.yi == self.yf
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub l: i64,
    /// (x, y, alpha)
    pub pose: [f64; 3],
}

impl RobotSpec {
    pub fn x(&self) -> f64 {
        self.pose[0]
    }
    pub fn y(&self) -> f64 {
        self.pose[1]
    }
    pub fn alpha(&self) -> f64 {
        self.pose[2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub l: i64,
    pub pos: [i64; 2],
    #[serde(default, skip_serializing_if = "is_false")]
    pub p: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub a: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Axis-aligned target window [xlo, xhi] × [ylo, yhi] for drop-off events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct Window {
    pub xlo: i64,
    pub xhi: i64,
    pub ylo: i64,
    pub yhi: i64,
}

impl From<[i64; 4]> for Window {
    fn from(a: [i64; 4]) -> Self {
        Window { xlo: a[0], xhi: a[1], ylo: a[2], yhi: a[3] }
    }
}

impl From<Window> for [i64; 4] {
    fn from(w: Window) -> Self {
        [w.xlo, w.xhi, w.ylo, w.yhi]
    }
}

impl Window {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xlo as f64 && x <= self.xhi as f64 && y >= self.ylo as f64 && y <= self.yhi as f64
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub obstacles: Vec<Segment>,
    #[serde(default)]
    pub agents: Vec<RobotSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub workspaces: Vec<Window>,
}

/// ∞-norm distance from the axis-aligned square (centre, half side `h`) to
/// a segment; 0 when they touch or overlap.
pub fn square_segment_distance(cx: f64, cy: f64, h: f64, s: &Segment) -> f64 {
    (center_segment_inf_distance(cx, cy, s) - h).max(0.0)
}

/// min over t ∈ [0,1] of ‖p − s(t)‖∞. The function is convex and piecewise
/// linear in t, so its minimum sits on one of the breakpoints.
pub fn center_segment_inf_distance(cx: f64, cy: f64, s: &Segment) -> f64 {
    point_segment_inf_distance(cx, cy, (s.xi as f64, s.yi as f64), (s.xf as f64, s.yf as f64))
}

pub fn point_segment_inf_distance(cx: f64, cy: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ax, ay) = (a.0 - cx, a.1 - cy);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let f = |t: f64| (ax + dx * t).abs().max((ay + dy * t).abs());
    let mut cands = vec![0.0, 1.0];
    if dx != 0.0 {
        cands.push(-ax / dx);
    }
    if dy != 0.0 {
        cands.push(-ay / dy);
    }
    if dx - dy != 0.0 {
        cands.push((ay - ax) / (dx - dy));
    }
    if dx + dy != 0.0 {
        cands.push(-(ax + ay) / (dx + dy));
    }
    cands
        .into_iter()
        .filter(|t| t.is_finite())
        .map(|t| f(t.clamp(0.0, 1.0)))
        .fold(f64::INFINITY, f64::min)
}

/// ∞-norm gap between two axis-aligned squares (0 when overlapping).
pub fn square_square_distance(ax: f64, ay: f64, ah: f64, bx: f64, by: f64, bh: f64) -> f64 {
    let gx = (ax - bx).abs() - ah - bh;
    let gy = (ay - by).abs() - ah - bh;
    gx.max(gy).max(0.0)
}

/// Whether two closed squares share interior points.
pub fn squares_overlap(ax: f64, ay: f64, ah: f64, bx: f64, by: f64, bh: f64) -> bool {
    (ax - bx).abs() < ah + bh && (ay - by).abs() < ah + bh
}

impl Scene {
    pub fn from_json_str(s: &str) -> Result<Scene, SceneError> {
        serde_json::from_str(s).map_err(|e| SceneError::Schema(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// Load and validate.
    pub fn load(path: &Path) -> Result<Scene, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
        let scene = Scene::from_json_str(&text)?;
        let issues = scene.validate();
        if !issues.is_empty() {
            return Err(SceneError::Invalid(issues.join("; ")));
        }
        Ok(scene)
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        std::fs::write(path, self.to_json_string() + "\n")
            .map_err(|source| SceneError::Io { path: path.display().to_string(), source })
    }

    pub fn robot(&self, i: usize) -> &RobotSpec {
        &self.agents[i - 1]
    }

    pub fn object(&self, j: usize) -> &ObjectSpec {
        &self.objects[j - 1]
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    /// List of invariant violations; empty when the scene is well formed.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, s) in self.obstacles.iter().enumerate() {
            if s.is_degenerate() {
                out.push(format!("obstacle {} is a single point", k + 1));
            }
        }
        for (i, r) in self.agents.iter().enumerate() {
            if r.l <= 0 {
                out.push(format!("robot {} has non-positive length", i + 1));
                continue;
            }
            if !r.pose.iter().all(|v| v.is_finite()) {
                out.push(format!("robot {} has a non-finite pose", i + 1));
                continue;
            }
            let h = r.l as f64 / 2.0;
            for (k, s) in self.obstacles.iter().enumerate() {
                if !s.is_degenerate() && center_segment_inf_distance(r.x(), r.y(), s) < h {
                    out.push(format!("robot {} overlaps obstacle {}", i + 1, k + 1));
                }
            }
            for (k, o) in self.agents.iter().enumerate().skip(i + 1) {
                if o.l > 0
                    && squares_overlap(r.x(), r.y(), h, o.x(), o.y(), o.l as f64 / 2.0)
                {
                    out.push(format!("robot {} overlaps robot {}", i + 1, k + 1));
                }
            }
            for (j, b) in self.objects.iter().enumerate() {
                if b.l > 0
                    && squares_overlap(r.x(), r.y(), h, b.pos[0] as f64, b.pos[1] as f64, b.l as f64 / 2.0)
                {
                    out.push(format!("robot {} overlaps object {}", i + 1, j + 1));
                }
            }
        }
        for (j, b) in self.objects.iter().enumerate() {
            if b.l <= 0 {
                out.push(format!("object {} has non-positive length", j + 1));
            }
            if b.p || b.a {
                out.push(format!("object {} starts carried or away", j + 1));
            }
        }
        for (k, w) in self.workspaces.iter().enumerate() {
            if w.xlo > w.xhi || w.ylo > w.yhi {
                out.push(format!("workspace {} has reversed bounds", k + 1));
            }
        }
        out
    }

    /// Bounding box of all geometry: (xmin, xmax, ymin, ymax).
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.obstacles {
            xs.extend([s.xi as f64, s.xf as f64]);
            ys.extend([s.yi as f64, s.yf as f64]);
        }
        for r in &self.agents {
            xs.push(r.x());
            ys.push(r.y());
        }
        for b in &self.objects {
            xs.push(b.pos[0] as f64);
            ys.push(b.pos[1] as f64);
        }
        if xs.is_empty() {
            return (0.0, 0.0, 0.0, 0.0);
        }
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min(&xs), max(&xs), min(&ys), max(&ys))
    }
}
