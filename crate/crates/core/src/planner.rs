//! Per-robot plan synthesis by iterative deepening over the trace length,
//! and the request/response loop that adjusts local missions when a robot
//! has to ask another one to clear an object out of its way.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{chain_word, format_word, Dfa, Word};
use crate::cltlb::{check_trace, CheckOutcome, EvalError, Formula, Trace};
use crate::mission::{insert_coordination, verify_rule, CoordinationRequest, MissionError, RuleVerdict};
use crate::primspec::{
    ba, bp, bx, by, encode_word, initial_spec, primitives_spec, EventError, EventKind,
    PrimitiveKind, SpecOptions, RA, RX, RY,
};
use crate::scene::{squares_overlap, Scene};
use crate::smtgate::{find_trace, SmtError, SolveFailure};

/// Position and flags of one object after a step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub pos: [f64; 2],
    #[serde(default)]
    pub p: bool,
    #[serde(default)]
    pub a: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepJson", into = "StepJson")]
pub struct PlanStep {
    pub prim: PrimitiveKind,
    /// (x mm, y mm, α deg) after the step.
    pub pose: [f64; 3],
    /// Object states after the step; rebuilt from the primitives when absent.
    pub objects: Option<Vec<ObjectState>>,
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    prim: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    obj: Option<usize>,
    pose: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objects: Option<Vec<ObjectState>>,
}

impl TryFrom<StepJson> for PlanStep {
    type Error = String;
    fn try_from(s: StepJson) -> Result<Self, String> {
        let prim = PrimitiveKind::from_name(&s.prim, s.obj)
            .ok_or_else(|| format!("bad primitive {} {:?}", s.prim, s.obj))?;
        Ok(PlanStep { prim, pose: s.pose, objects: s.objects })
    }
}

impl From<PlanStep> for StepJson {
    fn from(s: PlanStep) -> Self {
        StepJson {
            prim: s.prim.name().to_string(),
            obj: s.prim.object(),
            pose: s.pose,
            objects: s.objects,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub robot: usize,
    #[serde(default)]
    pub options: SpecOptions,
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Objects this plan asks to be cleared.
    pub fn requests(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .steps
            .iter()
            .filter_map(|s| match s.prim {
                PrimitiveKind::Req(j) => Some(j),
                _ => None,
            })
            .collect();
        set.into_iter().collect()
    }

    pub fn from_json_str(s: &str) -> Result<Plan, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn load(path: &Path) -> Result<Plan, PlanError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlanError::Io(format!("{}: {e}", path.display())))?;
        Plan::from_json_str(&text).map_err(|e| PlanError::Io(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), PlanError> {
        std::fs::write(path, self.to_json_string() + "\n")
            .map_err(|e| PlanError::Io(format!("{}: {e}", path.display())))
    }

    /// Valuation over instants 0..=K: instant 0 is the scene's initial
    /// state, instant k the state after step k.
    pub fn trace(&self, scene: &Scene) -> Trace {
        let k = self.steps.len();
        let mut tr = Trace::new(k);
        let home = scene.robot(self.robot);
        let mut xs = vec![home.x()];
        let mut ys = vec![home.y()];
        let mut als = vec![home.alpha()];
        let n = scene.num_objects();
        let mut objs: Vec<Vec<ObjectState>> = vec![scene
            .objects
            .iter()
            .map(|b| ObjectState { pos: [b.pos[0] as f64, b.pos[1] as f64], p: false, a: false })
            .collect()];
        for (idx, s) in self.steps.iter().enumerate() {
            tr.prims[idx + 1] = Some(s.prim);
            let next = match &s.objects {
                Some(o) if o.len() == n => o.clone(),
                _ => self.apply(scene, objs.last().unwrap(), s.prim, [xs[idx], ys[idx]]),
            };
            xs.push(s.pose[0]);
            ys.push(s.pose[1]);
            als.push(s.pose[2]);
            objs.push(next);
        }
        tr.set_var(RX, xs);
        tr.set_var(RY, ys);
        tr.set_var(RA, als);
        for j in 1..=n {
            tr.set_var(&bx(j), objs.iter().map(|o| o[j - 1].pos[0]).collect());
            tr.set_var(&by(j), objs.iter().map(|o| o[j - 1].pos[1]).collect());
            tr.set_prop(&bp(j), objs.iter().map(|o| o[j - 1].p).collect());
            tr.set_prop(&ba(j), objs.iter().map(|o| o[j - 1].a).collect());
        }
        tr
    }

    /// Nominal effect of a primitive on the objects, given the robot
    /// position before the step.
    fn apply(&self, scene: &Scene, before: &[ObjectState], prim: PrimitiveKind, at: [f64; 2]) -> Vec<ObjectState> {
        let mut out = before.to_vec();
        match prim {
            PrimitiveKind::PickUp(j) if j <= out.len() => out[j - 1].p = true,
            PrimitiveKind::DropOff(j) if j <= out.len() => {
                let d = (scene.robot(self.robot).l + scene.object(j).l) as f64 / 2.0
                    + self.options.reach as f64;
                out[j - 1] = ObjectState { pos: [at[0] + d, at[1]], p: false, a: out[j - 1].a };
            }
            PrimitiveKind::Req(j) if j <= out.len() => out[j - 1].a = true,
            _ => {}
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible(usize),
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub robot: usize,
    pub verdict: Verdict,
    pub requests_used: Vec<usize>,
    pub blocking_objects: Vec<usize>,
    /// Which bound ended the search when infeasible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<String>,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("robot {robot}: solver gave no verdict at K={k}: {reason}")]
    Unknown { robot: usize, k: usize, reason: String },
    #[error("robot {robot}: decoded plan fails its own constraints at instant {instant}: {clause}")]
    Replay { robot: usize, instant: usize, clause: String },
    #[error("robot {}: no plan up to K={}, blocking objects {:?}", .0.robot, .1, .0.blocking_objects)]
    Infeasible(Feedback, usize),
    #[error("robot {robot} requests object {object}, which no mission picks up")]
    NoResponder { robot: usize, object: usize },
    #[error("coordinated missions violate the global mission: {0}")]
    Verification(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Clone, Debug)]
pub struct PlanConfig {
    pub k_max: usize,
    pub solver: String,
    pub timeout: Duration,
    pub options: SpecOptions,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            k_max: 14,
            solver: crate::smtgate::default_solver(),
            timeout: Duration::from_secs(120),
            options: SpecOptions { clearance: 20, reach: 20 },
        }
    }
}

/// Initial state ∧ primitive constraints ∧ mission for robot `i`.
pub fn plan_formula(
    i: usize,
    mission: &[String],
    scene: &Scene,
    opts: &SpecOptions,
) -> Result<Formula, EventError> {
    Ok(Formula::and(vec![
        initial_spec(i, scene),
        primitives_spec(i, scene, opts),
        encode_word(mission, scene, i)?,
    ]))
}

fn mission_word(i: usize, mission: &Dfa) -> Result<Word, PlanError> {
    chain_word(mission).map_err(|states| MissionError::NotSequential { agent: i, states }.into())
}

/// Replay a plan against `f` (normally [`plan_formula`]).
pub fn check_plan(f: &Formula, plan: &Plan, scene: &Scene) -> Result<CheckOutcome, EvalError> {
    check_trace(f, &plan.trace(scene))
}

fn plan_from_trace(i: usize, tr: &Trace, n: usize, opts: SpecOptions) -> Plan {
    let var = |name: &str, k: usize| tr.var(name, k).unwrap_or(0.0);
    let steps = (1..=tr.k)
        .map(|k| PlanStep {
            prim: tr.prims[k].unwrap_or(PrimitiveKind::GoTo),
            pose: [var(RX, k), var(RY, k), var(RA, k)],
            objects: Some(
                (1..=n)
                    .map(|j| ObjectState {
                        pos: [var(&bx(j), k), var(&by(j), k)],
                        p: tr.prop(&bp(j), k).unwrap_or(false),
                        a: tr.prop(&ba(j), k).unwrap_or(false),
                    })
                    .collect(),
            ),
        })
        .collect();
    Plan { robot: i, options: opts, steps }
}

/// Turn GoTo steps into stays wherever the plan remains valid. The solver
/// fills spare instants with arbitrary poses; staying put is what a robot
/// should do with them.
fn settle_idle_moves(f: &Formula, mut plan: Plan, scene: &Scene) -> Result<Plan, EvalError> {
    let home = scene.robot(plan.robot).pose;
    for s in 0..plan.steps.len() {
        let prev = if s == 0 { home } else { plan.steps[s - 1].pose };
        if plan.steps[s].prim != PrimitiveKind::GoTo || plan.steps[s].pose == prev {
            continue;
        }
        let mut trial = plan.clone();
        let old = trial.steps[s].pose;
        trial.steps[s].pose = prev;
        // stationary primitives after it stay where the robot is
        for st in trial.steps[s + 1..].iter_mut().take_while(|st| st.prim != PrimitiveKind::GoTo) {
            if st.pose == old {
                st.pose = prev;
            }
        }
        if check_plan(f, &trial, scene)? == CheckOutcome::Satisfied {
            plan = trial;
        }
    }
    Ok(plan)
}

/// Objects whose footprint overlaps the robot's (inflated) approach pose for
/// an object it has to pick up.
pub fn blocking_objects(i: usize, mission: &[String], scene: &Scene, opts: &SpecOptions) -> Vec<usize> {
    let r = scene.robot(i);
    let mut out = BTreeSet::new();
    for e in mission {
        let Some(EventKind::Pick { object: j, .. }) = EventKind::parse(e) else { continue };
        if j == 0 || j > scene.num_objects() {
            continue;
        }
        let b = scene.object(j);
        let d = (r.l + b.l) as f64 / 2.0 + opts.reach as f64;
        let (ax, ay) = (b.pos[0] as f64 - d, b.pos[1] as f64);
        let h = r.l as f64 / 2.0 + opts.clearance as f64;
        for (l, o) in scene.objects.iter().enumerate() {
            if l + 1 != j
                && squares_overlap(ax, ay, h, o.pos[0] as f64, o.pos[1] as f64, o.l as f64 / 2.0)
            {
                out.insert(l + 1);
            }
        }
    }
    out.into_iter().collect()
}

fn forbid_requests(objs: &BTreeSet<usize>) -> Formula {
    Formula::and(
        objs.iter()
            .map(|&j| Formula::always(Formula::not(Formula::prim(PrimitiveKind::Req(j)))))
            .collect(),
    )
}

/// Minimum-length plan for robot `i`. Among plans of that length, one with
/// as few requests outside the mission as the solver allows is kept.
pub fn plan(
    i: usize,
    mission: &Dfa,
    scene: &Scene,
    cfg: &PlanConfig,
) -> Result<(Option<Plan>, Feedback), PlanError> {
    let w = mission_word(i, mission)?;
    plan_word(i, &w, scene, cfg)
}

pub fn plan_word(
    i: usize,
    w: &[String],
    scene: &Scene,
    cfg: &PlanConfig,
) -> Result<(Option<Plan>, Feedback), PlanError> {
    let n = scene.num_objects();
    let base = plan_formula(i, w, scene, &cfg.options)?;
    let in_mission: BTreeSet<usize> = w
        .iter()
        .filter_map(|e| match EventKind::parse(e) {
            Some(EventKind::Request { object }) => Some(object),
            _ => None,
        })
        .collect();
    let optional: BTreeSet<usize> = (1..=n).filter(|j| !in_mission.contains(j)).collect();
    let solve = |f: &Formula, k: usize| -> Result<Option<Trace>, PlanError> {
        find_trace(f, k, n, &cfg.solver, cfg.timeout).map_err(|e| match e {
            SolveFailure::Smt(e) => PlanError::Smt(e),
            SolveFailure::Unknown(reason) => PlanError::Unknown { robot: i, k, reason },
        })
    };
    for k in w.len()..=cfg.k_max {
        let strict = Formula::and(vec![base.clone(), forbid_requests(&optional)]);
        let mut found = solve(&strict, k)?;
        if found.is_none() && !optional.is_empty() {
            if let Some(mut tr) = solve(&base, k)? {
                let mut forbidden = BTreeSet::new();
                let used: Vec<usize> = plan_from_trace(i, &tr, n, cfg.options)
                    .requests()
                    .into_iter()
                    .filter(|j| optional.contains(j))
                    .collect();
                for j in used {
                    let mut trial = forbidden.clone();
                    trial.insert(j);
                    let f = Formula::and(vec![base.clone(), forbid_requests(&trial)]);
                    if let Some(t) = solve(&f, k)? {
                        forbidden = trial;
                        tr = t;
                    }
                }
                found = Some(tr);
            }
        }
        if let Some(tr) = found {
            let p = settle_idle_moves(&base, plan_from_trace(i, &tr, n, cfg.options), scene)?;
            if let CheckOutcome::Violated { instant, clause } = check_plan(&base, &p, scene)? {
                return Err(PlanError::Replay { robot: i, instant, clause: clause.to_string() });
            }
            let fb = Feedback {
                robot: i,
                verdict: Verdict::Feasible(k),
                requests_used: p.requests(),
                blocking_objects: Vec::new(),
                limit: None,
            };
            return Ok((Some(p), fb));
        }
    }
    Ok((
        None,
        Feedback {
            robot: i,
            verdict: Verdict::Infeasible,
            requests_used: Vec::new(),
            blocking_objects: blocking_objects(i, w, scene, &cfg.options),
            limit: Some(format!("K_max={}", cfg.k_max)),
        },
    ))
}

#[derive(Clone, Debug)]
pub struct Coordination {
    pub plans: Vec<Plan>,
    pub missions: Vec<Dfa>,
    pub feedback: Vec<Feedback>,
    pub inserted: Vec<CoordinationRequest>,
    pub rounds: usize,
}

/// Robot (1-based) whose mission picks up object `j`, with the pick event.
fn responder(missions: &[Word], j: usize) -> Option<(usize, String)> {
    missions.iter().enumerate().find_map(|(r, w)| {
        w.iter()
            .find(|e| matches!(EventKind::parse(e), Some(EventKind::Pick { object, .. }) if object == j))
            .map(|e| (r + 1, e.clone()))
    })
}

/// Plan every robot; whenever a plan relies on Req(j), add the request to
/// the requester's mission and the response to the mission of the robot
/// that picks j up, then re-plan both. Stops when no new pair appears.
pub fn coordinate(
    missions: &[Dfa],
    scene: &Scene,
    global: Option<&Dfa>,
    cfg: &PlanConfig,
) -> Result<Coordination, PlanError> {
    let mut missions = missions.to_vec();
    let m = missions.len();
    let mut plans: Vec<Option<Plan>> = vec![None; m];
    let mut feedback: Vec<Option<Feedback>> = vec![None; m];
    let mut dirty: BTreeSet<usize> = (1..=m).collect();
    let mut inserted = Vec::new();
    let mut rounds = 0;
    while !dirty.is_empty() {
        rounds += 1;
        for &i in &dirty {
            let (p, fb) = plan(i, &missions[i - 1], scene, cfg)?;
            if p.is_none() {
                return Err(PlanError::Infeasible(fb, cfg.k_max));
            }
            plans[i - 1] = p;
            feedback[i - 1] = Some(fb);
        }
        dirty.clear();
        let words = missions
            .iter()
            .enumerate()
            .map(|(r, d)| mission_word(r + 1, d))
            .collect::<Result<Vec<_>, _>>()?;
        for i in 1..=m {
            let used = feedback[i - 1].as_ref().map(|f| f.requests_used.clone()).unwrap_or_default();
            for j in used {
                let req_event = format!("?O{j}Away");
                if words[i - 1].contains(&req_event) {
                    continue;
                }
                let (r, anchor) =
                    responder(&words, j).ok_or(PlanError::NoResponder { robot: i, object: j })?;
                let req = CoordinationRequest { requester: i, responder: r, object: j };
                missions = insert_coordination(&missions, &req, &anchor)?;
                dirty.insert(i);
                dirty.insert(r);
                inserted.push(req);
            }
        }
        if !dirty.is_empty() {
            if let Some(g) = global {
                if let RuleVerdict::Fails { counterexample } = verify_rule(&missions, g)? {
                    return Err(PlanError::Verification(format_word(&counterexample)));
                }
            }
        }
    }
    Ok(Coordination {
        plans: plans.into_iter().map(|p| p.expect("every robot planned")).collect(),
        missions,
        feedback: feedback.into_iter().map(|f| f.expect("every robot planned")).collect(),
        inserted,
        rounds,
    })
}

/// Check a plan against the robot's mission, using the plan's own options.
pub fn check_plan_against(plan: &Plan, mission: &Dfa, scene: &Scene) -> Result<CheckOutcome, PlanError> {
    let w = mission_word(plan.robot, mission)?;
    let f = plan_formula(plan.robot, &w, scene, &plan.options)?;
    Ok(check_plan(&f, plan, scene)?)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_json_shape() {
        let s = PlanStep { prim: PrimitiveKind::Req(2), pose: [-2000.0, -2000.0, 0.0], objects: None };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"prim":"Req","obj":2,"pose":[-2000.0,-2000.0,0.0]}"#);
        let back: PlanStep = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let g: PlanStep = serde_json::from_str(r#"{"prim":"GoTo","pose":[1,2,0]}"#).unwrap();
        assert_eq!(g.prim, PrimitiveKind::GoTo);
        assert!(serde_json::from_str::<PlanStep>(r#"{"prim":"PickUp","pose":[1,2,0]}"#).is_err());
    }

    #[test]
    fn feedback_json_shape() {
        let f = Feedback {
            robot: 1,
            verdict: Verdict::Feasible(7),
            requests_used: vec![2],
            blocking_objects: vec![],
            limit: None,
        };
        assert_eq!(
            serde_json::to_string(&f).unwrap(),
            r#"{"robot":1,"verdict":{"feasible":7},"requests_used":[2],"blocking_objects":[]}"#
        );
    }
}
