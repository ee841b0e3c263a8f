#[path = "support/cycle.rs"]
mod cycle;

use std::collections::BTreeMap;

use cosmoplan_core::scene::{RobotSpec, Scene, Segment};
use cosmoplan_core::simulator::{
    compute_v_cap, crossing_scenario, dwa_step, grid_path, monitor_passive_safety,
    random_scenario, run, v_cap_branches, LogRow, Outcome, Pose, Sensed, Shape, SimLog,
};
use cosmoplan_core::{DwaParams, Plan, PlanStep, PrimitiveKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cycle::single_step;

const TICK: f64 = 0.1;

#[test]
fn one_control_cycle_keeps_passive_safety() {
    let moving = single_step(11, 10_000, TICK).unwrap();
    assert!(moving > 5_000, "only {moving} cases kept moving");
}

#[test]
fn cap_reduces_to_stopping_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let b = rng.gen_range(0.1..5000.0);
        let dist = rng.gen_range(0.0..1e5);
        let p = DwaParams { eps: 0.0, v_obs: 0.0, b, ..Default::default() };
        let want = (2.0 * b * dist).sqrt();
        let got = compute_v_cap(rng.gen_range(0.0..1000.0), &p, dist);
        assert!((got - want).abs() <= 1e-9 * want.max(1e-300), "b={b} dist={dist}: {got} vs {want}");
    }
    let p = DwaParams { eps: 0.0, v_obs: 0.0, b: 2.0, ..Default::default() };
    assert!((compute_v_cap(0.0, &p, 400.0) - 40.0).abs() < 1e-12);
}

#[test]
fn cap_branches_differ_by_one_cycle_of_accel_and_brake() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let p = DwaParams {
            a: rng.gen_range(1.0..2000.0),
            b: rng.gen_range(1.0..2000.0),
            eps: rng.gen_range(0.01..1.0),
            v_obs: rng.gen_range(0.0..1000.0),
            ..Default::default()
        };
        let (hi, lo) = v_cap_branches(&p, rng.gen_range(0.0..1e5));
        let want = (p.a + p.b) * p.eps;
        assert!(((hi - lo) - want).abs() <= 1e-9 * want);
    }
    assert_eq!(compute_v_cap(300.0, &DwaParams::default(), 0.0), 0.0);
}

/// Sweeping a wall through the stopping envelope: the chosen speed never
/// exceeds the cap, and once the cap falls below the window the robot brakes.
#[test]
fn wall_near_stopping_boundary_limits_speed() {
    let p = DwaParams::default();
    let still = DwaParams { v_obs: 0.0, ..p.clone() };
    let h = 200.0;
    let here = Pose { x: 0.0, y: 0.0, alpha: 0.0 };
    let (mut braked, mut free) = (0, 0);
    for k in 0..1200u64 {
        let v = [150.0, 250.0, 350.0, 450.0][k as usize % 4];
        let x = h as i64 + k as i64;
        let mut s = Sensed::default();
        s.statics.push(Shape::wall(&Segment::new(x, -5000, x, 5000)));
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let u = dwa_step(here, v, h, (5000.0, 0.0), &s, &p, TICK, &mut rng);
        // the cap is taken along the heading the arc ends up facing
        let facing = Pose { alpha: u.w * TICK, ..here };
        let (ds, _) = s.ahead(facing, h, v, &p, 0.0);
        let cap = compute_v_cap(v, &still, ds);
        let v_lo = v - p.b * TICK;
        if cap < v_lo {
            assert_eq!(u.v, v_lo, "gap {k}: cap {cap} below window, must brake");
            braked += 1;
        } else {
            assert!(u.v <= cap + 1e-9, "gap {k}: v {} above cap {cap}", u.v);
            free += (u.v > v) as usize;
        }
    }
    assert!(braked > 50 && free > 50, "{braked} braked, {free} sped up");
}

fn row(v: f64, d: f64) -> LogRow {
    LogRow {
        tick: 1,
        robot: 1,
        x: 0.0,
        y: 0.0,
        alpha: 0.0,
        v,
        omega: 0.0,
        d_static: d,
        d_dynamic: d,
        safe: true,
        primitive: "GoTo".into(),
        status: "moving".into(),
    }
}

fn log_of(rows: Vec<LogRow>) -> SimLog {
    SimLog {
        tick: TICK,
        params: DwaParams::default(),
        rows,
        bus: Vec::new(),
        outcome: Outcome::Completed { tick: 1 },
        final_poses: Vec::new(),
        final_objects: Vec::new(),
    }
}

#[test]
fn monitor_flags_only_moving_robots_too_close() {
    assert!(monitor_passive_safety(&log_of(vec![row(0.0, 0.0), row(0.0, 5.0)])).is_ok());
    assert_eq!(monitor_passive_safety(&log_of(vec![row(10.0, 0.0)])), Err(vec![(1, 1)]));
    assert!(monitor_passive_safety(&log_of(vec![row(10.0, 1000.0)])).is_ok());
}

/// Pairs of robot footprints that overlap at the same tick.
fn overlaps(scene: &Scene, log: &SimLog) -> usize {
    let mut by_tick: BTreeMap<usize, Vec<&LogRow>> = BTreeMap::new();
    for r in &log.rows {
        by_tick.entry(r.tick).or_default().push(r);
    }
    let mut n = 0;
    for rows in by_tick.values() {
        for a in rows {
            for b in rows.iter().filter(|b| b.robot > a.robot) {
                let reach = (scene.agents[a.robot - 1].l + scene.agents[b.robot - 1].l) as f64 / 2.0;
                n += ((a.x - b.x).abs() < reach - 1e-6 && (a.y - b.y).abs() < reach - 1e-6) as usize;
            }
        }
    }
    n
}

fn kinematics_hold(log: &SimLog) -> bool {
    let p = &log.params;
    let mut last: BTreeMap<usize, f64> = BTreeMap::new();
    log.rows.iter().all(|r| {
        let prev = last.insert(r.robot, r.v).unwrap_or(0.0);
        (r.v - prev).abs() <= p.a.max(p.b) * log.tick + 1e-9 && r.omega.abs() <= p.omega + 1e-9
    })
}

#[test]
fn crossing_robots_swerve_and_stay_safe() {
    let (scene, plans) = crossing_scenario();
    let log = run(&plans, &scene, &DwaParams::default(), TICK, 60.0, 0);
    assert!(log.completed(), "{:?}", log.outcome);
    assert_eq!(monitor_passive_safety(&log), Ok(()));
    assert_eq!(overlaps(&scene, &log), 0);
    assert!(kinematics_hold(&log));
    for robot in 1..=2 {
        assert!(log.rows.iter().any(|r| r.robot == robot && r.omega != 0.0 && r.v > 0.0));
    }
}

#[test]
fn random_scenes_complete_safely() {
    for seed in 0..100 {
        let (scene, plans) = random_scenario(seed);
        let log = run(&plans, &scene, &DwaParams::default(), TICK, 120.0, seed);
        assert!(log.completed(), "seed {seed}: {:?}", log.outcome);
        assert_eq!(monitor_passive_safety(&log), Ok(()), "seed {seed}");
        assert_eq!(overlaps(&scene, &log), 0, "seed {seed}");
        assert!(kinematics_hold(&log), "seed {seed}");
    }
}

#[test]
fn runs_are_bit_identical() {
    let (scene, plans) = random_scenario(5);
    let a = run(&plans, &scene, &DwaParams::default(), TICK, 120.0, 9);
    let b = run(&plans, &scene, &DwaParams::default(), TICK, 120.0, 9);
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn lone_robot_reaches_its_goal() {
    let scene = Scene {
        obstacles: vec![
            Segment::new(-3000, -3000, 3000, -3000),
            Segment::new(3000, -3000, 3000, 3000),
            Segment::new(3000, 3000, -3000, 3000),
            Segment::new(-3000, 3000, -3000, -3000),
        ],
        agents: vec![RobotSpec { l: 400, pose: [-2000.0, -2000.0, 0.0] }],
        objects: Vec::new(),
        workspaces: Vec::new(),
    };
    let plan = Plan {
        robot: 1,
        options: Default::default(),
        steps: vec![PlanStep { prim: PrimitiveKind::GoTo, pose: [1500.0, 1000.0, 90.0], objects: None }],
    };
    let p = DwaParams::default();
    let log = run(&[plan], &scene, &p, TICK, 60.0, 0);
    assert!(log.completed());
    let end = log.final_poses[0];
    assert!((end.x - 1500.0).hypot(end.y - 1000.0) <= p.pos_tol);
    assert!((end.alpha - 90.0).abs() <= p.ang_tol);
    assert!(kinematics_hold(&log));
}

#[test]
fn grid_route_goes_around_a_wall() {
    let wall = Shape::wall(&Segment::new(0, -1000, 0, 1000));
    let path = grid_path(&[wall], (-800.0, 0.0), (800.0, 0.0), 200.0, 100.0, 30.0).unwrap();
    assert_eq!(*path.last().unwrap(), (800.0, 0.0));
    assert!(path.iter().any(|q| q.1.abs() > 1000.0));
    let boxed: Vec<Shape> = [(-500, -500, 500, -500), (500, -500, 500, 500), (500, 500, -500, 500), (-500, 500, -500, -500)]
        .iter()
        .map(|&(a, b, c, d)| Shape::wall(&Segment::new(a, b, c, d)))
        .collect();
    assert!(grid_path(&boxed, (0.0, 0.0), (2000.0, 0.0), 200.0, 100.0, 30.0).is_none());
}
