use cosmoplan_core::scene::Segment;
use cosmoplan_core::simulator::{dwa_step, integrate, is_safe, Pose, Sensed, Shape};
use cosmoplan_core::DwaParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn monitor_ok(s: &Sensed, pose: Pose, h: f64, v: f64, p: &DwaParams, extra: f64) -> bool {
    let (ds, dd) = s.ahead(pose, h, v, p, extra);
    is_safe(v, ds, p.b, 0.0) && is_safe(v, dd, p.b, p.v_obs)
}

fn random_state(rng: &mut ChaCha8Rng, h: f64) -> (Pose, f64, Sensed) {
    let pose = Pose { x: 0.0, y: 0.0, alpha: rng.gen_range(-180.0..180.0) };
    let v = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..500.0) };
    let mut s = Sensed::default();
    let coord = |rng: &mut ChaCha8Rng| rng.gen_range(-1500i64..1500);
    for _ in 0..rng.gen_range(0..3) {
        let seg = Segment::new(coord(rng), coord(rng), coord(rng), coord(rng));
        s.statics.push(Shape::wall(&seg));
    }
    for _ in 0..rng.gen_range(0..3) {
        s.statics.push(Shape::square(rng.gen_range(-1200.0..1200.0), rng.gen_range(-1200.0..1200.0), 50.0));
    }
    for _ in 0..rng.gen_range(0..4) {
        s.dynamics.push(Shape::square(rng.gen_range(-1500.0..1500.0), rng.gen_range(-1500.0..1500.0), h));
    }
    (pose, v, s)
}

/// One controller step from random safe states, with moving obstacles then
/// displaced by up to one cycle of their top speed. Returns how many of the
/// `cases` steps kept the robot moving.
pub fn single_step(seed: u64, cases: usize, tick: f64) -> Result<usize, String> {
    let p = DwaParams::default();
    let h = 200.0;
    let shift = p.v_obs * tick;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut moving = 0;
    while checked < cases {
        let (pose, v, mut s) = random_state(&mut rng, h);
        let (gs, gd) = s.gaps(pose.x, pose.y, h);
        // Start from the invariant the controller maintains: safe even if
        // moving obstacles shift by up to one cycle of travel.
        if gs <= 0.0 || gd <= 0.0 || !monitor_ok(&s, pose, h, v, &p, shift) {
            continue;
        }
        let goal = (rng.gen_range(-2500.0..2500.0), rng.gen_range(-2500.0..2500.0));
        let u = dwa_step(pose, v, h, goal, &s, &p, tick, &mut rng);
        if (u.v - v).abs() > p.a.max(p.b) * tick + 1e-9 || u.w.abs() > p.omega + 1e-9 || u.v < 0.0 {
            return Err(format!("case {checked}: {u:?} leaves the dynamic window from v={v}"));
        }
        let end = integrate(pose, u);
        for o in &mut s.dynamics {
            let (r, th): (f64, f64) = (rng.gen_range(0.0..=shift), rng.gen_range(0.0..std::f64::consts::TAU));
            o.a = (o.a.0 + r * th.cos(), o.a.1 + r * th.sin());
        }
        if !monitor_ok(&s, end, h, u.v, &p, 0.0) {
            return Err(format!("case {checked}: {pose:?} v={v} -> {u:?} is unsafe"));
        }
        checked += 1;
        moving += (u.v > 0.0) as usize;
    }
    Ok(moving)
}
