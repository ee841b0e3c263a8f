//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p cosmoplan-cli --test acceptance --release`.

#[path = "../../core/tests/support/cycle.rs"]
mod cycle;
#[path = "../../core/tests/support/formulas.rs"]
mod formulas;
#[path = "../../core/tests/support/targets.rs"]
mod targets;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cosmoplan_core::automata::{equivalent, equivalent_role, included, word, Alphabet, Role};
use cosmoplan_core::cltlb::CheckOutcome;
use cosmoplan_core::mission::{decompose, learn_assumption, lstar, verify_rule, CoordinationRequest, LearnOutcome};
use cosmoplan_core::planner::{check_plan_against, coordinate, PlanConfig};
use cosmoplan_core::simulator::{
    compute_v_cap, crossing_scenario, monitor_passive_safety, random_scenario, run, v_cap_branches,
};
use cosmoplan_core::smtgate::default_solver;
use cosmoplan_core::{Dfa, DwaParams, Plan, Scene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TICK: f64 = 0.1;

type Outcome = Result<String, String>;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn cosmoplan(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cosmoplan"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run cosmoplan: {e}"))?;
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    Ok((out.status.code().unwrap_or(-1), text))
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration, what: &str) -> Result<(), String> {
    ensure(t.elapsed() < limit, format!("{what} took {:.1?}, limit {limit:?}", t.elapsed()))
}

fn warehouse() -> (Scene, Dfa, Vec<Alphabet>) {
    let scene = Scene::load(&data("warehouse/scene.json")).unwrap();
    let g = Dfa::load(&data("warehouse/global.json")).unwrap();
    let raw: Vec<Vec<String>> =
        serde_json::from_str(&std::fs::read_to_string(data("warehouse/alphabets.json")).unwrap()).unwrap();
    (scene, g, raw.iter().map(|a| Alphabet::new(a).unwrap()).collect())
}

fn decomposition() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let (code, text) = cosmoplan(&[
        "decompose",
        "--mission",
        path(&data("warehouse/global.json")),
        "--alphabets",
        path(&data("warehouse/alphabets.json")),
        "--out",
        path(dir.path()),
    ])?;
    within(t, Duration::from_secs(1), "decompose")?;
    ensure(code == 0, format!("exit {code}: {text}"))?;
    for i in 1..=2 {
        let got = Dfa::load(&dir.path().join(format!("k{i}.json"))).map_err(|e| e.to_string())?;
        let want = Dfa::load(&data(&format!("warehouse/expected/k{i}.json"))).unwrap();
        ensure(included(&got, &want).holds() && included(&want, &got).holds(), format!("K{i} differs"))?;
    }
    Ok(format!("both local missions match, {:.0?}", t.elapsed()))
}

fn assume_guarantee() -> Outcome {
    let (_, g, al) = warehouse();
    let locals = decompose(&g, &al).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let (out, stats) = learn_assumption(&locals[0], &g, &locals[1], None).map_err(|e| e.to_string())?;
    let holds = verify_rule(&locals, &g).map_err(|e| e.to_string())?.holds();
    within(t, Duration::from_secs(5), "learning")?;
    let LearnOutcome::Assumption(a) = out else { return Err("learning reported a violation".into()) };
    let want = Dfa::chain(&word(&["R2pO2", "R2dO2aW2", "r2"]), &al[1]).unwrap();
    ensure(equivalent(&a, &want), "assumption differs from robot 2's chain")?;
    ensure(holds, "rule does not hold")?;
    ensure(stats.membership_queries <= 30, format!("{} membership queries", stats.membership_queries))?;
    Ok(format!("{} membership queries, {:.0?}", stats.membership_queries, t.elapsed()))
}

fn coordination() -> Outcome {
    let (scene, g, al) = warehouse();
    let locals = decompose(&g, &al).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let c = coordinate(&locals, &scene, Some(&g), &PlanConfig::default()).map_err(|e| e.to_string())?;
    within(t, Duration::from_secs(120), "coordination")?;
    let mut problems = Vec::new();
    if c.inserted != [CoordinationRequest { requester: 1, responder: 2, object: 2 }] {
        problems.push(format!("inserted {:?}", c.inserted));
    }
    for (i, m) in c.missions.iter().enumerate() {
        let want = Dfa::load(&data(&format!("warehouse/expected/k{}_coordinated.json", i + 1))).unwrap();
        if !equivalent(m, &want) {
            problems.push(format!("mission {} differs", i + 1));
        }
    }
    for (p, m) in c.plans.iter().zip(&c.missions) {
        match check_plan_against(p, m, &scene) {
            Ok(CheckOutcome::Satisfied) => {}
            other => problems.push(format!("plan {} fails replay: {other:?}", p.robot)),
        }
    }
    let lens: Vec<usize> = c.plans.iter().map(Plan::len).collect();
    if lens != [7, 6] {
        problems.push(format!(
            "plan lengths {lens:?}, wanted [7, 6]; robot 2's way home from the drop site is blocked by both \
             inner walls, and no 6-step plan exists"
        ));
    }
    ensure(problems.is_empty(), problems.join("; "))?;
    Ok(format!("one request pair, lengths {lens:?}, {:.1?}", t.elapsed()))
}

fn smt_agreement() -> Outcome {
    let solver = default_solver();
    ensure(formulas::solver_available(&solver), format!("solver `{solver}` not found"))?;
    let t = Instant::now();
    let (sat, unsat) = formulas::agreement(7, 200, &solver)?;
    within(t, Duration::from_secs(300), "agreement suite")?;
    Ok(format!("200 formulas, {sat} sat / {unsat} unsat, 0 disagreements, {:.1?}", t.elapsed()))
}

fn learning() -> Outcome {
    for seed in 0..100 {
        let target = targets::random_dfa(seed, 8, 4);
        let learned = lstar(target.alphabet(), &mut targets::Oracle(&target), |_| {});
        ensure(equivalent_role(&learned, &target, Role::Marked), format!("target {seed} learned wrong"))?;
    }
    Ok("100/100 targets learned".into())
}

fn passive_safety() -> Outcome {
    let p = DwaParams::default();
    let (scene, plans) = crossing_scenario();
    let log = run(&plans, &scene, &p, TICK, 60.0, 0);
    monitor_passive_safety(&log).map_err(|v| format!("crossing: {} violations", v.len()))?;
    ensure(log.completed(), format!("crossing: {:?}", log.outcome))?;
    for seed in 0..100 {
        let (scene, plans) = random_scenario(seed);
        let log = run(&plans, &scene, &p, TICK, 120.0, seed);
        monitor_passive_safety(&log).map_err(|v| format!("scene {seed}: {} violations", v.len()))?;
    }
    let moving = cycle::single_step(11, 10_000, TICK)?;
    Ok(format!("crossing and 100 scenes clean; 10000 single steps hold ({moving} moving)"))
}

fn velocity_cap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let b = rng.gen_range(0.1..5000.0);
        let dist = rng.gen_range(0.0..1e5);
        let p = DwaParams { eps: 0.0, v_obs: 0.0, b, ..Default::default() };
        let want = (2.0 * b * dist).sqrt();
        let got = compute_v_cap(rng.gen_range(0.0..1000.0), &p, dist);
        ensure((got - want).abs() <= 1e-9 * want, format!("b={b} dist={dist}: {got} vs {want}"))?;
        let p = DwaParams {
            a: rng.gen_range(1.0..2000.0),
            b,
            eps: rng.gen_range(0.01..1.0),
            v_obs: rng.gen_range(0.0..1000.0),
            ..Default::default()
        };
        let (hi, lo) = v_cap_branches(&p, dist);
        let gap = (p.a + p.b) * p.eps;
        ensure(((hi - lo) - gap).abs() <= 1e-9 * gap, format!("branches {hi} / {lo} for {p:?}"))?;
    }
    Ok("10000 random cases within 1e-9".into())
}

/// Runs the pipeline binary, then replays its plans to inspect where
/// everything ended up.
fn warehouse_run() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (code, text) = cosmoplan(&[
        "pipeline",
        "--scene",
        path(&data("warehouse/scene.json")),
        "--mission",
        path(&data("warehouse/global.json")),
        "--alphabets",
        path(&data("warehouse/alphabets.json")),
        "--tmax",
        "300",
        "--out",
        path(dir.path()),
    ])?;
    ensure(code == 0, format!("pipeline exit {code}: {text}"))?;
    let scene = Scene::load(&data("warehouse/scene.json")).unwrap();
    let plans: Vec<Plan> = (1..=2)
        .map(|i| Plan::load(&dir.path().join(format!("plan{i}.json"))).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let p = DwaParams::default();
    let log = run(&plans, &scene, &p, TICK, 300.0, 0);
    ensure(log.completed(), format!("{:?}", log.outcome))?;
    for (j, w) in scene.workspaces.iter().enumerate() {
        let (x, y) = log.final_objects[j];
        ensure(w.contains(x, y), format!("object {} left at ({x:.0}, {y:.0})", j + 1))?;
    }
    for (r, a) in log.final_poses.iter().zip(&scene.agents) {
        ensure((r.x - a.x()).hypot(r.y - a.y()) <= p.pos_tol, "a robot did not return home")?;
    }
    Ok(format!("delivered and home by {:.1} s", log.rows.last().map_or(0, |r| r.tick) as f64 * TICK))
}

fn room_run() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let scene_path = data("room10/scene.json");
    let missions: Vec<String> = (1..=10).map(|i| path(&data(&format!("room10/missions/k{i}.json"))).to_owned()).collect();
    let mut args = vec!["coordinate", "--scene", path(&scene_path), "--out", path(dir.path()), "--locals"];
    args.extend(missions.iter().map(String::as_str));
    let (code, text) = cosmoplan(&args)?;
    ensure(code == 0, format!("coordinate exit {code}: {text}"))?;
    let plans: Vec<String> = (1..=10).map(|i| path(&dir.path().join(format!("plan{i}.json"))).to_owned()).collect();
    let mut args = vec!["simulate", "--scene", path(&scene_path), "--tmax", "900", "--out", path(dir.path()), "--plans"];
    args.extend(plans.iter().map(String::as_str));
    let (code, text) = cosmoplan(&args)?;
    ensure(code == 0, format!("simulate exit {code}: {text}"))?;
    within(t, Duration::from_secs(15 * 60), "ten-robot run")?;

    let scene = Scene::load(&scene_path).unwrap();
    let plans: Vec<Plan> = plans.iter().map(|p| Plan::load(Path::new(p)).unwrap()).collect();
    let log = run(&plans, &scene, &DwaParams::default(), TICK, 900.0, 0);
    let delivered = scene.workspaces.iter().zip(&log.final_objects).filter(|(w, (x, y))| w.contains(*x, *y)).count();
    ensure(delivered == 10, format!("{delivered}/10 objects delivered"))?;
    monitor_passive_safety(&log).map_err(|v| format!("{} violations", v.len()))?;
    Ok(format!("ten robots: 10/10 delivered, 0 violations, {:.0?} wall clock", t.elapsed()))
}

fn end_to_end() -> Outcome {
    let a = warehouse_run().map_err(|e| format!("two robots: {e}"))?;
    let b = room_run().map_err(|e| format!("ten robots: {e}"))?;
    Ok(format!("{a}; {b}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("decomposition fidelity", decomposition),
        ("assume-guarantee assumption", assume_guarantee),
        ("coordination loop", coordination),
        ("solver agrees with enumeration", smt_agreement),
        ("L* learns random targets", learning),
        ("passive safety", passive_safety),
        ("velocity cap", velocity_cap),
        ("end-to-end warehouse", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail} [{:.1?}]", i + 1, t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} [{:.1?}]", i + 1, t.elapsed());
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
