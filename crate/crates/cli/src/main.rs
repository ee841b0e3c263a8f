//! `cosmoplan` command line: decompose, plan, coordinate, simulate, check,
//! and the whole pipeline in one go.
//!
//! Exit codes: 0 ok, 2 verification failure, 3 environment problem (missing
//! files, unparsable input, no solver), 4 passive-safety violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use cosmoplan_core::automata::format_word;
use cosmoplan_core::cltlb::CheckOutcome;
use cosmoplan_core::mission::{decompose, verify_rule, RuleVerdict};
use cosmoplan_core::planner::{self, check_plan_against, Coordination, PlanConfig, PlanError};
use cosmoplan_core::simulator::{monitor_passive_safety, run};
use cosmoplan_core::smtgate::SmtError;
use cosmoplan_core::{Alphabet, Dfa, DwaParams, Plan, Scene, SimLog};

#[derive(Parser)]
#[command(name = "cosmoplan", version, about = "Multi-robot mission decomposition, planning and simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Project a global mission onto per-robot alphabets and verify the split.
    Decompose(DecomposeArgs),
    /// Plan each local mission without coordination.
    Plan(PlanArgs),
    /// Plan with request/response insertion until no robot needs help.
    Coordinate(PlanArgs),
    /// Execute plans in the simulator and monitor passive safety.
    Simulate(SimArgs),
    /// Replay a plan against its mission and the primitive constraints.
    Check(CheckArgs),
    /// decompose → coordinate → simulate.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    /// Global mission automaton (JSON).
    #[arg(long)]
    mission: PathBuf,
    /// JSON list of per-robot event lists.
    #[arg(long)]
    alphabets: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    /// Largest number of primitives per plan.
    #[arg(long, default_value_t = 14)]
    kmax: usize,
    /// SMT solver command; defaults to $COSMOPLAN_SOLVER, then `z3`.
    #[arg(long)]
    solver: Option<String>,
    /// Per-call solver timeout, seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Local mission automata, one per robot in robot order.
    #[arg(long, num_args = 1.., required = true)]
    locals: Vec<PathBuf>,
    /// Global mission; when given, coordinated missions are re-verified.
    #[arg(long)]
    mission: Option<PathBuf>,
    /// Plan only this robot (1-based).
    #[arg(long)]
    robot: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimOpts {
    /// Controller parameters (JSON); defaults otherwise.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulation tick, seconds.
    #[arg(long, default_value_t = 0.1)]
    tick: f64,
    /// Simulated time limit, seconds.
    #[arg(long, default_value_t = 300.0)]
    tmax: f64,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Plan files, one per robot.
    #[arg(long, num_args = 1.., required = true)]
    plans: Vec<PathBuf>,
    #[command(flatten)]
    sim: SimOpts,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Local mission of the plan's robot.
    #[arg(long)]
    mission: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    mission: PathBuf,
    #[arg(long)]
    alphabets: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    sim: SimOpts,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// An error with its exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn verification(err: impl Into<anyhow::Error>) -> Self {
        Failure { code: 2, err: err.into() }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 3, err: e.into() }
    }
}

type Res<T> = Result<T, Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_dfa(path: &Path) -> anyhow::Result<Dfa> {
    Dfa::from_json_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_scene(path: &Path) -> anyhow::Result<Scene> {
    let scene = Scene::from_json_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let problems = scene.validate();
    if !problems.is_empty() {
        return Err(anyhow!("invalid scene {}: {}", path.display(), problems.join("; ")));
    }
    Ok(scene)
}

fn load_alphabets(path: &Path) -> anyhow::Result<Vec<Alphabet>> {
    let raw: Vec<Vec<String>> =
        serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    raw.iter().map(|a| Alphabet::new(a).map_err(anyhow::Error::from)).collect()
}

fn load_params(path: Option<&Path>) -> anyhow::Result<DwaParams> {
    let p = match path {
        Some(path) => serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?,
        None => DwaParams::default(),
    };
    p.validate().map_err(|e| anyhow!("bad controller parameters: {e}"))?;
    Ok(p)
}

fn write(dir: &Path, name: &str, body: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

fn plan_config(s: &SolverArgs) -> PlanConfig {
    let mut cfg = PlanConfig { k_max: s.kmax, timeout: Duration::from_secs(s.timeout), ..Default::default() };
    if let Some(solver) = &s.solver {
        cfg.solver = solver.clone();
    }
    cfg
}

fn plan_failure(e: PlanError) -> Failure {
    match e {
        PlanError::Smt(SmtError::SolverMissing(..)) => Failure { code: 3, err: e.into() },
        _ => Failure::verification(e),
    }
}

fn cmd_decompose(a: &DecomposeArgs) -> Res<Vec<Dfa>> {
    let global = load_dfa(&a.mission)?;
    let alphabets = load_alphabets(&a.alphabets)?;
    let locals = decompose(&global, &alphabets).map_err(Failure::verification)?;
    for (i, k) in locals.iter().enumerate() {
        write(&a.out, &format!("k{}.json", i + 1), &k.to_json_string())?;
        println!("robot {}: {} states", i + 1, k.num_states());
    }
    match verify_rule(&locals, &global).map_err(Failure::verification)? {
        RuleVerdict::Holds { .. } => println!("verify: local missions compose into the global mission"),
        RuleVerdict::Fails { counterexample } => {
            return Err(Failure::verification(anyhow!(
                "local missions allow `{}`, which the global mission forbids",
                format_word(&counterexample)
            )))
        }
    }
    Ok(locals)
}

fn write_plans(out: &Path, plans: &[Plan]) -> anyhow::Result<()> {
    for p in plans {
        write(out, &format!("plan{}.json", p.robot), &p.to_json_string())?;
        println!("robot {}: {} steps", p.robot, p.len());
    }
    Ok(())
}

fn cmd_plan(a: &PlanArgs) -> Res<()> {
    let scene = load_scene(&a.scene)?;
    let missions = a.locals.iter().map(|p| load_dfa(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let cfg = plan_config(&a.solver);
    let robots: Vec<usize> = match a.robot {
        Some(r) if r == 0 || r > missions.len() => return Err(anyhow!("robot {r} out of range").into()),
        Some(r) => vec![r],
        None => (1..=missions.len()).collect(),
    };
    let mut plans = Vec::new();
    let mut feedback = Vec::new();
    for i in robots {
        let (p, fb) = planner::plan(i, &missions[i - 1], &scene, &cfg).map_err(plan_failure)?;
        plans.extend(p);
        feedback.push(fb);
    }
    write_plans(&a.out, &plans)?;
    write(&a.out, "feedback.json", &serde_json::to_string_pretty(&feedback).map_err(anyhow::Error::from)?)?;
    if let Some(fb) = feedback.iter().find(|f| f.verdict == planner::Verdict::Infeasible) {
        return Err(Failure::verification(anyhow!(
            "robot {} has no plan within K_max={}; blocking objects {:?}",
            fb.robot,
            cfg.k_max,
            fb.blocking_objects
        )));
    }
    for fb in feedback.iter().filter(|f| !f.requests_used.is_empty()) {
        println!("robot {} needs objects {:?} moved away", fb.robot, fb.requests_used);
    }
    Ok(())
}

fn coordinate_into(
    scene: &Scene,
    missions: &[Dfa],
    global: Option<&Dfa>,
    cfg: &PlanConfig,
    out: &Path,
) -> Res<Coordination> {
    let c = planner::coordinate(missions, scene, global, cfg).map_err(plan_failure)?;
    for (i, m) in c.missions.iter().enumerate() {
        write(out, &format!("k{}_final.json", i + 1), &m.to_json_string())?;
    }
    write_plans(out, &c.plans)?;
    let summary = serde_json::json!({
        "inserted": c.inserted,
        "feedback": c.feedback,
        "rounds": c.rounds,
    });
    write(out, "coordination.json", &serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?)?;
    for r in &c.inserted {
        println!("robot {} requests object {} from robot {}", r.requester, r.object, r.responder);
    }
    Ok(c)
}

fn cmd_coordinate(a: &PlanArgs) -> Res<()> {
    let scene = load_scene(&a.scene)?;
    let missions = a.locals.iter().map(|p| load_dfa(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let global = a.mission.as_deref().map(load_dfa).transpose()?;
    coordinate_into(&scene, &missions, global.as_ref(), &plan_config(&a.solver), &a.out)?;
    Ok(())
}

fn simulate_into(scene: &Scene, plans: &[Plan], o: &SimOpts, out: &Path) -> Res<SimLog> {
    let params = load_params(o.params.as_deref())?;
    if !(o.tick > 0.0 && o.tick <= params.eps) {
        return Err(anyhow!("tick must lie in (0, {}]", params.eps).into());
    }
    let log = run(plans, scene, &params, o.tick, o.tmax, o.seed);
    log.write_all(scene, out)?;
    println!("outcome: {:?}", log.outcome);
    if let Err(bad) = monitor_passive_safety(&log) {
        let shown: Vec<String> = bad.iter().take(20).map(|(t, r)| format!("tick {t} robot {r}")).collect();
        return Err(Failure {
            code: 4,
            err: anyhow!("{} passive-safety violations: {}", bad.len(), shown.join(", ")),
        });
    }
    println!("monitor: no violations");
    if !log.completed() {
        return Err(Failure::verification(anyhow!("execution did not complete: {:?}", log.outcome)));
    }
    Ok(log)
}

fn cmd_simulate(a: &SimArgs) -> Res<()> {
    let scene = load_scene(&a.scene)?;
    let plans = a
        .plans
        .iter()
        .map(|p| Plan::from_json_str(&read(p)?).with_context(|| format!("parsing {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    simulate_into(&scene, &plans, &a.sim, &a.out)?;
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> Res<()> {
    let scene = load_scene(&a.scene)?;
    let plan = Plan::from_json_str(&read(&a.plan)?).with_context(|| format!("parsing {}", a.plan.display()))?;
    let mission = load_dfa(&a.mission)?;
    match check_plan_against(&plan, &mission, &scene).map_err(Failure::verification)? {
        CheckOutcome::Satisfied => {
            println!("plan of robot {} satisfies its mission", plan.robot);
            Ok(())
        }
        CheckOutcome::Violated { instant, clause } => {
            Err(Failure::verification(anyhow!("violated at instant {instant}: {clause}")))
        }
    }
}

fn cmd_pipeline(a: &PipelineArgs) -> Res<()> {
    let scene = load_scene(&a.scene)?;
    let global = load_dfa(&a.mission)?;
    let d = DecomposeArgs { mission: a.mission.clone(), alphabets: a.alphabets.clone(), out: a.out.clone() };
    let locals = cmd_decompose(&d)?;
    let c = coordinate_into(&scene, &locals, Some(&global), &plan_config(&a.solver), &a.out)?;
    let log = simulate_into(&scene, &c.plans, &a.sim, &a.out)?;
    for (j, (x, y)) in log.final_objects.iter().enumerate() {
        println!("object {} at ({x:.0}, {y:.0})", j + 1);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Decompose(a) => cmd_decompose(a).map(|_| ()),
        Cmd::Plan(a) => cmd_plan(a),
        Cmd::Coordinate(a) => cmd_coordinate(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Pipeline(a) => cmd_pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
