//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! show.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softcoord::baselines::{ConstantPcc, Droop, DroopCurve, NoVar};
use softcoord::env::{
    compute_reward, run_day, settled_tap, EnvConfig, EpisodeSummary, RewardConfig, VarController,
    VoltVarEnv,
};
use softcoord::grid::ieee33::ieee33;
use softcoord::grid::{solve_power_flow, Feeder, Injections, SolverOptions};
use softcoord::nn::{Checkpoint, MlpParams, Parameters};
use softcoord::oltc::{oltc_step, LdcSettings, OltcState};
use softcoord::rsac::{
    run_training, sample_action, soft_update, ActorParams, DaySource, Hyperparams, Layout,
    RsacPolicy, TrainingLogRow, TrainingPlan,
};
use softcoord::scenario::{DayScenario, Fluctuation};

// pinned tolerances and budgets
const PF_VOLTAGE_TOL: f64 = 1e-6;
const PF_LOSS_REL_TOL: f64 = 1e-3;
const PF_BUDGET: Duration = Duration::from_secs(10);
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const DENSITY_TOL: f64 = 1e-3;
const DENSITY_GRID: usize = 20_000;
const DECAY_REL_TOL: f64 = 1e-12;
const REGIME_BUDGET: Duration = Duration::from_secs(300);
const TRAIN_BUDGET: Duration = Duration::from_secs(1800);
const PAIRED_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const MAX_ORDERING_FAILURES: usize = 1;
const TRAIN_SEED: u64 = 1;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn feeder() -> Arc<Feeder> {
    Arc::new(Feeder::new(ieee33()).expect("builtin feeder"))
}

fn env() -> VoltVarEnv {
    VoltVarEnv::new(feeder(), EnvConfig::default()).expect("default env")
}

fn day(mode: Fluctuation, seed: u64) -> Arc<DayScenario> {
    Arc::new(DayScenario::generate(&ieee33(), mode, 60, seed).expect("scenario"))
}

fn run(env: &mut VoltVarEnv, c: &mut dyn VarController, d: &Arc<DayScenario>) -> EpisodeSummary {
    let tap = settled_tap(env.feeder(), env.config(), d, 0).expect("settled tap");
    run_day(env, c, Arc::clone(d), tap, 0).expect("day run").1
}

fn c1_power_flow() -> Outcome {
    let start = Instant::now();
    let model = ieee33();
    let feeder = Feeder::new(model.clone()).map_err(|e| e.to_string())?;
    let mut cases = vec![Injections::base_case(&model)];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let mut inj = Injections::base_case(&model);
        for k in 0..model.buses.len() {
            let f = rng.random_range(0.0..=1.0);
            inj.p_kw[k] *= f;
            inj.q_kvar[k] *= f;
        }
        for site in &model.pv_sites {
            let k = model.bus_index(site.bus).unwrap();
            inj.p_kw[k] -= rng.random_range(0.0..=site.p_max_kw);
            inj.q_kvar[k] -= rng.random_range(-site.q_max_kvar..=site.q_max_kvar);
        }
        inj.tap = rng.random_range(-8..=8);
        cases.push(inj);
    }
    let (mut worst_v, mut worst_loss) = (0.0f64, 0.0f64);
    for inj in &cases {
        let pf = solve_power_flow(&feeder, inj, &SolverOptions::default()).map_err(|e| e.to_string())?;
        let nr = common::newton::newton_raphson(&model, inj);
        for (a, b) in pf.voltages.iter().zip(&nr.voltages) {
            worst_v = worst_v.max((a - b).norm());
        }
        let rel = (pf.loss_pu * 1000.0 - nr.loss_kw).abs() / nr.loss_kw.max(1e-9);
        worst_loss = worst_loss.max(rel);
    }
    let elapsed = start.elapsed();
    ensure(worst_v <= PF_VOLTAGE_TOL, || format!("voltage gap {worst_v:e}"))?;
    ensure(worst_loss <= PF_LOSS_REL_TOL, || format!("loss gap {worst_loss:e}"))?;
    ensure(elapsed < PF_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} cases, max |ΔV| {worst_v:.1e}, max loss rel {worst_loss:.1e}, {elapsed:.2?}",
        cases.len()
    ))
}

fn c2_oltc() -> Outcome {
    let s = LdcSettings::default();
    // in band resets the timer
    let prior = OltcState { tap: 3, timer_s: 120.0, ..OltcState::at_tap(3) };
    let (next, d) = oltc_step(prior, 1.003, 60.0, &s);
    ensure(d == 0 && next.tap == 3 && next.timer_s == 0.0, || format!("in-band: {next:?} {d}"))?;
    // over band for 3 × 60 s: exactly one tap, downward
    let mut st = OltcState::at_tap(0);
    let mut deltas = Vec::new();
    for _ in 0..3 {
        let (n, d) = oltc_step(st, 1.02, 60.0, &s);
        st = n;
        deltas.push(d);
    }
    ensure(deltas == [0, 0, -1] && st.tap == -1, || format!("over-band deltas {deltas:?}"))?;
    // interrupted timer never fires
    let mut st = OltcState::at_tap(0);
    for v in [1.02, 1.02, 1.0, 1.02, 1.02, 1.0, 1.02] {
        let (n, d) = oltc_step(st, v, 60.0, &s);
        ensure(d == 0, || "interrupted timer fired".into())?;
        st = n;
    }
    // random walk: bounds hold, over-band never raises the tap
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (lo, hi) = s.band();
    let mut st = OltcState::at_tap(0);
    for _ in 0..20_000 {
        let v = rng.random_range(0.9..1.1);
        let (n, d) = oltc_step(st, v, 60.0, &s);
        ensure((-8..=8).contains(&n.tap), || format!("tap {} out of range", n.tap))?;
        ensure(!(v > hi && d > 0), || format!("raised tap at {v}"))?;
        ensure(!(v < lo && d < 0), || format!("lowered tap at {v}"))?;
        st = n;
    }
    Ok("in-band reset, one tap after 180 s, interrupted timer holds, 20000-step walk in bounds".into())
}

fn c3_reward() -> Outcome {
    let cfg = RewardConfig::default();
    ensure(cfg.penalty == -100.0 && cfg.incentive == 100.0, || "constants".into())?;
    let got = [
        compute_reward(&[1.0, 1.06, 0.99], 0.01, 0.01, &cfg),
        compute_reward(&[1.0, 1.01, 0.97], 0.010, 0.012, &cfg),
        compute_reward(&[1.06, 1.06, 0.94, 1.0], 0.0, 0.5, &cfg),
    ];
    let want = [-1.0, 0.2, -3.0];
    for (g, w) in got.iter().zip(want) {
        ensure((g - w).abs() < 1e-12, || format!("got {got:?}, want {want:?}"))?;
    }
    Ok(format!("{got:?}"))
}

fn c4_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, "");
    for i in 0..20 {
        let (name, err) = common::gradcheck::run_case(i, 1);
        if err > worst.0 {
            worst = (err, name);
        }
        ensure(err <= common::gradcheck::REL_TOL, || format!("case {i} ({name}) rel error {err:e}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < GRAD_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("20 computations, worst {:.1e} ({}), {elapsed:.2?}", worst.0, worst.1))
}

/// `∫ exp(log_prob) dA` over `(−q, q)` by the midpoint rule, each point
/// obtained through `sample_action` with the noise that lands on it.
fn density_integral(mu: f64, log_std: f64, q: f64) -> Result<f64, String> {
    let layout = Layout {
        feature_dim: 1,
        n_a: 1,
        hidden: 1,
        q_max_pu: vec![q],
    };
    let mut actor = ActorParams::zeros(&layout, &[2]);
    actor.head.layers.last_mut().unwrap().b.data_mut().copy_from_slice(&[mu, log_std]);
    let sigma = log_std.exp();
    let da = 2.0 * q / DENSITY_GRID as f64;
    let mut total = 0.0;
    for k in 0..DENSITY_GRID {
        let a = -q + (k as f64 + 0.5) * da;
        let eps = ((a / q).atanh() - mu) / sigma;
        let (_, lp, _) = sample_action(&actor, &layout, &[0.0], &[0.0], &[0.0], &[eps]).map_err(|e| e.to_string())?;
        total += lp.exp() * da;
    }
    Ok(total)
}

fn c5_density_and_target() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mu = rng.random_range(-1.0..1.0);
        let log_std = rng.random_range(-1.5..0.0);
        let q = rng.random_range(0.05..2.0);
        let total = density_integral(mu, log_std, q)?;
        worst = worst.max((total - 1.0).abs());
        ensure((total - 1.0).abs() <= DENSITY_TOL, || format!("μ={mu} logσ={log_std} q={q}: ∫ = {total}"))?;
    }
    let mut prng = ChaCha8Rng::seed_from_u64(4);
    let source = MlpParams::init(&[6, 8, 1], 1.0, &mut prng);
    let mut target = MlpParams::init(&[6, 8, 1], 1.0, &mut prng);
    let dist = |a: &MlpParams| -> f64 {
        a.tensors()
            .iter()
            .zip(source.tensors())
            .map(|(x, y)| x.data().iter().zip(y.data()).map(|(p, q)| (p - q).powi(2)).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    };
    let beta = Hyperparams::default().beta;
    let scale = source.tensors().iter().flat_map(|t| t.data()).map(|x| x * x).sum::<f64>().sqrt();
    let mut d = dist(&target);
    let mut worst_decay = 0.0f64;
    for _ in 0..5 {
        soft_update(&mut target, &source, beta).map_err(|e| e.to_string())?;
        let next = dist(&target);
        // round-off is bounded by the parameter magnitude, not the shrinking gap
        let rel = (next - beta * d).abs() / scale;
        worst_decay = worst_decay.max(rel);
        ensure(rel <= DECAY_REL_TOL, || format!("decay off by {rel:e}"))?;
        d = next;
    }
    Ok(format!("max |∫−1| {worst:.1e}; gap shrinks by β per update, error {worst_decay:.1e} of ‖ψ‖"))
}

fn c6_regimes() -> Outcome {
    let start = Instant::now();
    let mut env = env();
    let mut lines = Vec::new();
    for seed in PAIRED_SEEDS {
        let d = day(Fluctuation::Strong, seed);
        let pcc = run(&mut env, &mut ConstantPcc::new(1.0).map_err(|e| e.to_string())?, &d);
        let none = run(&mut env, &mut NoVar, &d);
        let droop = run(&mut env, &mut Droop::new(DroopCurve::default()).map_err(|e| e.to_string())?, &d);
        ensure(pcc.tap_ops == 0, || format!("seed {seed}: constant PCC tapped {} times", pcc.tap_ops))?;
        ensure(none.tap_ops >= droop.tap_ops, || {
            format!("seed {seed}: no-Var {} taps < droop {}", none.tap_ops, droop.tap_ops)
        })?;
        ensure(droop.violation_steps == 0 || droop.violation_steps < none.violation_steps, || {
            format!("seed {seed}: droop violations {} vs no-Var {}", droop.violation_steps, none.violation_steps)
        })?;
        lines.push(format!(
            "s{seed} pcc {} / none {} / droop {} taps",
            pcc.tap_ops, none.tap_ops, droop.tap_ops
        ));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < REGIME_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{}; {elapsed:.1?}", lines.join(", ")))
}

struct Trained {
    log: Vec<TrainingLogRow>,
    checkpoint: Checkpoint,
    elapsed: Duration,
}

fn smoke_plan(hp: Hyperparams) -> TrainingPlan {
    TrainingPlan {
        env: env(),
        days: DaySource::Generated {
            mode: Fluctuation::Strong,
            dt_s: 60,
        },
        hp,
        checkpoint_dir: None,
    }
}

fn train_smoke() -> Result<Trained, String> {
    let start = Instant::now();
    let hp = Hyperparams {
        seed: TRAIN_SEED,
        ..Hyperparams::smoke()
    };
    let out = run_training(smoke_plan(hp), |_| {}).map_err(|e| e.to_string())?;
    Ok(Trained {
        log: out.log,
        checkpoint: out.agent.checkpoint(),
        elapsed: start.elapsed(),
    })
}

fn policy(t: &Trained) -> Result<RsacPolicy, String> {
    RsacPolicy::from_checkpoint(&t.checkpoint).map_err(|e| e.to_string())
}

fn c7_training(t: &Trained) -> Outcome {
    ensure(t.log.len() == 200, || format!("{} episodes", t.log.len()))?;
    let first = t.log[49].avg50_reward;
    let last = t.log[199].avg50_reward;
    ensure(last > first, || format!("avg50 {first:.2} -> {last:.2}"))?;
    let mut env = env();
    let eval = run(&mut env, &mut policy(t)?, &day(Fluctuation::Strong, TRAIN_SEED));
    ensure(eval.violation_steps == 0, || format!("evaluation day has {} violation steps", eval.violation_steps))?;
    ensure(t.elapsed < TRAIN_BUDGET, || format!("training took {:?}", t.elapsed))?;
    Ok(format!(
        "avg50 {first:.1} -> {last:.1}, evaluation day 0 violations, trained in {:.1?}",
        t.elapsed
    ))
}

fn c8_ordering(t: &Trained) -> Outcome {
    let mut env = env();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for seed in PAIRED_SEEDS {
        let d = day(Fluctuation::Strong, seed);
        let rsac = run(&mut env, &mut policy(t)?, &d);
        let droop = run(&mut env, &mut Droop::new(DroopCurve::default()).map_err(|e| e.to_string())?, &d);
        let ok = rsac.loss_kwh <= droop.loss_kwh && rsac.tap_ops <= droop.tap_ops;
        if !ok {
            failures.push(seed);
        }
        lines.push(format!(
            "s{seed} {:.0}/{:.0} kWh {}/{} taps",
            rsac.loss_kwh, droop.loss_kwh, rsac.tap_ops, droop.tap_ops
        ));
    }
    ensure(failures.len() <= MAX_ORDERING_FAILURES, || {
        format!("failing seeds {failures:?}: {}", lines.join(", "))
    })?;
    Ok(format!("rsac/droop {}; failing seeds {failures:?}", lines.join(", ")))
}

fn c9_fluctuation(t: &Trained) -> Outcome {
    let mut env = env();
    let mut lines = Vec::new();
    for seed in PAIRED_SEEDS {
        let strong = day(Fluctuation::Strong, seed);
        let mild = day(Fluctuation::Mild, seed);
        let mut droop = Droop::new(DroopCurve::default()).map_err(|e| e.to_string())?;
        let (ds, dm) = (run(&mut env, &mut droop, &strong), run(&mut env, &mut droop, &mild));
        let mut rsac = policy(t)?;
        let (rs, rm) = (run(&mut env, &mut rsac, &strong), run(&mut env, &mut rsac, &mild));
        ensure(dm.tap_ops < ds.tap_ops, || format!("seed {seed}: droop mild {} vs strong {}", dm.tap_ops, ds.tap_ops))?;
        ensure(rm.tap_ops < rs.tap_ops, || format!("seed {seed}: rsac mild {} vs strong {}", rm.tap_ops, rs.tap_ops))?;
        lines.push(format!("s{seed} droop {}→{} rsac {}→{}", ds.tap_ops, dm.tap_ops, rs.tap_ops, rm.tap_ops));
    }
    Ok(lines.join(", "))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for rep in 0..2 {
        let out = dir.path().join(format!("run{rep}"));
        let out_s = out.to_str().unwrap().to_string();
        let train = softcoord::cli::run([
            "softcoord", "train", "--preset", "smoke", "--episodes", "12", "--horizon", "120", "--seed", "7",
            "--scenario", "strong", "--out", &format!("{out_s}/train"),
        ]);
        let sim = softcoord::cli::run([
            "softcoord", "simulate", "--controller", "droop", "--scenario", "strong", "--seed", "3", "--out",
            &format!("{out_s}/sim"),
        ]);
        ensure(train == 0 && sim == 0, || format!("exit codes {train} / {sim}"))?;
        let read = |p: &str| std::fs::read(out.join(p)).map_err(|e| format!("{p}: {e}"));
        files.push((
            read("train/training_log.csv")?,
            read("train/checkpoint_final.txt")?,
            read("sim/summary.csv")?,
            read("sim/episode_log.csv")?,
        ));
    }
    ensure(files[0] == files[1], || "outputs differ between runs".into())?;
    ensure(files[0].0.iter().filter(|&&b| b == b'\n').count() == 13, || "training log length".into())?;
    Ok("training log, checkpoint, summary and episode log byte-identical across two runs".into())
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into())),
        };
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {n:>2} {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2} {name}: {why} [{secs:.1}s]");
            }
        }
    };
    report(1, "power-flow oracle", &mut c1_power_flow);
    report(2, "OLTC state machine", &mut c2_oltc);
    report(3, "reward arithmetic", &mut c3_reward);
    report(4, "gradient checks", &mut c4_gradients);
    report(5, "policy density and target decay", &mut c5_density_and_target);
    report(6, "interaction regimes", &mut c6_regimes);
    let trained = catch_unwind(train_smoke).unwrap_or_else(|_| Err("training panicked".into()));
    let trained = &trained;
    let with = |f: fn(&Trained) -> Outcome| -> Box<dyn FnMut() -> Outcome + '_> {
        Box::new(move || match trained {
            Ok(t) => f(t),
            Err(e) => Err(format!("smoke training failed: {e}")),
        })
    };
    report(7, "training smoke", &mut *with(c7_training));
    report(8, "loss and tap ordering vs droop", &mut *with(c8_ordering));
    report(9, "fluctuation response", &mut *with(c9_fluctuation));
    report(10, "determinism", &mut c10_determinism);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
