//! Compares a trained policy with droop control on several days.
//!
//! `cargo run --release --example compare_controllers CHECKPOINT [SEEDS]`
//!
//! `CHECKPOINT` comes from `train_rsac` or `softcoord train`. Without one, a
//! short training run is done first.

use std::sync::Arc;

use softcoord::baselines::{Droop, DroopCurve};
use softcoord::env::{run_day, settled_tap, EnvConfig, VarController, VoltVarEnv};
use softcoord::grid::ieee33::ieee33;
use softcoord::grid::Feeder;
use softcoord::rsac::{run_training, DaySource, Hyperparams, RsacPolicy, TrainingPlan};
use softcoord::scenario::{DayScenario, Fluctuation};

fn main() -> softcoord::Result<()> {
    let mut args = std::env::args().skip(1);
    let feeder = Arc::new(Feeder::new(ieee33())?);
    let mut env = VoltVarEnv::new(feeder, EnvConfig::default())?;
    let mut rsac = match args.next() {
        Some(path) => RsacPolicy::load(path)?,
        None => {
            println!("no checkpoint given, training 40 short episodes");
            let hp = Hyperparams {
                episodes: 40,
                ..Hyperparams::smoke()
            };
            let plan = TrainingPlan {
                env: env.clone(),
                days: DaySource::Generated {
                    mode: Fluctuation::Strong,
                    dt_s: 60,
                },
                hp,
                checkpoint_dir: None,
            };
            RsacPolicy::from_checkpoint(&run_training(plan, |_| {})?.agent.checkpoint())?
        }
    };
    let seeds: u64 = args.next().map(|s| s.parse().expect("seed count")).unwrap_or(3);
    let mut droop = Droop::new(DroopCurve::default())?;

    println!("{:<6}{:>5}{:<8}{:>10}{:>6}{:>11}", "mode", "seed", "  ctrl", "loss_kWh", "taps", "violations");
    for mode in [Fluctuation::Strong, Fluctuation::Mild] {
        for seed in 1..=seeds {
            let day = Arc::new(DayScenario::generate(env.feeder().model(), mode, 60, seed)?);
            let tap = settled_tap(env.feeder(), env.config(), &day, 0)?;
            let ctrls: [&mut dyn VarController; 2] = [&mut droop, &mut rsac];
            for c in ctrls {
                let (_, s) = run_day(&mut env, c, Arc::clone(&day), tap, 0)?;
                println!(
                    "{:<6}{seed:>5}  {:<6}{:>10.1}{:>6}{:>11}",
                    mode.to_string(),
                    c.name(),
                    s.loss_kwh,
                    s.tap_ops,
                    s.violation_steps
                );
            }
        }
    }
    Ok(())
}
