//! Runs the rule-based Var controllers against the OLTC on one day and shows
//! how each one changes the tap activity.
//!
//! `cargo run --example interaction_regimes [strong|mild] [SEED]`

use std::sync::Arc;

use softcoord::baselines::{ConstantPcc, Droop, DroopCurve, NoVar};
use softcoord::env::{run_day, settled_tap, EnvConfig, VarController, VoltVarEnv};
use softcoord::grid::ieee33::ieee33;
use softcoord::grid::Feeder;
use softcoord::scenario::{DayScenario, Fluctuation};

fn main() -> softcoord::Result<()> {
    let mut args = std::env::args().skip(1);
    let mode: Fluctuation = args.next().as_deref().unwrap_or("strong").parse()?;
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);

    let feeder = Arc::new(Feeder::new(ieee33())?);
    let mut env = VoltVarEnv::new(feeder, EnvConfig::default())?;
    let day = Arc::new(DayScenario::generate(env.feeder().model(), mode, 60, seed)?);
    let tap = settled_tap(env.feeder(), env.config(), &day, 0)?;

    let mut controllers: Vec<Box<dyn VarController>> = vec![
        Box::new(NoVar),
        Box::new(Droop::new(DroopCurve::default())?),
        Box::new(ConstantPcc::new(1.0)?),
    ];
    println!("{mode} day, seed {seed}, starting tap {tap}");
    println!("{:<14}{:>10}{:>6}{:>12}{:>8}{:>8}", "controller", "loss_kWh", "taps", "violations", "vmin", "vmax");
    for c in controllers.iter_mut() {
        let (_, s) = run_day(&mut env, c.as_mut(), Arc::clone(&day), tap, 0)?;
        println!(
            "{:<14}{:>10.1}{:>6}{:>12}{:>8.4}{:>8.4}",
            c.name(),
            s.loss_kwh,
            s.tap_ops,
            s.violation_steps,
            s.min_v,
            s.max_v
        );
    }
    Ok(())
}
