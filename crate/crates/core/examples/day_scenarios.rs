//! Generates strong and mild PV days from one seed and summarises them.
//!
//! `cargo run --example day_scenarios [SEED] [OUT.csv]`

use softcoord::grid::ieee33::ieee33;
use softcoord::scenario::{DayScenario, Fluctuation};

fn ramp_stats(day: &DayScenario) -> (f64, f64) {
    let total: Vec<f64> = day.pv_kw.iter().map(|row| row.iter().sum()).collect();
    let peak = total.iter().cloned().fold(0.0, f64::max);
    let max_ramp = total.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    (peak, max_ramp)
}

fn main() -> softcoord::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);
    let model = ieee33();
    for mode in [Fluctuation::Strong, Fluctuation::Mild] {
        let day = DayScenario::generate(&model, mode, 60, seed)?;
        let (peak, ramp) = ramp_stats(&day);
        println!(
            "{mode:>6}: {} steps, PV peak {peak:.0} kW, largest 1-min ramp {ramp:.0} kW, hash {}",
            day.steps(),
            &day.content_hash()[..12]
        );
        if let (Fluctuation::Strong, Some(path)) = (mode, args.next()) {
            day.save(&path)?;
            println!("saved to {path}");
        }
    }
    Ok(())
}
