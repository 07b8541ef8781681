//! Trains the recurrent soft actor-critic with the small preset and saves
//! checkpoints.
//!
//! `cargo run --release --example train_rsac [EPISODES] [OUT_DIR]`
//!
//! The full preset (`Hyperparams::default()`) takes many hours; the small
//! one finishes in a few minutes.

use std::path::PathBuf;
use std::sync::Arc;

use softcoord::env::{EnvConfig, VoltVarEnv};
use softcoord::grid::ieee33::ieee33;
use softcoord::grid::Feeder;
use softcoord::rsac::{run_training, write_training_log, DaySource, Hyperparams, TrainingPlan};
use softcoord::scenario::Fluctuation;

fn main() -> softcoord::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut hp = Hyperparams::smoke();
    if let Some(n) = args.next() {
        hp.episodes = n.parse().expect("episode count");
    }
    let out = PathBuf::from(args.next().unwrap_or_else(|| "runs/train_rsac".into()));

    let env = VoltVarEnv::new(Arc::new(Feeder::new(ieee33())?), EnvConfig::default())?;
    let plan = TrainingPlan {
        env,
        days: DaySource::Generated {
            mode: Fluctuation::Strong,
            dt_s: 60,
        },
        hp,
        checkpoint_dir: Some(out.clone()),
    };
    let outcome = run_training(plan, |row| {
        if (row.episode + 1) % 25 == 0 {
            let jq = row.losses.map_or(f64::NAN, |l| l.jq);
            println!(
                "episode {:>4}  reward {:>8.1}  avg50 {:>8.1}  taps {:>2}  violations {:>3}  J_Q {jq:.4}",
                row.episode + 1,
                row.total_reward,
                row.avg50_reward,
                row.taps_in_episode,
                row.violation_steps
            );
        }
    })?;
    write_training_log(&outcome.log, std::fs::File::create(out.join("training_log.csv"))?)?;
    println!("final avg50 {:?}", outcome.final_avg50());
    for p in &outcome.checkpoints {
        println!("wrote {}", p.display());
    }
    Ok(())
}
