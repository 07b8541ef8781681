use std::sync::Arc;

use super::{Action, EpisodeRecord, EpisodeSummary, VoltVarEnv};
use crate::scenario::DayScenario;
use crate::Result;

/// Anything that picks inverter Var set-points for the env's next step.
pub trait VarController {
    fn name(&self) -> String;

    /// Clears per-episode memory.
    fn reset(&mut self) {}

    fn act(&mut self, env: &VoltVarEnv) -> Result<Action>;
}

/// Runs `controller` over the whole scenario starting at `initial_tap`.
pub fn run_day(
    env: &mut VoltVarEnv,
    controller: &mut dyn VarController,
    scenario: Arc<DayScenario>,
    initial_tap: i32,
    episode: usize,
) -> Result<(Vec<EpisodeRecord>, EpisodeSummary)> {
    let dt = scenario.dt();
    env.reset(scenario, initial_tap)?;
    controller.reset();
    let mut records = Vec::with_capacity(env.horizon());
    let mut step = 0;
    while !env.is_done() {
        let action = controller.act(env)?;
        let out = env.step(&action)?;
        records.push(EpisodeRecord {
            episode,
            step,
            reward: out.reward,
            info: out.info,
        });
        step += 1;
    }
    let summary = EpisodeSummary::from_records(&records, env.feeder().model().s_base_mva, dt);
    Ok((records, summary))
}
