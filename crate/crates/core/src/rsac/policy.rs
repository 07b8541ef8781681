use std::path::Path;

use super::{actor_from_checkpoint, sample_action, ActorParams, Layout};
use crate::env::{Action, VarController, VoltVarEnv};
use crate::nn::Checkpoint;
use crate::{Error, Result};

/// Trained actor used as a controller: the mean action `q_max ⊙ tanh(μ)`,
/// with the recurrent state carried across steps and cleared on reset.
#[derive(Clone, Debug)]
pub struct RsacPolicy {
    layout: Layout,
    actor: ActorParams,
    hidden: Vec<f64>,
    prev_action: Vec<f64>,
}

impl RsacPolicy {
    pub fn new(layout: Layout, actor: ActorParams) -> Result<Self> {
        layout.validate()?;
        actor.validate(&layout)?;
        Ok(Self {
            hidden: vec![0.0; layout.hidden],
            prev_action: vec![0.0; layout.n_a],
            layout,
            actor,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let (layout, actor) = actor_from_checkpoint(ck)?;
        Self::new(layout, actor)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn hidden(&self) -> &[f64] {
        &self.hidden
    }

    fn check_env(&self, env: &VoltVarEnv) -> Result<()> {
        let want = Layout::for_env(env, self.layout.hidden);
        let same_limits = want
            .q_max_pu
            .iter()
            .zip(&self.layout.q_max_pu)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
        if want.feature_dim != self.layout.feature_dim || want.n_a != self.layout.n_a || !same_limits {
            return Err(Error::Checkpoint(
                "policy was trained for a different feeder or inverter set".into(),
            ));
        }
        Ok(())
    }
}

impl VarController for RsacPolicy {
    fn name(&self) -> String {
        "rsac".into()
    }

    fn reset(&mut self) {
        self.hidden.iter_mut().for_each(|h| *h = 0.0);
        self.prev_action.iter_mut().for_each(|a| *a = 0.0);
    }

    fn act(&mut self, env: &VoltVarEnv) -> Result<Action> {
        self.check_env(env)?;
        let features = env.observation().features(env.state());
        let zero = vec![0.0; self.layout.n_a];
        let (a_pu, _, h) = sample_action(&self.actor, &self.layout, &features, &self.prev_action, &self.hidden, &zero)?;
        let to_kvar = 1000.0 * env.feeder().model().s_base_mva;
        let q_kvar: Vec<f64> = a_pu
            .iter()
            .zip(env.q_max_kvar())
            .map(|(a, q)| (a * to_kvar).clamp(-q, q))
            .collect();
        self.prev_action = q_kvar.iter().map(|q| q / to_kvar).collect();
        self.hidden = h;
        Ok(Action { q_kvar })
    }
}
