//! Recurrent soft actor-critic.
//!
//! The actor runs a GRU over `[features(S_t), A_{t−1}/q_max]` and a Gaussian
//! head on the resulting summary `H_t`. Critic, value and target networks
//! read the stored summary `Ĥ_t = [features(S_t), A_{t−1}/q_max, H_{t−1}]`;
//! the critic additionally reads `A_t/q_max`. Actions live in p.u. on the
//! system base and are squashed by `q_max ⊙ tanh(u)`.

mod policy;
mod train;

pub use policy::RsacPolicy;
pub use train::{
    final_checkpoint_path, run_training, write_training_log, DaySource, TrainingLogRow,
    TrainingOutcome, TrainingPlan, TRAINING_LOG_HEADER,
};

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::{Observation, ReplayBuffer, Transition, VoltVarEnv};
use crate::nn::{
    adam_update, AdamState, Checkpoint, Graph, GruParams, GruVars, MlpParams, MlpVars, Parameters,
    Tensor, Var,
};
use crate::rng::{substream, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub gamma: f64,
    /// Entropy temperature.
    pub alpha: f64,
    /// Adam learning rate.
    pub lr: f64,
    /// Target smoothing weight.
    pub beta: f64,
    /// Put weight `1 − β` on the old target instead of `β`.
    pub target_tau_convention: bool,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub episodes: usize,
    /// Steps per training episode.
    pub horizon: usize,
    pub updates_per_episode: usize,
    pub seed: u64,
    pub gru_hidden: usize,
    pub head_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Episodes between periodic checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    /// Number of distinct generated training days; 0 draws a new day every
    /// episode.
    pub day_pool: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            alpha: 0.2,
            lr: 3e-3,
            beta: 1e-2,
            target_tau_convention: false,
            batch_size: 256,
            buffer_capacity: 100_000,
            episodes: 1500,
            horizon: 1440,
            updates_per_episode: 1440,
            seed: 1,
            gru_hidden: 64,
            head_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            checkpoint_every: 100,
            day_pool: 0,
        }
    }
}

impl Hyperparams {
    /// Reduced networks and horizon for desk-scale runs.
    pub fn smoke() -> Self {
        Self {
            episodes: 200,
            horizon: 240,
            updates_per_episode: 60,
            batch_size: 64,
            gru_hidden: 32,
            head_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            checkpoint_every: 50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 0 < batch_size <= buffer_capacity");
        }
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if self.gru_hidden == 0
            || self.head_hidden.contains(&0)
            || self.critic_hidden.contains(&0)
        {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    /// Weight kept on the old target per soft update.
    pub fn target_keep(&self) -> f64 {
        if self.target_tau_convention {
            1.0 - self.beta
        } else {
            self.beta
        }
    }
}

/// Input and output widths shared by the four networks.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub feature_dim: usize,
    pub n_a: usize,
    pub hidden: usize,
    /// Per-site Var limit in p.u.
    pub q_max_pu: Vec<f64>,
}

impl Layout {
    pub fn for_env(env: &VoltVarEnv, hidden: usize) -> Self {
        let to_pu = 1000.0 * env.feeder().model().s_base_mva;
        Self {
            feature_dim: env.observation().dim(),
            n_a: env.site_count(),
            hidden,
            q_max_pu: env.q_max_kvar().iter().map(|q| q / to_pu).collect(),
        }
    }

    pub fn actor_input(&self) -> usize {
        self.feature_dim + self.n_a
    }

    /// Width of `Ĥ_t`.
    pub fn summary_dim(&self) -> usize {
        self.feature_dim + self.n_a + self.hidden
    }

    pub fn critic_input(&self) -> usize {
        self.summary_dim() + self.n_a
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.n_a == 0 || self.hidden == 0 {
            return Err(Error::Shape("layout widths must be positive".into()));
        }
        if self.q_max_pu.len() != self.n_a
            || self.q_max_pu.iter().any(|q| !(q.is_finite() && *q > 0.0))
        {
            return Err(Error::Config(format!("need {} positive Var limits", self.n_a)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorParams {
    pub gru: GruParams,
    pub head: MlpParams,
}

impl ActorParams {
    pub fn zeros(layout: &Layout, head_hidden: &[usize]) -> Self {
        Self {
            gru: GruParams::zeros(layout.actor_input(), layout.hidden),
            head: MlpParams::zeros(&head_sizes(layout, head_hidden)),
        }
    }

    pub fn init(layout: &Layout, head_hidden: &[usize], rng: &mut impl Rng) -> Self {
        Self {
            gru: GruParams::init(layout.actor_input(), layout.hidden, rng),
            head: MlpParams::init(&head_sizes(layout, head_hidden), 0.1, rng),
        }
    }

    pub fn validate(&self, layout: &Layout) -> Result<()> {
        self.head.validate()?;
        if self.gru.input != layout.actor_input()
            || self.gru.hidden != layout.hidden
            || self.head.input_size() != layout.hidden
            || self.head.output_size() != 2 * layout.n_a
        {
            return Err(Error::Shape("actor does not match the layout".into()));
        }
        Ok(())
    }

    fn bind(&self, g: &mut Graph, trainable: bool) -> ActorVars {
        ActorVars {
            gru: self.gru.bind(g, trainable),
            head: self.head.bind(g, trainable),
        }
    }
}

impl Parameters for ActorParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut t = self.gru.tensors();
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut t = self.gru.tensors_mut();
        t.extend(self.head.tensors_mut());
        t
    }

    fn names(&self) -> Vec<String> {
        let gru = self.gru.names().into_iter().map(|n| format!("gru.{n}"));
        gru.chain(self.head.names().into_iter().map(|n| format!("head.{n}")))
            .collect()
    }
}

fn head_sizes(layout: &Layout, hidden: &[usize]) -> Vec<usize> {
    let mut s = vec![layout.hidden];
    s.extend_from_slice(hidden);
    s.push(2 * layout.n_a);
    s
}

fn mlp_sizes(input: usize, hidden: &[usize]) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(1);
    s
}

struct ActorVars {
    gru: GruVars,
    head: MlpVars,
}

impl ActorVars {
    fn all(&self) -> Vec<Var> {
        let mut v = self.gru.all();
        v.extend(self.head.all());
        v
    }
}

/// Actor, critic `θ`, value `ψ` and target value `ψ̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct Networks {
    pub actor: ActorParams,
    pub critic: MlpParams,
    pub value: MlpParams,
    pub target: MlpParams,
}

impl Networks {
    pub fn zeros(layout: &Layout, hp: &Hyperparams) -> Self {
        let value = MlpParams::zeros(&mlp_sizes(layout.summary_dim(), &hp.critic_hidden));
        Self {
            actor: ActorParams::zeros(layout, &hp.head_hidden),
            critic: MlpParams::zeros(&mlp_sizes(layout.critic_input(), &hp.critic_hidden)),
            target: value.clone(),
            value,
        }
    }

    /// Random weights; the target starts as an exact copy of the value net.
    pub fn init(layout: &Layout, hp: &Hyperparams, rng: &mut impl Rng) -> Self {
        let actor = ActorParams::init(layout, &hp.head_hidden, rng);
        let critic = MlpParams::init(&mlp_sizes(layout.critic_input(), &hp.critic_hidden), 1.0, rng);
        let value = MlpParams::init(&mlp_sizes(layout.summary_dim(), &hp.critic_hidden), 1.0, rng);
        Self {
            actor,
            critic,
            target: value.clone(),
            value,
        }
    }

    pub fn validate(&self, layout: &Layout) -> Result<()> {
        self.actor.validate(layout)?;
        for (name, net, input) in [
            ("critic", &self.critic, layout.critic_input()),
            ("value", &self.value, layout.summary_dim()),
            ("target", &self.target, layout.summary_dim()),
        ] {
            net.validate()?;
            if net.input_size() != input || net.output_size() != 1 {
                return Err(Error::Shape(format!(
                    "{name} maps {} -> {}, expected {input} -> 1",
                    net.input_size(),
                    net.output_size()
                )));
            }
        }
        Ok(())
    }
}

/// A mini-batch in network units: features, actions divided by `q_max`,
/// stored hidden states and rewards, one row per transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub state: Tensor,
    pub prev_action: Tensor,
    pub prev_hidden: Tensor,
    pub action: Tensor,
    pub reward: Tensor,
    pub next_state: Tensor,
    pub hidden: Tensor,
}

impl Batch {
    pub fn from_transitions(
        items: &[Arc<Transition>],
        obs: &Observation,
        layout: &Layout,
    ) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        let n = items.len();
        let mut state = Vec::with_capacity(n * layout.feature_dim);
        let mut next_state = Vec::with_capacity(n * layout.feature_dim);
        let mut prev_action = Vec::with_capacity(n * layout.n_a);
        let mut action = Vec::with_capacity(n * layout.n_a);
        let mut prev_hidden = Vec::with_capacity(n * layout.hidden);
        let mut hidden = Vec::with_capacity(n * layout.hidden);
        let mut reward = Vec::with_capacity(n);
        for tr in items {
            if tr.action.len() != layout.n_a
                || tr.prev_action.len() != layout.n_a
                || tr.hidden.len() != layout.hidden
                || tr.prev_hidden.len() != layout.hidden
            {
                return Err(Error::Shape("transition does not match the layout".into()));
            }
            obs.write_features(&tr.state, &mut state);
            obs.write_features(&tr.next_state, &mut next_state);
            prev_action.extend(tr.prev_action.iter().zip(&layout.q_max_pu).map(|(a, q)| a / q));
            action.extend(tr.action.iter().zip(&layout.q_max_pu).map(|(a, q)| a / q));
            prev_hidden.extend_from_slice(&tr.prev_hidden);
            hidden.extend_from_slice(&tr.hidden);
            reward.push(tr.reward);
        }
        let f = layout.feature_dim;
        if state.len() != n * f {
            return Err(Error::Shape(format!("observation emits {} features, layout says {f}", state.len() / n)));
        }
        Ok(Self {
            state: Tensor::new(n, f, state)?,
            prev_action: Tensor::new(n, layout.n_a, prev_action)?,
            prev_hidden: Tensor::new(n, layout.hidden, prev_hidden)?,
            action: Tensor::new(n, layout.n_a, action)?,
            reward: Tensor::new(n, 1, reward)?,
            next_state: Tensor::new(n, f, next_state)?,
            hidden: Tensor::new(n, layout.hidden, hidden)?,
        })
    }

    pub fn len(&self) -> usize {
        self.reward.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct ActorOut {
    /// `tanh(u)`, the action over `q_max`.
    action: Var,
    log_prob: Var,
    hidden: Var,
}

/// Reparameterised squashed-Gaussian sample on a batch.
fn actor_forward(
    g: &mut Graph,
    actor: &ActorVars,
    layout: &Layout,
    state: Var,
    prev_action: Var,
    prev_hidden: Var,
    eps: &Tensor,
) -> ActorOut {
    let x = g.concat(&[state, prev_action]);
    let h = actor.gru.step(g, x, prev_hidden);
    let (mu, log_std) = actor.head.gaussian_head(g, h, layout.n_a);
    let sigma = g.exp(log_std);
    let e = g.constant(eps.clone());
    let noise = g.mul(e, sigma);
    let u = g.add(mu, noise);
    let action = g.tanh(u);
    // −log(1 − tanh²u) = 2u + 2·softplus(−2u) − 2 ln 2
    let m2u = g.scale(u, -2.0);
    let sp = g.softplus(m2u);
    let sp2 = g.scale(sp, 2.0);
    let u2 = g.scale(u, 2.0);
    let jac = g.add(u2, sp2);
    let per_site = g.sub(jac, log_std);
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    let c = Tensor::new(
        eps.rows(),
        eps.cols(),
        eps.data()
            .iter()
            .enumerate()
            .map(|(k, e)| -0.5 * e * e - half_ln_2pi - layout.q_max_pu[k % layout.n_a].ln() - 2.0 * LN_2)
            .collect(),
    )
    .expect("shaped like eps");
    let c = g.constant(c);
    let per_site = g.add(per_site, c);
    let log_prob = g.sum_cols(per_site);
    ActorOut {
        action,
        log_prob,
        hidden: h,
    }
}

fn check_eps(eps: &Tensor, rows: usize, n_a: usize) -> Result<()> {
    if eps.shape() != (rows, n_a) {
        return Err(Error::Shape(format!("noise {:?}, expected ({rows}, {n_a})", eps.shape())));
    }
    Ok(())
}

/// One stochastic actor step for a single agent.
///
/// `prev_action` is in p.u.; returns `(A_t` in p.u.`, log_prob, H_t)`.
pub fn sample_action(
    actor: &ActorParams,
    layout: &Layout,
    features: &[f64],
    prev_action: &[f64],
    prev_hidden: &[f64],
    eps: &[f64],
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    actor.validate(layout)?;
    if features.len() != layout.feature_dim
        || prev_action.len() != layout.n_a
        || prev_hidden.len() != layout.hidden
        || eps.len() != layout.n_a
    {
        return Err(Error::Shape("sample_action input widths".into()));
    }
    let mut g = Graph::new();
    let vars = actor.bind(&mut g, false);
    let s = g.constant(Tensor::row_vector(features));
    let scaled: Vec<f64> = prev_action.iter().zip(&layout.q_max_pu).map(|(a, q)| a / q).collect();
    let pa = g.constant(Tensor::row_vector(&scaled));
    let ph = g.constant(Tensor::row_vector(prev_hidden));
    let out = actor_forward(&mut g, &vars, layout, s, pa, ph, &Tensor::row_vector(eps));
    g.check()?;
    let action = g
        .value(out.action)
        .data()
        .iter()
        .zip(&layout.q_max_pu)
        .map(|(a, q)| a * q)
        .collect();
    Ok((action, g.value(out.log_prob).data()[0], g.value(out.hidden).data().to_vec()))
}

fn grads_of(g: &Graph, loss: Var, vars: &[Var], like: &[&Tensor]) -> Result<(f64, Vec<Tensor>)> {
    let value = g.scalar(loss)?;
    let grads = g.backward(loss)?;
    Ok((
        value,
        vars.iter().zip(like).map(|(&v, t)| grads.get_or_zeros(v, t)).collect(),
    ))
}

fn summary(g: &mut Graph, state: &Tensor, prev_action: &Tensor, hidden: &Tensor) -> Var {
    let s = g.constant(state.clone());
    let a = g.constant(prev_action.clone());
    let h = g.constant(hidden.clone());
    g.concat(&[s, a, h])
}

/// `mean[(Q_θ(Ĥ_t, A_t) − R_t − γ V_ψ̄(Ĥ_{t+1}))²]` and its gradient in `θ`.
pub fn critic_loss(
    batch: &Batch,
    critic: &MlpParams,
    target: &MlpParams,
    gamma: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let y = {
        let mut g = Graph::new();
        let tv = target.bind(&mut g, false);
        let x = summary(&mut g, &batch.next_state, &batch.action, &batch.hidden);
        let v = tv.forward(&mut g, x);
        g.check()?;
        batch.reward.zip_map(g.value(v), |r, v| r + gamma * v)
    };
    let mut g = Graph::new();
    let cv = critic.bind(&mut g, true);
    let h = summary(&mut g, &batch.state, &batch.prev_action, &batch.prev_hidden);
    let a = g.constant(batch.action.clone());
    let x = g.concat(&[h, a]);
    let q = cv.forward(&mut g, x);
    let y = g.constant(y);
    let d = g.sub(q, y);
    let sq = g.square(d);
    let loss = g.mean(sq);
    grads_of(&g, loss, &cv.all(), &critic.tensors())
}

/// Fresh actions from the frozen actor: `(A/q_max, log_prob)`.
fn fresh_actions(batch: &Batch, actor: &ActorParams, layout: &Layout, eps: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new();
    let av = actor.bind(&mut g, false);
    let s = g.constant(batch.state.clone());
    let pa = g.constant(batch.prev_action.clone());
    let ph = g.constant(batch.prev_hidden.clone());
    let out = actor_forward(&mut g, &av, layout, s, pa, ph, eps);
    g.check()?;
    Ok((g.value(out.action).clone(), g.value(out.log_prob).clone()))
}

/// `mean[(V_ψ(Ĥ_t) − Q_θ(Ĥ_t, Ã_t) + α log π(Ã_t))²]` with `Ã_t` drawn from
/// the current actor using `eps`, and its gradient in `ψ`.
pub fn value_loss(
    batch: &Batch,
    value: &MlpParams,
    critic: &MlpParams,
    actor: &ActorParams,
    layout: &Layout,
    eps: &Tensor,
    alpha: f64,
) -> Result<(f64, Vec<Tensor>)> {
    check_eps(eps, batch.len(), layout.n_a)?;
    let (a, log_prob) = fresh_actions(batch, actor, layout, eps)?;
    let target = {
        let mut g = Graph::new();
        let cv = critic.bind(&mut g, false);
        let h = summary(&mut g, &batch.state, &batch.prev_action, &batch.prev_hidden);
        let a = g.constant(a);
        let x = g.concat(&[h, a]);
        let q = cv.forward(&mut g, x);
        g.check()?;
        g.value(q).zip_map(&log_prob, |q, lp| q - alpha * lp)
    };
    let mut g = Graph::new();
    let vv = value.bind(&mut g, true);
    let x = summary(&mut g, &batch.state, &batch.prev_action, &batch.prev_hidden);
    let v = vv.forward(&mut g, x);
    let t = g.constant(target);
    let d = g.sub(v, t);
    let sq = g.square(d);
    let loss = g.mean(sq);
    grads_of(&g, loss, &vv.all(), &value.tensors())
}

/// `mean[log π(Ã_t) − Q_θ(Ĥ_t, Ã_t)/α]` through the reparameterised sample,
/// and its gradient in the actor parameters. The normaliser of the
/// Boltzmann target does not depend on the actor and is left out.
pub fn actor_loss(
    batch: &Batch,
    actor: &ActorParams,
    critic: &MlpParams,
    layout: &Layout,
    eps: &Tensor,
    alpha: f64,
) -> Result<(f64, Vec<Tensor>)> {
    check_eps(eps, batch.len(), layout.n_a)?;
    let mut g = Graph::new();
    let av = actor.bind(&mut g, true);
    let cv = critic.bind(&mut g, false);
    let h = summary(&mut g, &batch.state, &batch.prev_action, &batch.prev_hidden);
    let s = g.constant(batch.state.clone());
    let pa = g.constant(batch.prev_action.clone());
    let ph = g.constant(batch.prev_hidden.clone());
    let out = actor_forward(&mut g, &av, layout, s, pa, ph, eps);
    let x = g.concat(&[h, out.action]);
    let q = cv.forward(&mut g, x);
    let q = g.scale(q, -1.0 / alpha);
    let per = g.add(out.log_prob, q);
    let loss = g.mean(per);
    grads_of(&g, loss, &av.all(), &actor.tensors())
}

/// `ψ̄ ← β ψ̄ + (1 − β) ψ`, componentwise.
pub fn soft_update(target: &mut MlpParams, source: &MlpParams, beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!("soft update weight {beta} outside [0, 1]")));
    }
    let src = source.tensors();
    let mut dst = target.tensors_mut();
    if src.len() != dst.len() {
        return Err(Error::Shape("soft update between different networks".into()));
    }
    for (d, s) in dst.iter_mut().zip(&src) {
        d.same_shape(s, "soft update")?;
    }
    for (d, s) in dst.iter_mut().zip(src) {
        for (x, y) in d.data_mut().iter_mut().zip(s.data()) {
            *x = beta * *x + (1.0 - beta) * y;
        }
    }
    Ok(())
}

/// Loss values of one update. `jpi` omits the actor-independent normaliser.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub jq: f64,
    pub jv: f64,
    pub jpi: f64,
}

fn normal_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(rows, cols, data).expect("sized above")
}

#[derive(Clone, Debug, PartialEq)]
struct Optimisers {
    actor: AdamState,
    critic: AdamState,
    value: AdamState,
}

/// Networks, optimiser state and the observation scaling they were built for.
#[derive(Clone, Debug, PartialEq)]
pub struct Rsac {
    pub hp: Hyperparams,
    pub layout: Layout,
    pub nets: Networks,
    observation: Observation,
    opt: Optimisers,
}

impl Rsac {
    /// Fresh agent for `env`, initialised from the seed's policy stream.
    pub fn for_env(env: &VoltVarEnv, hp: Hyperparams) -> Result<Self> {
        hp.validate()?;
        let layout = Layout::for_env(env, hp.gru_hidden);
        let mut rng = substream(hp.seed, Stream::PolicyInit);
        let nets = Networks::init(&layout, &hp, &mut rng);
        Self::from_parts(env.observation(), layout, nets, hp)
    }

    pub fn from_parts(observation: Observation, layout: Layout, nets: Networks, hp: Hyperparams) -> Result<Self> {
        hp.validate()?;
        layout.validate()?;
        nets.validate(&layout)?;
        if observation.dim() != layout.feature_dim {
            return Err(Error::Shape("observation width differs from the layout".into()));
        }
        let opt = Optimisers {
            actor: AdamState::for_params(&nets.actor),
            critic: AdamState::for_params(&nets.critic),
            value: AdamState::for_params(&nets.value),
        };
        Ok(Self {
            hp,
            layout,
            nets,
            observation,
            opt,
        })
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    /// One mini-batch update of critic, value and actor from the same
    /// parameter snapshot, then the target soft update. Leaves everything
    /// untouched when the buffer holds fewer than a batch.
    pub fn train_step(&mut self, buffer: &ReplayBuffer, rng: &mut impl Rng) -> Result<LossReport> {
        let need = self.hp.batch_size;
        let have = buffer.len();
        if have < need {
            return Err(Error::WarmUp { have, need });
        }
        let items = buffer.sample(need, rng);
        let batch = Batch::from_transitions(&items, &self.observation, &self.layout)?;
        let eps_v = normal_tensor(need, self.layout.n_a, rng);
        let eps_pi = normal_tensor(need, self.layout.n_a, rng);
        let n = &self.nets;
        let (jq, gq) = critic_loss(&batch, &n.critic, &n.target, self.hp.gamma)?;
        let (jv, gv) = value_loss(&batch, &n.value, &n.critic, &n.actor, &self.layout, &eps_v, self.hp.alpha)?;
        let (jpi, gpi) = actor_loss(&batch, &n.actor, &n.critic, &self.layout, &eps_pi, self.hp.alpha)?;
        let lr = self.hp.lr;
        adam_update(&mut self.nets.critic, &gq, &mut self.opt.critic, lr)?;
        adam_update(&mut self.nets.value, &gv, &mut self.opt.value, lr)?;
        adam_update(&mut self.nets.actor, &gpi, &mut self.opt.actor, lr)?;
        soft_update(&mut self.nets.target, &self.nets.value, self.hp.target_keep())?;
        Ok(LossReport { jq, jv, jpi })
    }

    /// Network weights with enough metadata to rebuild a policy.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set_meta("feature_dim", self.layout.feature_dim);
        ck.set_meta("n_a", self.layout.n_a);
        ck.set_meta("hidden", self.layout.hidden);
        ck.set_meta("q_max_pu", join(&self.layout.q_max_pu));
        ck.set_meta("head_hidden", join(&self.hp.head_hidden));
        ck.set_meta("critic_hidden", join(&self.hp.critic_hidden));
        ck.set_meta("seed", self.hp.seed);
        ck.add_params("actor", &self.nets.actor);
        ck.add_params("critic", &self.nets.critic);
        ck.add_params("value", &self.nets.value);
        ck.add_params("target", &self.nets.target);
        ck
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn meta_list<T: std::str::FromStr>(ck: &Checkpoint, key: &str) -> Result<Vec<T>> {
    let raw = ck
        .meta(key)
        .ok_or_else(|| Error::Checkpoint(format!("missing metadata {key}")))?;
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|s| s.parse().map_err(|_| Error::Checkpoint(format!("bad {key} entry {s:?}"))))
        .collect()
}

fn meta_one<T: std::str::FromStr>(ck: &Checkpoint, key: &str) -> Result<T> {
    match meta_list(ck, key)?.pop() {
        Some(v) => Ok(v),
        None => Err(Error::Checkpoint(format!("empty metadata {key}"))),
    }
}

/// Layout and actor weights stored by [`Rsac::checkpoint`].
pub fn actor_from_checkpoint(ck: &Checkpoint) -> Result<(Layout, ActorParams)> {
    let layout = Layout {
        feature_dim: meta_one(ck, "feature_dim")?,
        n_a: meta_one(ck, "n_a")?,
        hidden: meta_one(ck, "hidden")?,
        q_max_pu: meta_list(ck, "q_max_pu")?,
    };
    layout.validate()?;
    let head_hidden: Vec<usize> = meta_list(ck, "head_hidden")?;
    let mut actor = ActorParams::zeros(&layout, &head_hidden);
    ck.load_params("actor", &mut actor)?;
    Ok((layout, actor))
}
