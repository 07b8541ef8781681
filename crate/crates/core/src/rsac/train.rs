use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{sample_action, Hyperparams, LossReport, Rsac};
use crate::env::{settled_tap, Action, ReplayBuffer, Transition, VoltVarEnv};
use crate::rng::{child_seed, substream, Stream};
use crate::scenario::{DayScenario, Fluctuation};
use crate::{Error, Result};

pub const TRAINING_LOG_HEADER: &str =
    "episode,total_reward,avg50_reward,jq,jv,jpi,buffer_size,taps_in_episode,violation_steps";

/// Where training episodes get their days from.
#[derive(Clone, Debug)]
pub enum DaySource {
    /// A generated day per episode (or per pool slot), seeded from the
    /// training seed.
    Generated { mode: Fluctuation, dt_s: u32 },
    /// One fixed day for every episode.
    Fixed(Arc<DayScenario>),
}

pub struct TrainingPlan {
    pub env: VoltVarEnv,
    pub days: DaySource,
    pub hp: Hyperparams,
    /// Directory for checkpoint files; `None` keeps them in memory only.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingLogRow {
    pub episode: usize,
    pub total_reward: f64,
    pub avg50_reward: f64,
    /// Mean losses over the episode's updates; `None` during warm-up.
    pub losses: Option<LossReport>,
    pub buffer_size: usize,
    pub taps_in_episode: u32,
    pub violation_steps: u32,
}

impl TrainingLogRow {
    pub fn csv_row(&self) -> String {
        let (jq, jv, jpi) = match self.losses {
            Some(l) => (l.jq.to_string(), l.jv.to_string(), l.jpi.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        format!(
            "{},{},{},{jq},{jv},{jpi},{},{},{}",
            self.episode,
            self.total_reward,
            self.avg50_reward,
            self.buffer_size,
            self.taps_in_episode,
            self.violation_steps
        )
    }
}

pub fn write_training_log(rows: &[TrainingLogRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{TRAINING_LOG_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub struct TrainingOutcome {
    pub agent: Rsac,
    pub log: Vec<TrainingLogRow>,
    /// Checkpoint files written, in order.
    pub checkpoints: Vec<PathBuf>,
}

impl TrainingOutcome {
    pub fn final_avg50(&self) -> Option<f64> {
        self.log.last().map(|r| r.avg50_reward)
    }
}

struct Days {
    source: DaySource,
    seed: u64,
    pool: usize,
    cache: HashMap<u64, Arc<DayScenario>>,
}

impl Days {
    fn for_episode(&mut self, env: &VoltVarEnv, episode: usize) -> Result<Arc<DayScenario>> {
        match &self.source {
            DaySource::Fixed(day) => Ok(Arc::clone(day)),
            DaySource::Generated { mode, dt_s } => {
                let slot = if self.pool > 0 { episode % self.pool } else { episode };
                let seed = child_seed(self.seed, slot as u64);
                if let Some(d) = self.cache.get(&seed) {
                    return Ok(Arc::clone(d));
                }
                let day = Arc::new(DayScenario::generate(env.feeder().model(), *mode, *dt_s, seed)?);
                if self.pool > 0 {
                    self.cache.insert(seed, Arc::clone(&day));
                }
                Ok(day)
            }
        }
    }
}

fn save(agent: &Rsac, dir: &Option<PathBuf>, name: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = dir {
        let path = dir.join(name);
        agent.checkpoint().save(&path)?;
        out.push(path);
    }
    Ok(())
}

/// Trains from scratch: one stochastic rollout per episode, then up to
/// `updates_per_episode` mini-batch updates. Each episode covers a window of
/// `horizon` steps at a random start, beginning at the settled tap.
/// `on_episode` sees every log row as it is produced.
pub fn run_training(plan: TrainingPlan, mut on_episode: impl FnMut(&TrainingLogRow)) -> Result<TrainingOutcome> {
    let TrainingPlan {
        mut env,
        days,
        hp,
        checkpoint_dir,
    } = plan;
    if let Some(dir) = &checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut agent = Rsac::for_env(&env, hp.clone())?;
    let layout = agent.layout.clone();
    let obs = agent.observation().clone();
    let to_kvar = 1000.0 * env.feeder().model().s_base_mva;
    let q_max = env.q_max_kvar();

    let buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut explore = substream(hp.seed, Stream::Exploration);
    let mut minibatch = substream(hp.seed, Stream::Minibatch);
    let mut windows = substream(hp.seed, Stream::Episodes);
    let mut days = Days {
        source: days,
        seed: hp.seed,
        pool: hp.day_pool,
        cache: HashMap::new(),
    };

    let mut checkpoints = Vec::new();
    save(&agent, &checkpoint_dir, "checkpoint_init.txt", &mut checkpoints)?;
    let mut log: Vec<TrainingLogRow> = Vec::with_capacity(hp.episodes);
    let mut totals: Vec<f64> = Vec::with_capacity(hp.episodes);

    for episode in 0..hp.episodes {
        let day = days.for_episode(&env, episode)?;
        let steps = day.steps();
        let horizon = hp.horizon.min(steps);
        let start = windows.random_range(0..=steps - horizon);
        let tap = settled_tap(env.feeder(), env.config(), &day, start)?;
        let mut state = Arc::new(env.reset_window(day, tap, start, horizon)?);

        let mut hidden = vec![0.0; layout.hidden];
        let mut prev = vec![0.0; layout.n_a];
        let (mut total, mut taps, mut violations) = (0.0, 0u32, 0u32);
        let mut step = 0;
        while !env.is_done() {
            let features = obs.features(&state);
            let eps: Vec<f64> = (0..layout.n_a).map(|_| explore.sample(StandardNormal)).collect();
            let (a_pu, _, h) = sample_action(&agent.nets.actor, &layout, &features, &prev, &hidden, &eps)?;
            let q_kvar: Vec<f64> = a_pu
                .iter()
                .zip(&q_max)
                .map(|(a, q)| (a * to_kvar).clamp(-q, *q))
                .collect();
            let applied: Vec<f64> = q_kvar.iter().map(|q| q / to_kvar).collect();
            let out = env.step(&Action { q_kvar })?;
            let next = Arc::new(out.state);
            total += out.reward;
            taps += out.info.tap_delta.unsigned_abs();
            violations += u32::from(out.info.violation);
            buffer.push(Transition {
                state,
                prev_action: prev,
                prev_hidden: hidden,
                action: applied.clone(),
                reward: out.reward,
                next_state: Arc::clone(&next),
                hidden: h.clone(),
                episode,
                step,
                done: out.done,
            });
            state = next;
            prev = applied;
            hidden = h;
            step += 1;
        }

        let mut sum = LossReport::default();
        let mut updates = 0usize;
        for _ in 0..hp.updates_per_episode {
            match agent.train_step(&buffer, &mut minibatch) {
                Ok(r) => {
                    sum.jq += r.jq;
                    sum.jv += r.jv;
                    sum.jpi += r.jpi;
                    updates += 1;
                }
                Err(Error::WarmUp { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        let losses = (updates > 0).then(|| {
            let n = updates as f64;
            LossReport {
                jq: sum.jq / n,
                jv: sum.jv / n,
                jpi: sum.jpi / n,
            }
        });

        totals.push(total);
        let recent = &totals[totals.len().saturating_sub(50)..];
        let row = TrainingLogRow {
            episode,
            total_reward: total,
            avg50_reward: recent.iter().sum::<f64>() / recent.len() as f64,
            losses,
            buffer_size: buffer.len(),
            taps_in_episode: taps,
            violation_steps: violations,
        };
        on_episode(&row);
        log.push(row);

        let done = episode + 1;
        if hp.checkpoint_every > 0 && done % hp.checkpoint_every == 0 && done < hp.episodes {
            save(&agent, &checkpoint_dir, &format!("checkpoint_ep{done:05}.txt"), &mut checkpoints)?;
        }
    }
    if hp.episodes > 0 {
        save(&agent, &checkpoint_dir, "checkpoint_final.txt", &mut checkpoints)?;
    }
    Ok(TrainingOutcome {
        agent,
        log,
        checkpoints,
    })
}

/// Path of the last checkpoint a training run in `dir` would have written.
pub fn final_checkpoint_path(dir: &Path, episodes: usize) -> PathBuf {
    dir.join(if episodes > 0 {
        "checkpoint_final.txt"
    } else {
        "checkpoint_init.txt"
    })
}
