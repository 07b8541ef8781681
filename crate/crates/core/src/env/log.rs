use std::io::Write;

use super::StepInfo;
use crate::Result;

pub const EPISODE_LOG_FIXED_COLUMNS: [&str; 9] = [
    "episode", "step", "t_sec", "reward", "tap", "timer_sec", "vmin", "vmax", "loss_pu",
];

/// One row of the episode log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub info: StepInfo,
}

/// Writes `episode,step,t_sec,reward,tap,timer_sec,vmin,vmax,loss_pu,q_pv_1..q_pv_N`.
pub fn write_episode_log(records: &[EpisodeRecord], sites: usize, mut out: impl Write) -> Result<()> {
    let mut header = EPISODE_LOG_FIXED_COLUMNS.join(",");
    for i in 1..=sites {
        header.push_str(&format!(",q_pv_{i}"));
    }
    writeln!(out, "{header}")?;
    for r in records {
        let i = &r.info;
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.episode, r.step, i.t_sec, r.reward, i.tap, i.timer_s, i.vmin, i.vmax, i.loss_pu
        )?;
        for q in &i.q_kvar {
            write!(out, ",{q}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Day-level metrics of one controller run.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub loss_kwh: f64,
    pub tap_ops: u32,
    pub violation_steps: u32,
    pub max_v: f64,
    pub min_v: f64,
    pub total_reward: f64,
}

impl EpisodeSummary {
    /// Aggregates `records`; energy uses `s_base_mva` and the control step.
    pub fn from_records(records: &[EpisodeRecord], s_base_mva: f64, dt_s: f64) -> Self {
        let mut s = Self {
            loss_kwh: 0.0,
            tap_ops: 0,
            violation_steps: 0,
            max_v: f64::NEG_INFINITY,
            min_v: f64::INFINITY,
            total_reward: 0.0,
        };
        for r in records {
            s.loss_kwh += r.info.loss_pu * s_base_mva * 1000.0 * dt_s / 3600.0;
            s.tap_ops += r.info.tap_delta.unsigned_abs();
            s.violation_steps += u32::from(r.info.violation);
            s.max_v = s.max_v.max(r.info.vmax);
            s.min_v = s.min_v.min(r.info.vmin);
            s.total_reward += r.reward;
        }
        s
    }

    pub const CSV_HEADER: &'static str = "loss_kwh,tap_ops,violation_steps,max_v,min_v";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.loss_kwh, self.tap_ops, self.violation_steps, self.max_v, self.min_v
        )
    }
}
