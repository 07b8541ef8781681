#[derive(Clone, Debug, PartialEq)]
pub struct RewardConfig {
    /// Penalty coefficient applied to the summed limit violation (negative).
    pub penalty: f64,
    /// Incentive factor applied to the loss reduction (positive).
    pub incentive: f64,
    pub v_upper: f64,
    pub v_lower: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            penalty: -100.0,
            incentive: 100.0,
            v_upper: 1.05,
            v_lower: 0.95,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.penalty < 0.0) {
            return Err("penalty coefficient must be negative".into());
        }
        if !(self.incentive > 0.0) {
            return Err("incentive factor must be positive".into());
        }
        if !(self.v_lower < self.v_upper) {
            return Err("lower voltage limit must be below the upper limit".into());
        }
        Ok(())
    }

    /// Total excursion beyond the limits, summed over buses, p.u.
    pub fn violation(&self, voltages: &[f64]) -> f64 {
        voltages
            .iter()
            .map(|&v| (v - self.v_upper).max(0.0) + (self.v_lower - v).max(0.0))
            .sum()
    }

    pub fn is_violated(&self, voltages: &[f64]) -> bool {
        voltages.iter().any(|&v| v > self.v_upper || v < self.v_lower)
    }
}

/// Penalises limit violations when any bus is outside `[v_lower, v_upper]`;
/// otherwise rewards the loss reduction against the no-action flow.
pub fn compute_reward(voltages: &[f64], loss_pu: f64, loss0_pu: f64, cfg: &RewardConfig) -> f64 {
    if cfg.is_violated(voltages) {
        cfg.penalty * cfg.violation(voltages)
    } else {
        cfg.incentive * (loss0_pu - loss_pu)
    }
}
