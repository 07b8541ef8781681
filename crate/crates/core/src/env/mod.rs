//! The memory-based decision process: inverters act, the grid settles, the
//! OLTC applies its own rule, and a reward is paid.
//!
//! Within one control step:
//!
//! 1. apply the inverter Var and the scenario values at `t`, solve the flow;
//! 2. hand `(V0, I0)` to the LDC estimator and the tap timer;
//! 3. if a tap fired, re-solve at the new tap;
//! 4. the next state carries the post-tap voltages, tap and timer, and the
//!    scenario values at `t + 1`;
//! 5. the reward uses the post-tap flow and the zero-Var flow at the tap held
//!    before the OLTC update.

mod buffer;
mod log;
mod reward;
mod rollout;

use std::sync::Arc;

pub use buffer::{ReplayBuffer, Transition};
pub use log::{write_episode_log, EpisodeRecord, EpisodeSummary, EPISODE_LOG_FIXED_COLUMNS};
pub use reward::{compute_reward, RewardConfig};
pub use rollout::{run_day, VarController};

use crate::grid::{solve_power_flow, Feeder, Injections, PowerFlowResult, SolverOptions};
use crate::oltc::{oltc_step, LdcSettings, OltcState};
use crate::scenario::DayScenario;
use crate::{Error, Result};

/// Full system state observed by the policy.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarkovState {
    pub p_load_kw: Vec<f64>,
    pub q_load_kvar: Vec<f64>,
    pub p_pv_kw: Vec<f64>,
    /// Bus voltage magnitudes, p.u.
    pub v_pu: Vec<f64>,
    pub tap: i32,
    pub timer_s: f64,
}

/// Inverter Var set-points, kvar per PV site (positive = injection).
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub q_kvar: Vec<f64>,
}

impl Action {
    pub fn zero(sites: usize) -> Self {
        Self {
            q_kvar: vec![0.0; sites],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[derive(Default)]
pub struct EnvConfig {
    pub ldc: LdcSettings,
    pub reward: RewardConfig,
    pub solver: SolverOptions,
}


/// Scales a [`MarkovState`] into network inputs: loads relative to the base
/// case, PV relative to the site rating, voltage deviation in units of 0.05
/// p.u., tap over `tap_max` and the timer over the delay.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    base_p: Vec<f64>,
    base_q: Vec<f64>,
    p_max: Vec<f64>,
    tap_max: f64,
    delay_s: f64,
}

impl Observation {
    pub fn new(feeder: &Feeder, ldc: &LdcSettings) -> Self {
        let model = feeder.model();
        Self {
            base_p: model.buses.iter().map(|b| b.p_kw).collect(),
            base_q: model.buses.iter().map(|b| b.q_kvar).collect(),
            p_max: model.pv_sites.iter().map(|s| s.p_max_kw).collect(),
            tap_max: f64::from(ldc.tap_max.max(ldc.tap_min.abs()).max(1)),
            delay_s: ldc.delay_s,
        }
    }

    pub fn dim(&self) -> usize {
        3 * self.base_p.len() + self.p_max.len() + 2
    }

    pub fn write_features(&self, s: &MarkovState, out: &mut Vec<f64>) {
        let ratio = |x: f64, base: f64| if base > 0.0 { x / base } else { 0.0 };
        out.extend(s.p_load_kw.iter().zip(&self.base_p).map(|(&x, &b)| ratio(x, b)));
        out.extend(s.q_load_kvar.iter().zip(&self.base_q).map(|(&x, &b)| ratio(x, b)));
        out.extend(s.p_pv_kw.iter().zip(&self.p_max).map(|(&x, &b)| ratio(x, b)));
        out.extend(s.v_pu.iter().map(|v| (v - 1.0) / 0.05));
        out.push(f64::from(s.tap) / self.tap_max);
        out.push(s.timer_s / self.delay_s);
    }

    pub fn features(&self, s: &MarkovState) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        self.write_features(s, &mut out);
        out
    }
}

/// Per-step diagnostics returned alongside the next state.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    /// Scenario step index the action applied to.
    pub t: usize,
    pub t_sec: u64,
    pub loss_pu: f64,
    pub loss0_pu: f64,
    /// LDC voltage estimate that drove the tap decision.
    pub v_est: f64,
    pub tap_delta: i32,
    pub tap: i32,
    pub timer_s: f64,
    pub vmin: f64,
    pub vmax: f64,
    pub violation: bool,
    pub q_kvar: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: MarkovState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One feeder with its OLTC, driven through a [`DayScenario`] window.
#[derive(Clone, Debug)]
pub struct VoltVarEnv {
    feeder: Arc<Feeder>,
    config: EnvConfig,
    scenario: Option<Arc<DayScenario>>,
    start: usize,
    horizon: usize,
    /// Steps taken since reset.
    elapsed: usize,
    oltc: OltcState,
    state: MarkovState,
    site_pos: Vec<usize>,
}

impl VoltVarEnv {
    pub fn new(feeder: Arc<Feeder>, config: EnvConfig) -> Result<Self> {
        config.ldc.validate().map_err(Error::Config)?;
        config.reward.validate().map_err(Error::Config)?;
        let tap = &feeder.model().tap;
        if tap.tap_min != config.ldc.tap_min
            || tap.tap_max != config.ldc.tap_max
            || tap.step != config.ldc.step
        {
            return Err(Error::Config(
                "LDC tap range/step disagree with the network's tap changer".into(),
            ));
        }
        let site_pos = feeder
            .model()
            .pv_positions()
            .into_iter()
            .map(|p| p.expect("validated feeder"))
            .collect();
        Ok(Self {
            feeder,
            config,
            scenario: None,
            start: 0,
            horizon: 0,
            elapsed: 0,
            oltc: OltcState::default(),
            state: MarkovState::default(),
            site_pos,
        })
    }

    pub fn feeder(&self) -> &Arc<Feeder> {
        &self.feeder
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn observation(&self) -> Observation {
        Observation::new(&self.feeder, &self.config.ldc)
    }

    pub fn site_count(&self) -> usize {
        self.site_pos.len()
    }

    pub fn q_max_kvar(&self) -> Vec<f64> {
        self.feeder.model().pv_sites.iter().map(|s| s.q_max_kvar).collect()
    }

    pub fn oltc_state(&self) -> OltcState {
        self.oltc
    }

    pub fn state(&self) -> &MarkovState {
        &self.state
    }

    pub fn scenario(&self) -> Option<&Arc<DayScenario>> {
        self.scenario.as_ref()
    }

    /// Scenario index of the next step.
    pub fn t(&self) -> usize {
        self.start + self.elapsed
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_done(&self) -> bool {
        self.scenario.is_none() || self.elapsed >= self.horizon
    }

    /// Starts a full-day episode.
    pub fn reset(&mut self, scenario: Arc<DayScenario>, initial_tap: i32) -> Result<MarkovState> {
        let steps = scenario.steps();
        self.reset_window(scenario, initial_tap, 0, steps)
    }

    /// Starts an episode covering `horizon` steps from scenario step `start`.
    pub fn reset_window(
        &mut self,
        scenario: Arc<DayScenario>,
        initial_tap: i32,
        start: usize,
        horizon: usize,
    ) -> Result<MarkovState> {
        scenario.validate(self.feeder.model())?;
        if horizon == 0 || start + horizon > scenario.steps() {
            return Err(Error::Scenario(format!(
                "window [{start}, {}) exceeds the {}-step scenario",
                start + horizon,
                scenario.steps()
            )));
        }
        if !self.feeder.model().tap.contains(initial_tap) {
            return Err(Error::Config(format!("initial tap {initial_tap} out of range")));
        }
        self.scenario = Some(scenario);
        self.start = start;
        self.horizon = horizon;
        self.elapsed = 0;
        self.oltc = OltcState::at_tap(initial_tap);
        let zero = vec![0.0; self.site_count()];
        let flow = self.flow_at(start, &zero, initial_tap)?;
        self.state = self.compose_state(start, &flow);
        Ok(self.state.clone())
    }

    fn scenario_ref(&self) -> Result<&DayScenario> {
        self.scenario.as_deref().ok_or(Error::EpisodeFinished)
    }

    fn injections(&self, t: usize, q_kvar: &[f64], tap: i32) -> Result<Injections> {
        let sc = self.scenario_ref()?;
        let mut p_kw = sc.load_p_kw[t].clone();
        let mut q = sc.load_q_kvar[t].clone();
        for (i, &pos) in self.site_pos.iter().enumerate() {
            p_kw[pos] -= sc.pv_kw[t][i];
            q[pos] -= q_kvar[i];
        }
        Ok(Injections { p_kw, q_kvar: q, tap })
    }

    fn flow_at(&self, t: usize, q_kvar: &[f64], tap: i32) -> Result<PowerFlowResult> {
        let inj = self.injections(t, q_kvar, tap)?;
        let flow = solve_power_flow(&self.feeder, &inj, &self.config.solver)?;
        if !flow.converged {
            return Err(Error::Divergence {
                iterations: flow.iterations,
                mismatch: flow.mismatch,
            });
        }
        Ok(flow)
    }

    /// Flow at the next step's scenario values and the present tap, with the
    /// given Var; no OLTC update. Used by controllers that probe the grid.
    pub fn trial_flow(&self, q_kvar: &[f64]) -> Result<PowerFlowResult> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        self.flow_at(self.t(), q_kvar, self.oltc.tap)
    }

    /// Loss at scenario step `t` with every inverter at zero Var and the tap
    /// currently held.
    pub fn counterfactual_loss(&self, t: usize) -> Result<f64> {
        let zero = vec![0.0; self.site_count()];
        Ok(self.flow_at(t, &zero, self.oltc.tap)?.loss_pu)
    }

    fn compose_state(&self, t: usize, flow: &PowerFlowResult) -> MarkovState {
        let sc = self.scenario.as_deref().expect("scenario set");
        MarkovState {
            p_load_kw: sc.load_p_kw[t].clone(),
            q_load_kvar: sc.load_q_kvar[t].clone(),
            p_pv_kw: sc.pv_kw[t].clone(),
            v_pu: flow.magnitudes(),
            tap: self.oltc.tap,
            timer_s: self.oltc.timer_s,
        }
    }

    pub fn check_action(&self, action: &Action) -> Result<()> {
        let model = self.feeder.model();
        if action.q_kvar.len() != self.site_count() {
            return Err(Error::Shape(format!(
                "action has {} entries for {} PV sites",
                action.q_kvar.len(),
                self.site_count()
            )));
        }
        for (i, (&q, site)) in action.q_kvar.iter().zip(&model.pv_sites).enumerate() {
            if !q.is_finite() || q.abs() > site.q_max_kvar {
                return Err(Error::ActionOutOfBounds {
                    site: i,
                    value: q,
                    limit: site.q_max_kvar,
                });
            }
        }
        Ok(())
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        self.check_action(action)?;
        let t = self.t();
        let dt = self.scenario_ref()?.dt();
        let s_base = self.feeder.model().s_base_mva;

        let tap_before = self.oltc.tap;
        let loss0 = self.counterfactual_loss(t)?;
        let mut flow = self.flow_at(t, &action.q_kvar, tap_before)?;

        let v_est = self.config.ldc.estimate_from_system(flow.v0, flow.i0, s_base);
        let (next_oltc, tap_delta) = oltc_step(self.oltc, v_est, dt, &self.config.ldc);
        self.oltc = next_oltc;
        if tap_delta != 0 {
            flow = self.flow_at(t, &action.q_kvar, self.oltc.tap)?;
        }

        self.elapsed += 1;
        let done = self.elapsed >= self.horizon;
        let steps = self.scenario_ref()?.steps();
        let next_t = (t + 1).min(steps - 1);
        let state = self.compose_state(next_t, &flow);
        let reward = compute_reward(&state.v_pu, flow.loss_pu, loss0, &self.config.reward);
        if !reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        let info = StepInfo {
            t,
            t_sec: t as u64 * u64::from(self.scenario_ref()?.dt_s),
            loss_pu: flow.loss_pu,
            loss0_pu: loss0,
            v_est,
            tap_delta,
            tap: self.oltc.tap,
            timer_s: self.oltc.timer_s,
            vmin: flow.vmin(),
            vmax: flow.vmax(),
            violation: self.config.reward.is_violated(&state.v_pu),
            q_kvar: action.q_kvar.clone(),
        };
        self.state = state.clone();
        Ok(StepOutcome {
            state,
            reward,
            done,
            info,
        })
    }
}

/// The tap an LDC with these settings would settle on for the zero-Var flow
/// at scenario step `t`: the position whose estimate lies closest to the
/// target voltage.
pub fn settled_tap(feeder: &Feeder, config: &EnvConfig, scenario: &DayScenario, t: usize) -> Result<i32> {
    let model = feeder.model();
    let ldc = &config.ldc;
    let mut best = (f64::INFINITY, 0);
    for tap in ldc.tap_min..=ldc.tap_max {
        let mut inj = Injections {
            p_kw: scenario.load_p_kw[t].clone(),
            q_kvar: scenario.load_q_kvar[t].clone(),
            tap,
        };
        for (i, site) in model.pv_sites.iter().enumerate() {
            let pos = model.bus_index(site.bus).expect("validated feeder");
            inj.p_kw[pos] -= scenario.pv_kw[t][i];
        }
        let flow = solve_power_flow(feeder, &inj, &config.solver)?;
        let v_est = ldc.estimate_from_system(flow.v0, flow.i0, model.s_base_mva);
        let distance = (v_est - ldc.v_target).abs();
        if distance < best.0 {
            best = (distance, tap);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ieee33::ieee33;
    use crate::scenario::Fluctuation;

    fn setup() -> (VoltVarEnv, Arc<DayScenario>) {
        let model = ieee33();
        let sc = DayScenario::generate(&model, Fluctuation::Strong, 60, 7).unwrap();
        let feeder = Arc::new(Feeder::new(model).unwrap());
        (VoltVarEnv::new(feeder, EnvConfig::default()).unwrap(), Arc::new(sc))
    }

    #[test]
    fn zero_action_has_zero_incentive_reward() {
        let (mut env, sc) = setup();
        env.reset_window(sc, 0, 600, 5).unwrap();
        for _ in 0..5 {
            let out = env.step(&Action::zero(7)).unwrap();
            if !out.info.violation && out.info.tap_delta == 0 {
                assert!(out.reward.abs() < 1e-12, "{}", out.reward);
            }
        }
        assert!(env.is_done());
        assert!(matches!(env.step(&Action::zero(7)), Err(Error::EpisodeFinished)));
    }

    #[test]
    fn out_of_bounds_action_is_rejected() {
        let (mut env, sc) = setup();
        env.reset(sc, 0).unwrap();
        let mut a = Action::zero(7);
        a.q_kvar[2] = 401.0;
        match env.step(&a) {
            Err(Error::ActionOutOfBounds { site, limit, .. }) => {
                assert_eq!(site, 2);
                assert!((limit - 400.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn next_state_uses_next_scenario_values() {
        let (mut env, sc) = setup();
        env.reset_window(sc.clone(), 0, 700, 3).unwrap();
        let out = env.step(&Action::zero(7)).unwrap();
        assert_eq!(out.state.p_pv_kw, sc.pv_kw[701]);
        assert_eq!(out.state.p_load_kw, sc.load_p_kw[701]);
        assert_eq!(out.info.t, 700);
        assert_eq!(out.info.t_sec, 42_000);
    }

    #[test]
    fn injecting_vars_reduces_loss_at_midday_load() {
        let (mut env, sc) = setup();
        env.reset_window(sc, 0, 1000, 1).unwrap();
        let q: Vec<f64> = env.q_max_kvar().iter().map(|q| 0.5 * q).collect();
        let out = env.step(&Action { q_kvar: q }).unwrap();
        assert!(out.info.loss_pu < out.info.loss0_pu);
    }

    #[test]
    fn features_are_normalised() {
        let (mut env, sc) = setup();
        let s = env.reset_window(sc, 0, 0, 1).unwrap();
        let obs = env.observation();
        let f = obs.features(&s);
        assert_eq!(f.len(), obs.dim());
        assert!(f.iter().all(|x| x.is_finite() && x.abs() < 5.0));
    }
}
