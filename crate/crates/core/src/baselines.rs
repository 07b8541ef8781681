//! Non-learning inverter strategies: droop, constant PCC voltage and no Var.

use crate::env::{Action, VarController, VoltVarEnv};
use crate::{Error, Result};

/// Piecewise-linear Volt-Var curve, identical at every site up to `q_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct DroopCurve {
    pub v_lo_sat: f64,
    pub v_lo_db: f64,
    pub v_hi_db: f64,
    pub v_hi_sat: f64,
}

impl Default for DroopCurve {
    fn default() -> Self {
        Self {
            v_lo_sat: 0.95,
            v_lo_db: 0.98,
            v_hi_db: 1.02,
            v_hi_sat: 1.05,
        }
    }
}

impl DroopCurve {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v_lo_sat < self.v_lo_db
            && self.v_lo_db <= self.v_hi_db
            && self.v_hi_db < self.v_hi_sat;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("droop breakpoints not ordered: {self:?}")))
        }
    }
}

/// Var for a site at voltage `v`: zero in the dead band, `+q_max` at and
/// below `v_lo_sat`, `-q_max` at and above `v_hi_sat`, linear in between.
pub fn droop_control(v: f64, curve: &DroopCurve, q_max: f64) -> f64 {
    if v <= curve.v_lo_sat {
        q_max
    } else if v < curve.v_lo_db {
        q_max * (curve.v_lo_db - v) / (curve.v_lo_db - curve.v_lo_sat)
    } else if v <= curve.v_hi_db {
        0.0
    } else if v < curve.v_hi_sat {
        -q_max * (v - curve.v_hi_db) / (curve.v_hi_sat - curve.v_hi_db)
    } else {
        -q_max
    }
}

pub fn no_var_control() -> f64 {
    0.0
}

pub struct NoVar;

impl VarController for NoVar {
    fn name(&self) -> String {
        "none".into()
    }

    fn act(&mut self, env: &VoltVarEnv) -> Result<Action> {
        Ok(Action {
            q_kvar: vec![no_var_control(); env.site_count()],
        })
    }
}

/// Local droop at every site, settled to its steady operating point within
/// each step by damped fixed-point iteration on the flow.
pub struct Droop {
    pub curve: DroopCurve,
    pub damping: f64,
    pub max_iter: usize,
    /// Stop once no set-point moves by more than this, kvar.
    pub tolerance_kvar: f64,
    last: Vec<f64>,
}

impl Droop {
    pub fn new(curve: DroopCurve) -> Result<Self> {
        curve.validate()?;
        Ok(Self {
            curve,
            damping: 0.5,
            max_iter: 30,
            tolerance_kvar: 1e-3,
            last: Vec::new(),
        })
    }
}

impl VarController for Droop {
    fn name(&self) -> String {
        "droop".into()
    }

    fn reset(&mut self) {
        self.last.clear();
    }

    fn act(&mut self, env: &VoltVarEnv) -> Result<Action> {
        let q_max = env.q_max_kvar();
        let pos = site_positions(env);
        let mut q = if self.last.len() == q_max.len() {
            self.last.clone()
        } else {
            vec![0.0; q_max.len()]
        };
        for _ in 0..self.max_iter {
            let v = env.trial_flow(&q)?.magnitudes();
            let mut moved: f64 = 0.0;
            for i in 0..q.len() {
                let target = droop_control(v[pos[i]], &self.curve, q_max[i]);
                let next = q[i] + self.damping * (target - q[i]);
                moved = moved.max((next - q[i]).abs());
                q[i] = next;
            }
            if moved <= self.tolerance_kvar {
                break;
            }
        }
        self.last = q.clone();
        Ok(Action { q_kvar: q })
    }
}

/// Var for one site that brings its voltage to `v_ref` with the other sites
/// held at `q`, by bisection; saturates when the target is out of reach.
pub fn constant_pcc_control(
    env: &VoltVarEnv,
    q: &[f64],
    site: usize,
    v_ref: f64,
    tolerance: f64,
) -> Result<f64> {
    if !(0.95..=1.05).contains(&v_ref) {
        return Err(Error::Config(format!("PCC reference {v_ref} outside [0.95, 1.05]")));
    }
    let q_max = env.q_max_kvar()[site];
    let bus = site_positions(env)[site];
    let mut trial = q.to_vec();
    let mut voltage_at = |qi: f64| -> Result<f64> {
        trial[site] = qi;
        Ok(env.trial_flow(&trial)?.voltages[bus].norm())
    };
    if voltage_at(-q_max)? >= v_ref {
        return Ok(-q_max);
    }
    if voltage_at(q_max)? <= v_ref {
        return Ok(q_max);
    }
    let (mut lo, mut hi) = (-q_max, q_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let err = voltage_at(mid)? - v_ref;
        if err.abs() <= tolerance {
            return Ok(mid);
        }
        if err > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Holds every PCC at `v_ref` through Gauss-Seidel rounds of per-site bisection.
pub struct ConstantPcc {
    pub v_ref: f64,
    pub tolerance: f64,
    pub max_rounds: usize,
    last: Vec<f64>,
}

impl ConstantPcc {
    pub fn new(v_ref: f64) -> Result<Self> {
        if !(0.95..=1.05).contains(&v_ref) {
            return Err(Error::Config(format!("PCC reference {v_ref} outside [0.95, 1.05]")));
        }
        Ok(Self {
            v_ref,
            tolerance: 1e-4,
            max_rounds: 20,
            last: Vec::new(),
        })
    }
}

impl VarController for ConstantPcc {
    fn name(&self) -> String {
        "constant-pcc".into()
    }

    fn reset(&mut self) {
        self.last.clear();
    }

    fn act(&mut self, env: &VoltVarEnv) -> Result<Action> {
        let n = env.site_count();
        let pos = site_positions(env);
        let mut q = if self.last.len() == n {
            self.last.clone()
        } else {
            vec![0.0; n]
        };
        let q_max = env.q_max_kvar();
        for _ in 0..self.max_rounds {
            for site in 0..n {
                q[site] = constant_pcc_control(env, &q, site, self.v_ref, self.tolerance)?;
            }
            let v = env.trial_flow(&q)?.magnitudes();
            let settled = (0..n).all(|i| {
                (v[pos[i]] - self.v_ref).abs() <= self.tolerance || q[i].abs() >= q_max[i]
            });
            if settled {
                break;
            }
        }
        self.last = q.clone();
        Ok(Action { q_kvar: q })
    }
}

fn site_positions(env: &VoltVarEnv) -> Vec<usize> {
    env.feeder()
        .model()
        .pv_positions()
        .into_iter()
        .map(|p| p.expect("validated feeder"))
        .collect()
}
