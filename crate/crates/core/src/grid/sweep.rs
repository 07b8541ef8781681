use std::collections::VecDeque;

use num_complex::Complex64;

use super::{validate_network, Injections, NetworkModel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Largest per-bus voltage change between sweeps accepted as converged, p.u.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 100,
        }
    }
}

/// A validated feeder with its tree orientation and per-unit impedances
/// precomputed. Immutable and cheap to share between threads.
#[derive(Clone, Debug)]
pub struct Feeder {
    model: NetworkModel,
    root: usize,
    /// Bus positions in breadth-first order from the root.
    order: Vec<usize>,
    /// For each bus position: (upstream bus position, line index).
    upstream: Vec<Option<(usize, usize)>>,
    z_pu: Vec<Complex64>,
    /// Whether each line is listed in the downstream direction.
    forward: Vec<bool>,
}

impl Feeder {
    pub fn new(model: NetworkModel) -> Result<Self> {
        let report = validate_network(&model);
        if !report.is_empty() {
            return Err(Error::InvalidNetwork(
                report.iter().map(ToString::to_string).collect(),
            ));
        }
        let index = model.bus_index_map();
        let n = model.buses.len();
        let root = index[&model.tap.feeder_bus];
        let mut adjacency = vec![Vec::new(); n];
        for (k, line) in model.lines.iter().enumerate() {
            let (a, b) = (index[&line.from], index[&line.to]);
            adjacency[a].push((b, k));
            adjacency[b].push((a, k));
        }
        let mut order = Vec::with_capacity(n);
        let mut upstream = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(k) = queue.pop_front() {
            order.push(k);
            for &(next, line) in &adjacency[k] {
                if !seen[next] {
                    seen[next] = true;
                    upstream[next] = Some((k, line));
                    queue.push_back(next);
                }
            }
        }
        let z_base = model.z_base_ohm();
        let z_pu = model
            .lines
            .iter()
            .map(|l| Complex64::new(l.r_ohm / z_base, l.x_ohm / z_base))
            .collect();
        let forward = model
            .lines
            .iter()
            .enumerate()
            .map(|(k, l)| upstream[index[&l.to]].map(|(_, line)| line) == Some(k))
            .collect();
        Ok(Self {
            model,
            root,
            order,
            upstream,
            z_pu,
            forward,
        })
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn bus_count(&self) -> usize {
        self.model.buses.len()
    }

    /// Position of the feeder-side transformer bus.
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn line_impedance_pu(&self, line: usize) -> Complex64 {
        self.z_pu[line]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerFlowResult {
    /// Complex bus voltages, p.u., in model bus order.
    pub voltages: Vec<Complex64>,
    /// Complex line currents, p.u., positive in the listed from→to direction.
    pub line_currents: Vec<Complex64>,
    /// Σ |I|²·R over all lines, p.u. on the system power base.
    pub loss_pu: f64,
    /// Voltage at the transformer's feeder-side terminal.
    pub v0: Complex64,
    /// Current from the transformer into the feeder; negative real part under
    /// reverse power flow.
    pub i0: Complex64,
    pub iterations: usize,
    pub converged: bool,
    /// Last per-bus voltage update, p.u.
    pub mismatch: f64,
}

impl PowerFlowResult {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.voltages.iter().map(|v| v.norm()).collect()
    }

    pub fn vmin(&self) -> f64 {
        self.voltages
            .iter()
            .map(|v| v.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn vmax(&self) -> f64 {
        self.voltages
            .iter()
            .map(|v| v.norm())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Complex power delivered by the transformer into the feeder, p.u.
    pub fn source_power_pu(&self) -> Complex64 {
        self.v0 * self.i0.conj()
    }
}

/// Backward/forward sweep on the radial tree.
///
/// Loads are constant power. Each iteration computes nodal currents from the
/// present voltages, accumulates branch currents from the leaves up, then
/// walks down from the source updating voltages. The source voltage is
/// `v_slack · (1 + step · tap)`.
///
/// Non-convergence is reported through `converged = false` with the last
/// iterate; only a non-finite intermediate is an error.
pub fn solve_power_flow(
    feeder: &Feeder,
    inj: &Injections,
    opts: &SolverOptions,
) -> Result<PowerFlowResult> {
    let n = feeder.bus_count();
    if inj.p_kw.len() != n || inj.q_kvar.len() != n {
        return Err(Error::Shape(format!(
            "injections sized {}/{} for a {n}-bus feeder",
            inj.p_kw.len(),
            inj.q_kvar.len()
        )));
    }
    let model = &feeder.model;
    if !model.tap.contains(inj.tap) {
        return Err(Error::Shape(format!(
            "tap {} outside [{}, {}]",
            inj.tap, model.tap.tap_min, model.tap.tap_max
        )));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::Shape("solver tolerance must be positive".into()));
    }

    let kw = model.kw_per_pu();
    let demand: Vec<Complex64> = inj
        .p_kw
        .iter()
        .zip(&inj.q_kvar)
        .map(|(p, q)| Complex64::new(p / kw, q / kw))
        .collect();
    if demand.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
        return Err(Error::NonFinite("injections"));
    }

    let v_source = Complex64::new(model.v_slack_pu * model.tap.ratio(inj.tap), 0.0);
    let mut voltages = vec![v_source; n];
    let mut node_current = vec![Complex64::new(0.0, 0.0); n];
    let mut branch = vec![Complex64::new(0.0, 0.0); model.lines.len()];

    let backward = |voltages: &[Complex64],
                    node_current: &mut [Complex64],
                    branch: &mut [Complex64]| {
        for k in 0..n {
            node_current[k] = (demand[k] / voltages[k]).conj();
        }
        for &k in feeder.order.iter().rev() {
            if let Some((up, line)) = feeder.upstream[k] {
                branch[line] = node_current[k];
                let carried = node_current[k];
                node_current[up] += carried;
            }
        }
    };

    let mut iterations = 0;
    let mut mismatch = f64::INFINITY;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        backward(&voltages, &mut node_current, &mut branch);
        mismatch = 0.0;
        for &k in &feeder.order[1..] {
            let (up, line) = feeder.upstream[k].expect("non-root bus has a parent");
            let updated = voltages[up] - feeder.z_pu[line] * branch[line];
            mismatch = mismatch.max((updated - voltages[k]).norm());
            voltages[k] = updated;
        }
        if !mismatch.is_finite() {
            return Err(Error::NonFinite("forward sweep"));
        }
        if mismatch <= opts.tolerance {
            converged = true;
            break;
        }
    }
    // currents consistent with the final voltages
    backward(&voltages, &mut node_current, &mut branch);
    let i0 = node_current[feeder.root];
    if !(i0.re.is_finite() && i0.im.is_finite()) {
        return Err(Error::NonFinite("backward sweep"));
    }

    let loss_pu = branch
        .iter()
        .zip(&feeder.z_pu)
        .map(|(i, z)| i.norm_sqr() * z.re)
        .sum();
    let line_currents = branch
        .iter()
        .enumerate()
        .map(|(l, &i)| if feeder.forward[l] { i } else { -i })
        .collect();

    Ok(PowerFlowResult {
        v0: voltages[feeder.root],
        voltages,
        line_currents,
        loss_pu,
        i0,
        iterations,
        converged,
        mismatch,
    })
}
