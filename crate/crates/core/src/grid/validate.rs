use std::collections::VecDeque;
use std::fmt;

use super::{BusId, NetworkModel};

/// A violated structural invariant of a radial feeder.
#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    DuplicateBus(BusId),
    MissingRoot(BusId),
    UnknownBus { line: usize, bus: BusId },
    SelfLoop { line: usize },
    CycleDetected { line: usize, from: BusId, to: BusId },
    DisconnectedBus(BusId),
    NegativeImpedance { line: usize },
    NonFiniteValue(String),
    NonPositiveBase,
    PvSiteUnknownBus(BusId),
    DuplicatePvSite(BusId),
    InvalidTapRange,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateBus(id) => write!(f, "duplicate bus {id}"),
            Diagnostic::MissingRoot(id) => write!(f, "feeder bus {id} is not in the bus list"),
            Diagnostic::UnknownBus { line, bus } => {
                write!(f, "line {line} references unknown bus {bus}")
            }
            Diagnostic::SelfLoop { line } => write!(f, "line {line} connects a bus to itself"),
            Diagnostic::CycleDetected { line, from, to } => {
                write!(f, "cycle detected: line {line} ({from}-{to}) closes a loop")
            }
            Diagnostic::DisconnectedBus(id) => write!(f, "disconnected bus {id}"),
            Diagnostic::NegativeImpedance { line } => {
                write!(f, "negative impedance on line {line}")
            }
            Diagnostic::NonFiniteValue(what) => write!(f, "non-finite value in {what}"),
            Diagnostic::NonPositiveBase => write!(f, "voltage and power bases must be positive"),
            Diagnostic::PvSiteUnknownBus(id) => write!(f, "PV site at unknown bus {id}"),
            Diagnostic::DuplicatePvSite(id) => write!(f, "duplicate PV site at bus {id}"),
            Diagnostic::InvalidTapRange => write!(f, "tap range must satisfy tap_min <= 0 <= tap_max, tap_min < tap_max"),
        }
    }
}

/// Checks that `model` is a well-formed radial feeder. An empty report means
/// the model can be handed to [`super::Feeder::new`].
pub fn validate_network(model: &NetworkModel) -> Vec<Diagnostic> {
    let mut report = Vec::new();
    let n = model.buses.len();

    if !(model.v_base_kv > 0.0 && model.s_base_mva > 0.0 && model.v_slack_pu > 0.0) {
        report.push(Diagnostic::NonPositiveBase);
    }
    let tap = &model.tap;
    if !(tap.tap_min < tap.tap_max && tap.tap_min <= 0 && tap.tap_max >= 0)
        || !tap.step.is_finite()
    {
        report.push(Diagnostic::InvalidTapRange);
    }

    let mut index = std::collections::HashMap::with_capacity(n);
    for (i, bus) in model.buses.iter().enumerate() {
        if index.insert(bus.id, i).is_some() {
            report.push(Diagnostic::DuplicateBus(bus.id));
        }
        if !(bus.p_kw.is_finite() && bus.q_kvar.is_finite()) {
            report.push(Diagnostic::NonFiniteValue(format!("load of bus {}", bus.id)));
        }
    }

    let root = index.get(&model.tap.feeder_bus).copied();
    if root.is_none() {
        report.push(Diagnostic::MissingRoot(model.tap.feeder_bus));
    }

    // union-find for cycles, adjacency for reachability
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut adjacency = vec![Vec::new(); n];
    for (k, line) in model.lines.iter().enumerate() {
        if !(line.r_ohm.is_finite() && line.x_ohm.is_finite()) {
            report.push(Diagnostic::NonFiniteValue(format!("impedance of line {k}")));
        } else if line.r_ohm < 0.0 || line.x_ohm < 0.0 {
            report.push(Diagnostic::NegativeImpedance { line: k });
        }
        let (Some(&a), Some(&b)) = (index.get(&line.from), index.get(&line.to)) else {
            for bus in [line.from, line.to] {
                if !index.contains_key(&bus) {
                    report.push(Diagnostic::UnknownBus { line: k, bus });
                }
            }
            continue;
        };
        if a == b {
            report.push(Diagnostic::SelfLoop { line: k });
            continue;
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            report.push(Diagnostic::CycleDetected {
                line: k,
                from: line.from,
                to: line.to,
            });
        } else {
            parent[ra] = rb;
        }
        adjacency[a].push(b);
        adjacency[b].push(a);
    }

    if let Some(root) = root {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(k) = queue.pop_front() {
            for &next in &adjacency[k] {
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        for (i, reached) in seen.iter().enumerate() {
            if !reached {
                report.push(Diagnostic::DisconnectedBus(model.buses[i].id));
            }
        }
    }

    let mut pv_seen = Vec::new();
    for site in &model.pv_sites {
        if !index.contains_key(&site.bus) {
            report.push(Diagnostic::PvSiteUnknownBus(site.bus));
        }
        if pv_seen.contains(&site.bus) {
            report.push(Diagnostic::DuplicatePvSite(site.bus));
        }
        pv_seen.push(site.bus);
        if !(site.p_max_kw.is_finite() && site.q_max_kvar.is_finite())
            || site.p_max_kw < 0.0
            || site.q_max_kvar < 0.0
        {
            report.push(Diagnostic::NonFiniteValue(format!(
                "rating of PV site at bus {}",
                site.bus
            )));
        }
    }

    report
}
