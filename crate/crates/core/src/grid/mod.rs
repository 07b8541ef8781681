//! Radial feeder model and steady-state power flow.
//!
//! Quantities are stored in engineering units (kW, kvar, ohm) in
//! [`NetworkModel`] and converted to per-unit on the model's bases inside the
//! solver. The substation OLTC is modelled as an ideal ratio between an infinite
//! source and the feeder-side bus (`TapChanger::feeder_bus`).

mod io;
mod sweep;
mod validate;

pub mod ieee33;

use std::collections::HashMap;

use num_complex::Complex64;

pub use io::{parse_network_csv, read_network_csv, write_network_csv};
pub use sweep::{solve_power_flow, Feeder, PowerFlowResult, SolverOptions};
pub use validate::{validate_network, Diagnostic};

pub type BusId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// Base-case active load, kW.
    pub p_kw: f64,
    /// Base-case reactive load, kvar.
    pub q_kvar: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PvSite {
    pub bus: BusId,
    pub p_max_kw: f64,
    pub q_max_kvar: f64,
}

impl PvSite {
    pub fn new(bus: BusId, p_max_kw: f64, q_max_kvar: f64) -> Self {
        Self {
            bus,
            p_max_kw,
            q_max_kvar,
        }
    }
}

/// Where the tap ratio acts and how far it can move.
#[derive(Clone, Debug, PartialEq)]
pub struct TapChanger {
    /// Feeder-side terminal of the transformer; root of the radial tree.
    pub feeder_bus: BusId,
    /// Ratio change per tap step (p.u.).
    pub step: f64,
    pub tap_min: i32,
    pub tap_max: i32,
}

impl TapChanger {
    pub fn ratio(&self, tap: i32) -> f64 {
        1.0 + self.step * f64::from(tap)
    }

    pub fn contains(&self, tap: i32) -> bool {
        (self.tap_min..=self.tap_max).contains(&tap)
    }
}

impl Default for TapChanger {
    fn default() -> Self {
        Self {
            feeder_bus: 1,
            step: 0.00625,
            tap_min: -8,
            tap_max: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub pv_sites: Vec<PvSite>,
    pub v_base_kv: f64,
    pub s_base_mva: f64,
    pub v_slack_pu: f64,
    pub tap: TapChanger,
}

impl NetworkModel {
    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub(crate) fn bus_index_map(&self) -> HashMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn z_base_ohm(&self) -> f64 {
        self.v_base_kv * self.v_base_kv / self.s_base_mva
    }

    /// kW or kvar per unit of system power base.
    pub fn kw_per_pu(&self) -> f64 {
        self.s_base_mva * 1000.0
    }

    /// Total base-case load as a complex power in kW + j kvar.
    pub fn total_load(&self) -> Complex64 {
        self.buses
            .iter()
            .map(|b| Complex64::new(b.p_kw, b.q_kvar))
            .sum()
    }

    /// Positions (into `buses`) of every PV site, in site order.
    pub fn pv_positions(&self) -> Vec<Option<usize>> {
        self.pv_sites.iter().map(|s| self.bus_index(s.bus)).collect()
    }

    pub fn with_pv_sites(mut self, sites: &[PvSite]) -> crate::Result<Self> {
        let mut seen = Vec::with_capacity(sites.len());
        for site in sites {
            if self.bus_index(site.bus).is_none() {
                return Err(crate::Error::PvBusOutOfRange(site.bus));
            }
            if seen.contains(&site.bus) {
                return Err(crate::Error::DuplicatePvBus(site.bus));
            }
            seen.push(site.bus);
        }
        self.pv_sites = sites.to_vec();
        Ok(self)
    }
}

/// Net nodal injections handed to the solver: load minus PV, per bus, plus
/// the tap position.
#[derive(Clone, Debug, PartialEq)]
pub struct Injections {
    /// Net active demand per bus, kW (load − PV output).
    pub p_kw: Vec<f64>,
    /// Net reactive demand per bus, kvar (load − inverter Var).
    pub q_kvar: Vec<f64>,
    pub tap: i32,
}

impl Injections {
    pub fn zero(bus_count: usize) -> Self {
        Self {
            p_kw: vec![0.0; bus_count],
            q_kvar: vec![0.0; bus_count],
            tap: 0,
        }
    }

    /// Base-case loads, no PV, tap 0.
    pub fn base_case(model: &NetworkModel) -> Self {
        Self {
            p_kw: model.buses.iter().map(|b| b.p_kw).collect(),
            q_kvar: model.buses.iter().map(|b| b.q_kvar).collect(),
            tap: 0,
        }
    }

    pub fn with_tap(mut self, tap: i32) -> Self {
        self.tap = tap;
        self
    }
}
