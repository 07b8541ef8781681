//! The 33-bus radial distribution feeder with seven PV inverters.

use super::{parse_network_csv, NetworkModel, PvSite};
use crate::Result;

/// Line and load data of the standard 33-bus feeder (12.66 kV), bundled.
pub const IEEE33_CSV: &str = include_str!("../../data/ieee33.csv");

/// Bus of the worst-case voltage in the base case (end of the main trunk).
pub const REMOTE_BUS: usize = 18;

/// The seven inverter sites; Var capability is 40 % of the active rating.
pub fn default_pv_sites() -> Vec<PvSite> {
    [
        (9, 600.0),
        (12, 600.0),
        (15, 1000.0),
        (21, 400.0),
        (24, 400.0),
        (29, 600.0),
        (32, 1000.0),
    ]
    .into_iter()
    .map(|(bus, p_max)| PvSite::new(bus, p_max, 0.4 * p_max))
    .collect()
}

/// Builds the 33-bus feeder with `pv_table` attached.
///
/// Fails on a duplicated PV bus or a bus outside the feeder.
pub fn build_ieee33(pv_table: &[PvSite]) -> Result<NetworkModel> {
    let base = parse_network_csv(IEEE33_CSV.as_bytes(), "ieee33.csv")?;
    base.with_pv_sites(pv_table)
}

/// [`build_ieee33`] with [`default_pv_sites`].
pub fn ieee33() -> NetworkModel {
    build_ieee33(&default_pv_sites()).expect("bundled feeder data is well-formed")
}
