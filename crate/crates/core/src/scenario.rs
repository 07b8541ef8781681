//! Day-long load and PV availability profiles.
//!
//! PV availability is a clear-sky bell (zero outside 06:00–18:00, peak at
//! noon) multiplied by a two-state cloud process. Strong days switch often
//! between clear sky and deep shade; mild days see rare, shallow dips. Loads
//! follow a smooth diurnal curve with morning and evening peaks.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{BusId, NetworkModel, PvSite};
use crate::rng::{substream, Stream};
use crate::{Error, Result};

pub const SECONDS_PER_DAY: u32 = 86_400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fluctuation {
    Strong,
    Mild,
}

impl fmt::Display for Fluctuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fluctuation::Strong => "strong",
            Fluctuation::Mild => "mild",
        })
    }
}

impl FromStr for Fluctuation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(Fluctuation::Strong),
            "mild" => Ok(Fluctuation::Mild),
            other => Err(Error::Scenario(format!("unknown fluctuation mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScenarioLabel {
    Generated(Fluctuation),
    Custom,
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioLabel::Generated(mode) => mode.fmt(f),
            ScenarioLabel::Custom => f.write_str("custom"),
        }
    }
}

/// Parameters of the two-state cloud multiplier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudProcess {
    /// Mean sojourn in clear sky, seconds.
    pub mean_clear_s: f64,
    /// Mean sojourn under a cloud, seconds.
    pub mean_shade_s: f64,
    /// Range of the shaded multiplier target.
    pub depth: (f64, f64),
    /// Relaxation time constant of the multiplier, seconds.
    pub tau_s: f64,
}

impl CloudProcess {
    pub fn for_mode(mode: Fluctuation) -> Self {
        match mode {
            Fluctuation::Strong => Self {
                mean_clear_s: 600.0,
                mean_shade_s: 600.0,
                depth: (0.2, 0.4),
                tau_s: 60.0,
            },
            Fluctuation::Mild => Self {
                mean_clear_s: 7200.0,
                mean_shade_s: 480.0,
                depth: (0.8, 0.92),
                tau_s: 300.0,
            },
        }
    }

    /// Multiplier series in `[depth.0, 1]`, starting clear.
    pub fn sample(&self, steps: usize, dt: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let decay = (-dt / self.tau_s).exp();
        let p_cloud = (dt / self.mean_clear_s).min(1.0);
        let p_clear = (dt / self.mean_shade_s).min(1.0);
        let mut shaded = false;
        let mut target = 1.0;
        let mut m: f64 = 1.0;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let u: f64 = rng.random();
            let depth: f64 = rng.random_range(self.depth.0..=self.depth.1);
            if shaded && u < p_clear {
                shaded = false;
                target = 1.0;
            } else if !shaded && u < p_cloud {
                shaded = true;
                target = depth;
            }
            m = target + (m - target) * decay;
            out.push(m.clamp(self.depth.0, 1.0));
        }
        out
    }
}

fn check_dt(dt_s: u32) -> Result<usize> {
    if dt_s == 0 || !SECONDS_PER_DAY.is_multiple_of(dt_s) {
        return Err(Error::Scenario(format!(
            "control step {dt_s} s does not divide a day"
        )));
    }
    Ok((SECONDS_PER_DAY / dt_s) as usize)
}

/// Clear-sky availability fraction at `t_s` seconds after midnight.
pub fn clear_sky(t_s: f64) -> f64 {
    let hour = t_s / 3600.0;
    if !(6.0..=18.0).contains(&hour) {
        return 0.0;
    }
    (std::f64::consts::PI * (hour - 6.0) / 12.0).sin().max(0.0).powf(1.5)
}

/// Per-step, per-site available PV power (kW), `[step][site]`.
pub fn generate_pv_profile(
    mode: Fluctuation,
    sites: &[PvSite],
    dt_s: u32,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    generate_pv_profile_with(mode, sites, dt_s, seed, false)
}

/// As [`generate_pv_profile`]; with `per_site_clouds` every site draws its
/// own cloud process instead of sharing one.
pub fn generate_pv_profile_with(
    mode: Fluctuation,
    sites: &[PvSite],
    dt_s: u32,
    seed: u64,
    per_site_clouds: bool,
) -> Result<Vec<Vec<f64>>> {
    let steps = check_dt(dt_s)?;
    let dt = f64::from(dt_s);
    let clouds = CloudProcess::for_mode(mode);
    let mut rng = substream(seed, Stream::Pv);
    let multipliers: Vec<Vec<f64>> = if per_site_clouds {
        sites.iter().map(|_| clouds.sample(steps, dt, &mut rng)).collect()
    } else {
        vec![clouds.sample(steps, dt, &mut rng)]
    };
    Ok((0..steps)
        .map(|k| {
            let envelope = clear_sky(k as f64 * dt);
            sites
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let m = multipliers[if per_site_clouds { i } else { 0 }][k];
                    (s.p_max_kw * envelope * m).clamp(0.0, s.p_max_kw)
                })
                .collect()
        })
        .collect())
}

const LOAD_FLOOR: f64 = 0.6;
const LOAD_NOISE: f64 = 0.02;

fn raw_diurnal(hour: f64) -> f64 {
    let bump = |centre: f64, width: f64| {
        // wrapped distance so the curve is periodic over the day
        let d = (hour - centre + 36.0).rem_euclid(24.0) - 12.0;
        (-(d / width).powi(2)).exp()
    };
    0.8 * bump(8.5, 2.5) + bump(19.0, 3.0) + 0.9 * bump(13.5, 3.5)
}

/// Diurnal load multiplier in `[0.6, 1.0]`: minimum in the small hours,
/// a morning peak, a daytime plateau and a higher evening peak.
pub fn diurnal_load_factor(t_s: f64) -> f64 {
    // min/max of the raw curve on a fine grid, computed once
    static RANGE: std::sync::OnceLock<(f64, f64)> = std::sync::OnceLock::new();
    let (lo, hi) = *RANGE.get_or_init(|| {
        (0..86_400).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            let v = raw_diurnal(f64::from(s) / 3600.0);
            (lo.min(v), hi.max(v))
        })
    });
    let v = raw_diurnal(t_s / 3600.0);
    LOAD_FLOOR + (1.0 - LOAD_FLOOR) * ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadProfile {
    /// `[step][bus]`, kW.
    pub p_kw: Vec<Vec<f64>>,
    /// `[step][bus]`, kvar.
    pub q_kvar: Vec<Vec<f64>>,
}

/// Base-case loads scaled by [`diurnal_load_factor`] with ±2 % independent
/// noise per bus and step (same factor for P and Q).
pub fn generate_load_profile(model: &NetworkModel, dt_s: u32, seed: u64) -> Result<LoadProfile> {
    let steps = check_dt(dt_s)?;
    let mut rng = substream(seed, Stream::Load);
    let mut p_kw = Vec::with_capacity(steps);
    let mut q_kvar = Vec::with_capacity(steps);
    for k in 0..steps {
        let scale = diurnal_load_factor(k as f64 * f64::from(dt_s));
        let (p, q): (Vec<f64>, Vec<f64>) = model
            .buses
            .iter()
            .map(|b| {
                let f = scale * (1.0 + rng.random_range(-LOAD_NOISE..=LOAD_NOISE));
                (b.p_kw * f, b.q_kvar * f)
            })
            .unzip();
        p_kw.push(p);
        q_kvar.push(q);
    }
    Ok(LoadProfile { p_kw, q_kvar })
}

/// Exogenous inputs for one day at a fixed control step.
#[derive(Clone, Debug, PartialEq)]
pub struct DayScenario {
    pub dt_s: u32,
    pub label: ScenarioLabel,
    pub seed: u64,
    /// Bus ids, in the column order of the load series.
    pub buses: Vec<BusId>,
    /// PV site buses, in the column order of `pv_kw`.
    pub sites: Vec<BusId>,
    pub load_p_kw: Vec<Vec<f64>>,
    pub load_q_kvar: Vec<Vec<f64>>,
    /// Available PV power, `[step][site]`, kW.
    pub pv_kw: Vec<Vec<f64>>,
}

impl DayScenario {
    /// Loads and PV for `model` under `mode`, both drawn from `seed`.
    pub fn generate(model: &NetworkModel, mode: Fluctuation, dt_s: u32, seed: u64) -> Result<Self> {
        let loads = generate_load_profile(model, dt_s, seed)?;
        let pv_kw = generate_pv_profile(mode, &model.pv_sites, dt_s, seed)?;
        Ok(Self {
            dt_s,
            label: ScenarioLabel::Generated(mode),
            seed,
            buses: model.buses.iter().map(|b| b.id).collect(),
            sites: model.pv_sites.iter().map(|s| s.bus).collect(),
            load_p_kw: loads.p_kw,
            load_q_kvar: loads.q_kvar,
            pv_kw,
        })
    }

    pub fn steps(&self) -> usize {
        self.load_p_kw.len()
    }

    pub fn dt(&self) -> f64 {
        f64::from(self.dt_s)
    }

    /// Checks the series against each other and against `model`.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        let steps = self.steps();
        if self.dt_s == 0 {
            return Err(Error::Scenario("control step must be positive".into()));
        }
        let model_buses: Vec<_> = model.buses.iter().map(|b| b.id).collect();
        let model_sites: Vec<_> = model.pv_sites.iter().map(|s| s.bus).collect();
        if self.buses != model_buses {
            return Err(Error::Scenario("bus columns do not match the network".into()));
        }
        if self.sites != model_sites {
            return Err(Error::Scenario("PV columns do not match the network".into()));
        }
        if self.load_q_kvar.len() != steps || self.pv_kw.len() != steps {
            return Err(Error::Scenario(format!(
                "series length mismatch: {} load P, {} load Q, {} PV steps",
                steps,
                self.load_q_kvar.len(),
                self.pv_kw.len()
            )));
        }
        for k in 0..steps {
            if self.load_p_kw[k].len() != self.buses.len() || self.load_q_kvar[k].len() != self.buses.len() {
                return Err(Error::Scenario(format!("step {k}: load row has wrong width")));
            }
            if self.pv_kw[k].len() != self.sites.len() {
                return Err(Error::Scenario(format!("step {k}: PV row has wrong width")));
            }
            for (i, (&p, site)) in self.pv_kw[k].iter().zip(&model.pv_sites).enumerate() {
                if !(0.0..=site.p_max_kw).contains(&p) {
                    return Err(Error::Scenario(format!(
                        "PV site {i} (bus {}) at step {k}: availability {p} kW outside [0, {}]",
                        site.bus, site.p_max_kw
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the scenario CSV. The first line is a `#` comment carrying the
    /// label, seed and control step.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# label={} seed={} dt_sec={}", self.label, self.seed, self.dt_s)?;
        writeln!(out, "t_sec,bus_or_site,kind,p_kw,q_kvar")?;
        for k in 0..self.steps() {
            let t = k as u64 * u64::from(self.dt_s);
            for (j, bus) in self.buses.iter().enumerate() {
                writeln!(out, "{t},{bus},LOAD,{},{}", self.load_p_kw[k][j], self.load_q_kvar[k][j])?;
            }
            for (i, bus) in self.sites.iter().enumerate() {
                writeln!(out, "{t},{bus},PV,{},", self.pv_kw[k][i])?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Stable fingerprint of the scenario contents (hex SHA-256 of its CSV).
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        Sha256::digest(&buf)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Reads a scenario CSV for `model` and validates it.
pub fn load_scenario_csv(path: impl AsRef<Path>, model: &NetworkModel) -> Result<DayScenario> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    parse_scenario_csv(reader, path, model)
}

pub fn parse_scenario_csv(
    reader: impl BufRead,
    source: impl Into<PathBuf>,
    model: &NetworkModel,
) -> Result<DayScenario> {
    let source = source.into();
    let mut label = ScenarioLabel::Custom;
    let mut seed = 0;
    let mut declared_dt = None;

    let bus_col = model.bus_index_map();
    let site_col: std::collections::HashMap<BusId, usize> = model
        .pv_sites
        .iter()
        .enumerate()
        .map(|(i, s)| (s.bus, i))
        .collect();
    let nb = model.buses.len();
    let ns = model.pv_sites.len();

    let mut times: Vec<u64> = Vec::new();
    let mut load_p: Vec<Vec<f64>> = Vec::new();
    let mut load_q: Vec<Vec<f64>> = Vec::new();
    let mut pv: Vec<Vec<f64>> = Vec::new();
    let mut filled: Vec<(Vec<bool>, Vec<bool>)> = Vec::new();
    let mut header_seen = false;

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i as u64 + 1;
        let err = |message: String| Error::Parse {
            path: source.clone(),
            line: line_no,
            message,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("label", "strong")) => label = ScenarioLabel::Generated(Fluctuation::Strong),
                    Some(("label", "mild")) => label = ScenarioLabel::Generated(Fluctuation::Mild),
                    Some(("seed", v)) => seed = v.parse().map_err(|_| err(format!("bad seed `{v}`")))?,
                    Some(("dt_sec", v)) => {
                        declared_dt = Some(v.parse::<u32>().map_err(|_| err(format!("bad dt `{v}`")))?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if !header_seen {
            if fields != ["t_sec", "bus_or_site", "kind", "p_kw", "q_kvar"] {
                return Err(err("expected header `t_sec,bus_or_site,kind,p_kw,q_kvar`".into()));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 5 {
            return Err(err(format!("row has {} fields, expected 5", fields.len())));
        }
        let t: u64 = fields[0]
            .parse()
            .map_err(|_| err(format!("bad t_sec `{}`", fields[0])))?;
        let bus: BusId = fields[1]
            .parse()
            .map_err(|_| err(format!("bad bus `{}`", fields[1])))?;
        let p: f64 = fields[3]
            .parse()
            .map_err(|_| err(format!("bad p_kw `{}`", fields[3])))?;
        if times.last() != Some(&t) {
            if times.last().is_some_and(|&last| t < last) {
                return Err(err(format!("rows not sorted by t_sec ({t} after {})", times.last().unwrap())));
            }
            times.push(t);
            load_p.push(vec![0.0; nb]);
            load_q.push(vec![0.0; nb]);
            pv.push(vec![0.0; ns]);
            filled.push((vec![false; nb], vec![false; ns]));
        }
        let k = times.len() - 1;
        match fields[2] {
            "LOAD" => {
                let col = *bus_col
                    .get(&bus)
                    .ok_or_else(|| err(format!("unknown bus {bus}")))?;
                let q: f64 = fields[4]
                    .parse()
                    .map_err(|_| err(format!("bad q_kvar `{}`", fields[4])))?;
                if filled[k].0[col] {
                    return Err(err(format!("duplicate LOAD row for bus {bus} at t={t}")));
                }
                load_p[k][col] = p;
                load_q[k][col] = q;
                filled[k].0[col] = true;
            }
            "PV" => {
                let col = *site_col
                    .get(&bus)
                    .ok_or_else(|| err(format!("no PV site at bus {bus}")))?;
                if !fields[4].is_empty() {
                    return Err(err("PV rows leave q_kvar empty".into()));
                }
                if filled[k].1[col] {
                    return Err(err(format!("duplicate PV row for bus {bus} at t={t}")));
                }
                pv[k][col] = p;
                filled[k].1[col] = true;
            }
            other => return Err(err(format!("unknown kind `{other}`"))),
        }
    }

    if times.is_empty() {
        return Err(Error::Scenario(format!("{}: no data rows", source.display())));
    }
    for (k, (loads, sites)) in filled.iter().enumerate() {
        if let Some(col) = loads.iter().position(|f| !f) {
            return Err(Error::Scenario(format!(
                "series length mismatch: no LOAD row for bus {} at t={}",
                model.buses[col].id, times[k]
            )));
        }
        if let Some(col) = sites.iter().position(|f| !f) {
            return Err(Error::Scenario(format!(
                "series length mismatch: no PV row for site at bus {} at t={}",
                model.pv_sites[col].bus, times[k]
            )));
        }
    }
    let dt = match (declared_dt, times.get(1)) {
        (Some(dt), _) => dt,
        (None, Some(&t1)) => u32::try_from(t1 - times[0])
            .map_err(|_| Error::Scenario("control step too large".into()))?,
        (None, None) => SECONDS_PER_DAY,
    };
    for (k, &t) in times.iter().enumerate() {
        if t != k as u64 * u64::from(dt) {
            return Err(Error::Scenario(format!(
                "t_sec {t} is not step {k} of a {dt} s grid"
            )));
        }
    }

    let scenario = DayScenario {
        dt_s: dt,
        label,
        seed,
        buses: model.buses.iter().map(|b| b.id).collect(),
        sites: model.pv_sites.iter().map(|s| s.bus).collect(),
        load_p_kw: load_p,
        load_q_kvar: load_q,
        pv_kw: pv,
    };
    scenario.validate(model)?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ieee33::{default_pv_sites, ieee33};

    fn total_variation(series: &[Vec<f64>], site: usize) -> f64 {
        series.windows(2).map(|w| (w[1][site] - w[0][site]).abs()).sum()
    }

    #[test]
    fn night_is_dark() {
        for mode in [Fluctuation::Strong, Fluctuation::Mild] {
            let pv = generate_pv_profile(mode, &default_pv_sites(), 60, 3).unwrap();
            assert_eq!(pv.len(), 1440);
            assert!(pv[0].iter().all(|&p| p == 0.0));
            assert!(pv[5 * 60].iter().all(|&p| p == 0.0));
            assert!(pv[19 * 60].iter().all(|&p| p == 0.0));
        }
    }

    #[test]
    fn mild_peaks_near_rating_and_varies_less() {
        let sites = default_pv_sites();
        let mild = generate_pv_profile(Fluctuation::Mild, &sites, 60, 1).unwrap();
        let strong = generate_pv_profile(Fluctuation::Strong, &sites, 60, 1).unwrap();
        for (i, s) in sites.iter().enumerate() {
            let max = mild.iter().map(|r| r[i]).fold(0.0, f64::max);
            assert!(max <= s.p_max_kw && max >= 0.95 * s.p_max_kw, "site {i} max {max}");
            assert!(total_variation(&mild, i) < total_variation(&strong, i));
        }
    }

    #[test]
    fn strong_mode_outruns_quarter_hour_averages() {
        let sites = default_pv_sites();
        let pv = generate_pv_profile(Fluctuation::Strong, &sites, 60, 1).unwrap();
        let site = 2;
        let mut worst: f64 = 0.0;
        for block in pv.chunks(15) {
            let mean = block.iter().map(|r| r[site]).sum::<f64>() / block.len() as f64;
            for r in block {
                worst = worst.max((r[site] - mean).abs());
            }
        }
        assert!(worst >= 0.1 * sites[site].p_max_kw, "largest gap {worst}");
    }

    #[test]
    fn rejects_step_not_dividing_day() {
        assert!(generate_pv_profile(Fluctuation::Mild, &default_pv_sites(), 7, 1).is_err());
        assert!(generate_load_profile(&ieee33(), 0, 1).is_err());
    }

    #[test]
    fn load_profile_bounds_and_determinism() {
        let model = ieee33();
        let a = generate_load_profile(&model, 60, 9).unwrap();
        let b = generate_load_profile(&model, 60, 9).unwrap();
        assert_eq!(a, b);
        let base = model.total_load().re;
        for row in &a.p_kw {
            let total: f64 = row.iter().sum();
            assert!(total >= 0.58 * base && total <= 1.02 * base);
        }
        // at the curve minimum every bus sits within the noise band of 0.6 × base
        let k_min = (0..1440)
            .min_by(|&i, &j| {
                diurnal_load_factor(i as f64 * 60.0).total_cmp(&diurnal_load_factor(j as f64 * 60.0))
            })
            .unwrap();
        assert!((diurnal_load_factor(k_min as f64 * 60.0) - 0.6).abs() < 1e-6);
        for (bus, p) in model.buses.iter().zip(&a.p_kw[k_min]) {
            assert!((p - 0.6 * bus.p_kw).abs() <= 0.6 * bus.p_kw * 0.02 + 1e-9);
        }
    }

    #[test]
    fn diurnal_curve_spans_range() {
        let values: Vec<f64> = (0..1440).map(|k| diurnal_load_factor(k as f64 * 60.0)).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - 0.6).abs() < 1e-4 && (hi - 1.0).abs() < 1e-4);
    }
}
