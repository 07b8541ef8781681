//! Sectioned network CSV.
//!
//! ```text
//! BASE,v_kv,s_mva,v_slack_pu        (optional; defaults 12.66, 1.0, 1.0)
//! BASE,12.66,1.0,1.0
//! BUS,id,p_kw,q_kvar
//! BUS,1,0,0
//! LINE,from,to,r_ohm,x_ohm
//! LINE,1,2,0.0922,0.0470
//! PV,bus,p_max_kw,q_max_kvar
//! PV,9,600,240
//! ```
//!
//! Every section starts with its header row. Lines starting with `#` are
//! comments. The first bus listed is the feeder-side terminal of the OLTC.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{Bus, Line, NetworkModel, PvSite, TapChanger};
use crate::{Error, Result};

const BUS_HEADER: [&str; 4] = ["BUS", "id", "p_kw", "q_kvar"];
const LINE_HEADER: [&str; 5] = ["LINE", "from", "to", "r_ohm", "x_ohm"];
const PV_HEADER: [&str; 4] = ["PV", "bus", "p_max_kw", "q_max_kvar"];
const BASE_HEADER: [&str; 4] = ["BASE", "v_kv", "s_mva", "v_slack_pu"];

pub fn read_network_csv(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_network_csv(file, path)
}

pub fn parse_network_csv(reader: impl Read, source: impl Into<PathBuf>) -> Result<NetworkModel> {
    let source = source.into();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut buses = Vec::new();
    let mut lines = Vec::new();
    let mut pv_sites = Vec::new();
    let mut base = (12.66, 1.0, 1.0);
    let mut headers_seen: Vec<&'static str> = Vec::new();

    for record in rdr.records() {
        let record = record?;
        let line_no = record.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse {
            path: source.clone(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = record.iter().collect();
        let Some(&kind) = fields.first() else {
            continue;
        };
        let (header, arity): (&[&str], usize) = match kind {
            "BUS" => (&BUS_HEADER, 4),
            "LINE" => (&LINE_HEADER, 5),
            "PV" => (&PV_HEADER, 4),
            "BASE" => (&BASE_HEADER, 4),
            other => return Err(err(format!("unknown record kind `{other}`"))),
        };
        if fields.len() != arity {
            return Err(err(format!(
                "{kind} row has {} fields, expected {arity}",
                fields.len()
            )));
        }
        if fields[1..] == header[1..] {
            headers_seen.push(header[0]);
            continue;
        }
        if !headers_seen.contains(&header[0]) {
            return Err(err(format!(
                "{kind} row before its header `{}`",
                header.join(",")
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| err(format!("field `{}` is not a number: `{}`", header[i], fields[i])))
        };
        let id = |i: usize| -> Result<usize> {
            fields[i]
                .parse::<usize>()
                .map_err(|_| err(format!("field `{}` is not a bus id: `{}`", header[i], fields[i])))
        };
        match kind {
            "BUS" => buses.push(Bus {
                id: id(1)?,
                p_kw: num(2)?,
                q_kvar: num(3)?,
            }),
            "LINE" => lines.push(Line {
                from: id(1)?,
                to: id(2)?,
                r_ohm: num(3)?,
                x_ohm: num(4)?,
            }),
            "PV" => pv_sites.push(PvSite {
                bus: id(1)?,
                p_max_kw: num(2)?,
                q_max_kvar: num(3)?,
            }),
            _ => base = (num(1)?, num(2)?, num(3)?),
        }
    }

    let feeder_bus = buses.first().map(|b: &Bus| b.id).ok_or_else(|| Error::Parse {
        path: source.clone(),
        line: 0,
        message: "no BUS rows".into(),
    })?;
    Ok(NetworkModel {
        buses,
        lines,
        pv_sites,
        v_base_kv: base.0,
        s_base_mva: base.1,
        v_slack_pu: base.2,
        tap: TapChanger {
            feeder_bus,
            ..TapChanger::default()
        },
    })
}

pub fn write_network_csv(model: &NetworkModel, mut out: impl Write) -> Result<()> {
    writeln!(out, "{}", BASE_HEADER.join(","))?;
    writeln!(
        out,
        "BASE,{},{},{}",
        model.v_base_kv, model.s_base_mva, model.v_slack_pu
    )?;
    // the feeder bus goes first so it is read back as the root
    let root = model.bus_index(model.tap.feeder_bus).unwrap_or(0);
    writeln!(out, "{}", BUS_HEADER.join(","))?;
    let ordered = model
        .buses
        .get(root)
        .into_iter()
        .chain(model.buses.iter().enumerate().filter(|(i, _)| *i != root).map(|(_, b)| b));
    for b in ordered {
        writeln!(out, "BUS,{},{},{}", b.id, b.p_kw, b.q_kvar)?;
    }
    writeln!(out, "{}", LINE_HEADER.join(","))?;
    for l in &model.lines {
        writeln!(out, "LINE,{},{},{},{}", l.from, l.to, l.r_ohm, l.x_ohm)?;
    }
    if !model.pv_sites.is_empty() {
        writeln!(out, "{}", PV_HEADER.join(","))?;
        for s in &model.pv_sites {
            writeln!(out, "PV,{},{},{}", s.bus, s.p_max_kw, s.q_max_kvar)?;
        }
    }
    Ok(())
}
