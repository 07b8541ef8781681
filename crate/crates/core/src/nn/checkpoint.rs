//! Flat text checkpoints: one header line, `key value` metadata lines, then
//! named arrays as `tensor NAME ROWS COLS` followed by one line of values.
//! Values use Rust's shortest round-trip formatting, so a write/read cycle is
//! bit-exact.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::layers::Parameters;
use super::tensor::Tensor;
use crate::{Error, Result};

const HEADER: &str = "softcoord-checkpoint 1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Adds every tensor of `p` under `prefix.name`.
    pub fn add_params(&mut self, prefix: &str, p: &dyn Parameters) {
        for (name, t) in p.names().into_iter().zip(p.tensors()) {
            self.tensors.push((format!("{prefix}.{name}"), t.clone()));
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Copies the stored `prefix.*` tensors into `p`; shapes must match.
    pub fn load_params(&self, prefix: &str, p: &mut dyn Parameters) -> Result<()> {
        let names = p.names();
        for (name, slot) in names.into_iter().zip(p.tensors_mut()) {
            let key = format!("{prefix}.{name}");
            let t = self
                .tensor(&key)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {key}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Checkpoint(format!(
                    "{key}: stored {:?}, expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.clone();
        }
        Ok(())
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{HEADER}")?;
        for (k, v) in &self.meta {
            if k.contains(char::is_whitespace) || v.contains('\n') {
                return Err(Error::Checkpoint(format!("unwritable metadata key {k:?}")));
            }
            writeln!(out, "meta {k} {v}")?;
        }
        for (name, t) in &self.tensors {
            writeln!(out, "tensor {name} {} {}", t.rows(), t.cols())?;
            let mut line = String::with_capacity(t.len() * 20);
            for (i, x) in t.data().iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&x.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read(input: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(input).lines().enumerate();
        let bad = |n: usize, msg: String| Error::Checkpoint(format!("line {}: {msg}", n + 1));
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == HEADER => {}
            _ => return Err(Error::Checkpoint("missing checkpoint header".into())),
        }
        let mut ck = Checkpoint::new();
        while let Some((n, line)) = lines.next() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ' ');
            match parts.next() {
                Some("meta") => {
                    let rest = parts.next().unwrap_or("");
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    ck.meta.push((k.to_string(), v.to_string()));
                }
                Some("tensor") => {
                    let fields: Vec<&str> = parts.next().unwrap_or("").split_whitespace().collect();
                    if fields.len() != 3 {
                        return Err(bad(n, "expected `tensor NAME ROWS COLS`".into()));
                    }
                    let rows: usize = fields[1].parse().map_err(|e| bad(n, format!("rows: {e}")))?;
                    let cols: usize = fields[2].parse().map_err(|e| bad(n, format!("cols: {e}")))?;
                    let (m, values) = lines
                        .next()
                        .ok_or_else(|| bad(n, format!("no values for {}", fields[0])))?;
                    let values = values?;
                    let data = values
                        .split_whitespace()
                        .map(|s| s.parse::<f64>().map_err(|e| bad(m, format!("{e}: {s:?}"))))
                        .collect::<Result<Vec<_>>>()?;
                    let t = Tensor::new(rows, cols, data).map_err(|e| bad(m, e.to_string()))?;
                    ck.tensors.push((fields[0].to_string(), t));
                }
                _ => return Err(bad(n, format!("unrecognised record {line:?}"))),
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            self.write(&mut f)?;
            f.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::read(f)
    }
}
