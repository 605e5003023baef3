//! CSV tables with `#`-prefixed metadata lines ahead of the header row.

use std::path::{Path, PathBuf};

use tdqmc_core::entanglement::DensityMatrix;

use crate::{CliError, Result};

/// Shortest round-trip form (exponent for very small or large values), so
/// equal numbers print identically.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), ..Self::default() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_bytes(&self, manifest_hash: &str) -> Result<Vec<u8>> {
        let mut out = format!("# manifest: {manifest_hash}\n");
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(out.into_bytes());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn write(&self, dir: &Path, name: &str, manifest_hash: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, self.to_bytes(manifest_hash)?)?;
        Ok(path)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// ρ(x, x') as long-format rows.
pub fn rdm_table(rho: &DensityMatrix) -> Table {
    let g = rho.grid();
    let mut t = Table::new(&["x", "x_prime", "re", "im"]);
    for a in 0..rho.len() {
        for b in 0..rho.len() {
            let v = rho.get(a, b);
            t.row(vec![num(g.x(a)), num(g.x(b)), num(v.re), num(v.im)]);
        }
    }
    t
}

/// Reads a CSV written by [`Table`], returning metadata and records.
pub fn read_table(path: &Path) -> Result<(Vec<(String, String)>, Vec<csv::StringRecord>)> {
    let text = std::fs::read_to_string(path)?;
    let mut meta = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix("# ") {
            Some(m) => {
                let (k, v) = m.split_once(": ").unwrap_or((m, ""));
                meta.push((k.to_string(), v.to_string()));
            }
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let mut records = vec![r.headers().map_err(csv_err)?.clone()];
    for rec in r.records() {
        records.push(rec.map_err(csv_err)?);
    }
    Ok((meta, records))
}
