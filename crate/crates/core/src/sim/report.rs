use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Exact header of report CSVs.
pub const CSV_HEADER: &str = "ebn0_db,snr_db,sigma,decoder,pruning,q0,trials,block_errors,bler,bit_errors,ber,seconds";

/// One decoder at one channel point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub ebn0_db: f64,
    pub snr_db: f64,
    pub sigma: f64,
    pub decoder: String,
    pub pruning: String,
    pub q0: Option<usize>,
    pub trials: u64,
    pub block_errors: u64,
    pub bler: f64,
    pub bit_errors: u64,
    pub ber: f64,
    pub seconds: f64,
}

/// Per-point paired statistics across the decoders of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PointStats {
    pub sigma: f64,
    pub trials: u64,
    pub block_errors: Vec<u64>,
    /// `discord[i][j]`: trials where decoder `i` errs and decoder `j` does not.
    pub discord: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub seed: u64,
    pub rows: Vec<SimRow>,
    pub points: Vec<PointStats>,
}

impl SimReport {
    pub fn rows_for<'a>(&'a self, decoder: &'a str) -> impl Iterator<Item = &'a SimRow> + 'a {
        self.rows.iter().filter(move |r| r.decoder == decoder)
    }

    /// `(ebn0_db, bler)` curve of one decoder label.
    pub fn curve(&self, decoder: &str) -> Vec<(f64, f64)> {
        self.rows_for(decoder).map(|r| (r.ebn0_db, r.bler)).collect()
    }

    pub fn extend(&mut self, other: SimReport) {
        self.rows.extend(other.rows);
        self.points.extend(other.points);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("csv: {e}"))
}

pub fn write_rows<W: Write>(rows: &[SimRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    Ok(())
}

/// Parses `a:step:b` (inclusive), a comma list, or a single value.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("malformed grid `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
                return Err(bad());
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|i| a + i as f64 * step).collect())
        }
        [single] => single.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}
