use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Mode;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 8] = ["mode", "target", "x", "sigma", "trial", "metric", "seconds", "seed"];

/// One measurement.
///
/// | mode        | x        | sigma | metric          |
/// |-------------|----------|-------|-----------------|
/// | train       | n_train  | σ     | test MSE        |
/// | approximate | #T       | η     | ‖f - p_Λ‖²      |
/// | compile     | #T       | ε     | K               |
///
/// A failed point keeps its coordinates and records NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: Mode,
    pub target: String,
    pub x: f64,
    pub sigma: f64,
    pub trial: usize,
    pub metric: f64,
    pub seconds: f64,
    pub seed: u64,
}

/// Identity of the sweep point a row belongs to. `x` is part of it only in
/// train mode; elsewhere it is an outcome.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct PointKey {
    pub mode: Mode,
    pub target: String,
    pub sigma_bits: u64,
    pub x_bits: Option<u64>,
    pub trial: usize,
}

impl ResultRow {
    pub(crate) fn key(&self) -> PointKey {
        PointKey {
            mode: self.mode,
            target: self.target.clone(),
            sigma_bits: self.sigma.to_bits(),
            x_bits: (self.mode == Mode::Train).then(|| self.x.to_bits()),
            trial: self.trial,
        }
    }

    /// Fields in CSV column order. Floats use the shortest representation
    /// that reads back to the same value.
    pub fn csv_record(&self) -> [String; 8] {
        [
            self.mode.as_str().to_string(),
            self.target.clone(),
            self.x.to_string(),
            self.sigma.to_string(),
            self.trial.to_string(),
            self.metric.to_string(),
            self.seconds.to_string(),
            self.seed.to_string(),
        ]
    }

    pub fn failed(&self) -> bool {
        self.metric.is_nan()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        ResultTable { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Merge by point key; later rows replace earlier ones. Output is in
    /// canonical order (mode, target, sigma, x, trial).
    pub fn merged(rows: impl IntoIterator<Item = ResultRow>) -> Self {
        let mut by_key = BTreeMap::new();
        for r in rows {
            by_key.insert(r.key(), r);
        }
        let mut rows: Vec<ResultRow> = by_key.into_values().collect();
        rows.sort_by(|a, b| {
            (a.mode, &a.target)
                .cmp(&(b.mode, &b.target))
                .then(a.sigma.total_cmp(&b.sigma))
                .then(a.x.total_cmp(&b.x))
                .then(a.trial.cmp(&b.trial))
        });
        ResultTable { rows }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record(r.csv_record())?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(s.as_bytes());
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Format(format!("unexpected CSV header {header:?}")));
        }
        let rows = rd.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(ResultTable { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv()?)?)
    }
}
