use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use super::table::{ResultRow, ResultTable};
use crate::adaptive::ols;
use crate::{Error, Result};

/// Table columns usable as fit axes or group keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Mode,
    Target,
    X,
    Sigma,
    Trial,
    Metric,
    Seconds,
}

impl FromStr for Column {
    type Err = Error;

    /// Accepts the CSV names plus the per-mode aliases (`n_train`, `test_mse`, ...).
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mode" => Column::Mode,
            "target" => Column::Target,
            "x" | "n_train" | "n" | "tree_size" => Column::X,
            "sigma" | "eta" | "eps" => Column::Sigma,
            "trial" => Column::Trial,
            "metric" | "test_mse" | "error_sq" | "k" | "K" => Column::Metric,
            "seconds" => Column::Seconds,
            _ => return Err(Error::InvalidArgument(format!("unknown column `{s}`"))),
        })
    }
}

impl Column {
    fn is_numeric(self) -> bool {
        !matches!(self, Column::Mode | Column::Target)
    }

    fn number(self, r: &ResultRow) -> Option<f64> {
        match self {
            Column::X => Some(r.x),
            Column::Sigma => Some(r.sigma),
            Column::Trial => Some(r.trial as f64),
            Column::Metric => Some(r.metric),
            Column::Seconds => Some(r.seconds),
            Column::Mode | Column::Target => None,
        }
    }

    fn label(self, r: &ResultRow) -> String {
        match self {
            Column::Mode => r.mode.as_str().to_string(),
            Column::Target => r.target.clone(),
            _ => self.number(r).expect("numeric column").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    /// Values of the group keys, in the order requested.
    pub group: Vec<String>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// (x, mean y, std y, count) per distinct x, increasing in x.
    pub points: Vec<(f64, f64, f64, usize)>,
}

/// Least squares of log(mean y) on log x within each group. Trial values are
/// averaged before the log; failed (NaN) rows are skipped.
pub fn fit_slope(table: &ResultTable, x: Column, y: Column, group_keys: &[Column]) -> Result<Vec<SlopeFit>> {
    if !(x.is_numeric() && y.is_numeric()) {
        return Err(Error::InvalidArgument("fit axes must be numeric columns".into()));
    }
    let mut groups: BTreeMap<Vec<String>, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in table.rows.iter().filter(|r| !r.failed()) {
        let (xv, yv) = (x.number(r).expect("numeric"), y.number(r).expect("numeric"));
        if !(xv > 0.0 && yv > 0.0) {
            return Err(Error::InvalidArgument(format!("log-log fit needs positive values, got x={xv}, y={yv}")));
        }
        let key = group_keys.iter().map(|c| c.label(r)).collect();
        groups.entry(key).or_default().entry(xv.to_bits()).or_default().push(yv);
    }
    if groups.is_empty() {
        return Err(Error::InsufficientData("no successful rows".into()));
    }
    groups
        .into_iter()
        .map(|(group, by_x)| {
            let mut points: Vec<(f64, f64, f64, usize)> = by_x
                .into_iter()
                .map(|(bits, mut ys)| {
                    // summing in sorted order makes the mean independent of row order
                    ys.sort_by(f64::total_cmp);
                    let n = ys.len() as f64;
                    let mean = ys.iter().sum::<f64>() / n;
                    let var = if ys.len() > 1 { ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
                    (f64::from_bits(bits), mean, var.sqrt(), ys.len())
                })
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            if points.len() < 3 {
                return Err(Error::InsufficientData(format!("group {group:?} has {} distinct x values, need 3", points.len())));
            }
            let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
            let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
            let (slope, intercept, stderr) = ols(&lx, &ly);
            Ok(SlopeFit { group, slope, intercept, stderr, points })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Mode;

    fn table(f: impl Fn(f64) -> f64, trials: usize) -> ResultTable {
        let mut rows = Vec::new();
        for k in 1..=6 {
            let x = (1u32 << k) as f64;
            for t in 0..trials {
                rows.push(ResultRow {
                    mode: Mode::Train,
                    target: "onedisc".into(),
                    x,
                    sigma: 0.1,
                    trial: t,
                    metric: f(x) * (1.0 + 0.1 * t as f64),
                    seconds: 0.0,
                    seed: 0,
                });
            }
        }
        ResultTable::new(rows)
    }

    #[test]
    fn power_laws() {
        let fit = fit_slope(&table(|x| 1.0 / x, 1), Column::X, Column::Metric, &[]).unwrap();
        assert!((fit[0].slope + 1.0).abs() < 1e-12);
        let fit = fit_slope(&table(|x| 5.0 * x * x, 1), Column::X, Column::Metric, &[Column::Sigma]).unwrap();
        assert!((fit[0].slope - 2.0).abs() < 1e-12);
        assert!((fit[0].intercept - 5f64.ln()).abs() < 1e-12);
        assert_eq!(fit[0].group, vec!["0.1".to_string()]);
    }

    #[test]
    fn mean_before_log() {
        // trial factors 1, 1.1, 1.2 average to 1.1 at every x
        let fit = fit_slope(&table(|x| 1.0 / x, 3), Column::X, Column::Metric, &[]).unwrap();
        assert!((fit[0].slope + 1.0).abs() < 1e-12);
        assert!((fit[0].intercept - 1.1f64.ln()).abs() < 1e-12);
        assert_eq!(fit[0].points[0].3, 3);
    }

    #[test]
    fn order_independent() {
        let t = table(|x| x.powf(-0.8), 4);
        let mut rev = t.clone();
        rev.rows.reverse();
        let a = fit_slope(&t, Column::X, Column::Metric, &[Column::Target]).unwrap();
        let b = fit_slope(&rev, Column::X, Column::Metric, &[Column::Target]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_slope(&table(|x| x - 2.0, 1), Column::X, Column::Metric, &[]).is_err());
        let mut short = table(|x| x, 1);
        short.rows.truncate(2);
        assert!(fit_slope(&short, Column::X, Column::Metric, &[]).is_err());
        assert!(fit_slope(&table(|x| x, 1), Column::Target, Column::Metric, &[]).is_err());
        assert_eq!("n_train".parse::<Column>().unwrap(), Column::X);
        assert!("bogus".parse::<Column>().is_err());
    }
}
