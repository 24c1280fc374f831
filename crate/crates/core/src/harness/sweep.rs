use std::collections::HashSet;
use std::time::Instant;

use super::config::{ExperimentConfig, Mode};
use super::dataset::generate_dataset;
use super::table::{PointKey, ResultRow, ResultTable};
use crate::adaptive::{approx_error_sq, build_adaptive_approximant, eta_grid, DeltaPyramid, PyramidOptions};
use crate::corpus::{self, TargetSpec};
use crate::dyadic::default_j_max;
use crate::measure::QuadratureSpec;
use crate::poly::Fitter;
use crate::relu::{compile_for_accuracy, CompileOptions};
use crate::trainer::{init_mlp, mse, train, Dataset, MlpArchitecture, TrainConfig};
use crate::{Exec, Result};

/// Overrides the configured worker count.
pub const WORKERS_ENV: &str = "ADAPTREE_WORKERS";

pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&w| w > 0)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |h, &p| splitmix(h ^ p))
}

/// FNV-1a, stable across platforms and releases.
fn name_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of the noiseless test set shared by all trials on a target.
fn test_seed(cfg: &ExperimentConfig, target: &str) -> u64 {
    mix(&[cfg.seed, name_hash(target), name_hash("test")])
}

/// Run every point of `cfg` not already present (and successful) in `existing`.
pub fn run_sweep(cfg: &ExperimentConfig, existing: Option<&ResultTable>) -> Result<ResultTable> {
    run_sweep_with(cfg, existing, &|_| {})
}

/// As [`run_sweep`], calling `on_row` as each new row completes.
pub fn run_sweep_with(
    cfg: &ExperimentConfig,
    existing: Option<&ResultTable>,
    on_row: &(dyn Fn(&ResultRow) + Sync),
) -> Result<ResultTable> {
    cfg.validate()?;
    let old: Vec<ResultRow> = existing.map(|t| t.rows.clone()).unwrap_or_default();
    let done: HashSet<PointKey> = old.iter().filter(|r| !r.failed()).map(ResultRow::key).collect();
    let workers = workers_from_env().or(cfg.workers);
    let exec = Exec::default();
    let fresh = exec.with_workers(workers, || match cfg.mode {
        Mode::Train => train_points(cfg, &done, exec, on_row),
        Mode::Approximate | Mode::Compile => threshold_points(cfg, &done, exec, on_row),
    })?;
    Ok(ResultTable::merged(old.into_iter().chain(fresh)))
}

struct TrainPoint<'a> {
    spec: &'static TargetSpec,
    test: &'a Dataset,
    n: usize,
    sigma: f64,
    trial: usize,
    seed: u64,
}

fn train_points(
    cfg: &ExperimentConfig,
    done: &HashSet<PointKey>,
    exec: Exec,
    on_row: &(dyn Fn(&ResultRow) + Sync),
) -> Result<Vec<ResultRow>> {
    let mut tests = Vec::new();
    for name in &cfg.targets {
        let spec = corpus::target(name)?;
        let measure = spec.default_measure();
        tests.push((spec, generate_dataset(spec, cfg.n_test, 0.0, &measure, test_seed(cfg, name))?));
    }
    let mut points = Vec::new();
    for (spec, test) in &tests {
        for &sigma in &cfg.sigma {
            for &n in &cfg.n_train {
                for trial in 0..cfg.trials {
                    let key = PointKey {
                        mode: Mode::Train,
                        target: spec.name.to_string(),
                        sigma_bits: sigma.to_bits(),
                        x_bits: Some((n as f64).to_bits()),
                        trial,
                    };
                    if done.contains(&key) {
                        continue;
                    }
                    let seed = mix(&[cfg.seed, name_hash(spec.name), n as u64, sigma.to_bits(), trial as u64]);
                    points.push(TrainPoint { spec, test, n, sigma, trial, seed });
                }
            }
        }
    }
    Ok(exec.map(&points, |p| {
        let start = Instant::now();
        let metric = train_point(cfg, p).unwrap_or(f64::NAN);
        let row = ResultRow {
            mode: Mode::Train,
            target: p.spec.name.to_string(),
            x: p.n as f64,
            sigma: p.sigma,
            trial: p.trial,
            metric,
            seconds: start.elapsed().as_secs_f64(),
            seed: p.seed,
        };
        on_row(&row);
        row
    }))
}

fn train_point(cfg: &ExperimentConfig, p: &TrainPoint) -> Result<f64> {
    let measure = p.spec.default_measure();
    let data = generate_dataset(p.spec, p.n, p.sigma, &measure, p.seed)?;
    let arch = match &cfg.widths {
        Some(w) => MlpArchitecture::new(w.clone())?,
        None => MlpArchitecture::new(vec![p.spec.dim, 64, 128, 64, 1])?,
    };
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: mix(&[p.seed, 2]),
    };
    let (net, _) = train(&init_mlp(&arch, mix(&[p.seed, 1])), &data, &tc)?;
    mse(&net, p.test)
}

/// Approximate and compile modes: one pyramid per target, then one row per
/// threshold or target accuracy. These runs are deterministic, so only trial 0
/// is evaluated.
fn threshold_points(
    cfg: &ExperimentConfig,
    done: &HashSet<PointKey>,
    exec: Exec,
    on_row: &(dyn Fn(&ResultRow) + Sync),
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for name in &cfg.targets {
        let spec = corpus::target(name)?;
        let measure = spec.default_measure();
        let fitter = Fitter::new(&measure, cfg.theta, &QuadratureSpec::for_degree(cfg.theta))?;
        let opts = PyramidOptions::for_dim(spec.dim).j_max(cfg.j_max.unwrap_or(default_j_max(spec.dim))).exec(exec);
        let pyramid = DeltaPyramid::build(&spec.eval, &fitter, opts);
        let grid = match (cfg.mode, &pyramid) {
            (Mode::Compile, _) => cfg.eps.clone(),
            (_, _) if !cfg.eta.is_empty() => cfg.eta.clone(),
            (_, Ok(p)) => eta_grid(p.delta_max(), cfg.eta_points, 4.0),
            (_, Err(_)) => vec![f64::NAN],
        };
        for v in grid {
            let key = PointKey { mode: cfg.mode, target: name.clone(), sigma_bits: v.to_bits(), x_bits: None, trial: 0 };
            if done.contains(&key) {
                continue;
            }
            let start = Instant::now();
            let outcome = pyramid.as_ref().map_err(Clone::clone).and_then(|pyr| match cfg.mode {
                Mode::Compile => {
                    let mut co = CompileOptions::new(cfg.s.unwrap_or_else(|| spec.predicted_s(cfg.theta)));
                    co.mc_points = cfg.mc_points;
                    co.seed = cfg.seed;
                    co.exec = exec;
                    let (_, _, report) = compile_for_accuracy(&spec.eval, &fitter, pyr, v, 1.0, &co)?;
                    Ok((report.tree_size as f64, report.stats.nonzeros as f64))
                }
                _ => {
                    let tr = pyr.truncate(v);
                    let pp = build_adaptive_approximant(&spec.eval, &tr.tree, &fitter, v, exec)?;
                    Ok((tr.tree.len() as f64, approx_error_sq(&spec.eval, &pp, &fitter, exec)))
                }
            });
            let (x, metric) = outcome.unwrap_or((f64::NAN, f64::NAN));
            let row = ResultRow {
                mode: cfg.mode,
                target: name.clone(),
                x,
                sigma: v,
                trial: 0,
                metric,
                seconds: start.elapsed().as_secs_f64(),
                seed: cfg.seed,
            };
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_train() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(Mode::Train, "onedisc");
        cfg.n_train = vec![16];
        cfg.trials = 1;
        cfg.n_test = 200;
        cfg.epochs = 20;
        cfg.widths = Some(vec![1, 8, 1]);
        cfg
    }

    #[test]
    fn one_point_one_row() {
        let t = run_sweep(&tiny_train(), None).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.rows[0].metric > 0.0);
        assert_eq!(t.rows[0].x, 16.0);
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let mut cfg = tiny_train();
        cfg.n_train = vec![16, 32, 64];
        cfg.trials = 2;
        let full = run_sweep(&cfg, None).unwrap();
        let mut partial = full.clone();
        partial.rows.retain(|r| r.x != 32.0);
        partial.rows.pop();
        let resumed = run_sweep(&cfg, Some(&partial)).unwrap();
        assert_eq!(resumed.len(), 6);
        for (a, b) in full.rows.iter().zip(&resumed.rows) {
            assert_eq!((a.x, a.trial, a.metric, a.seed), (b.x, b.trial, b.metric, b.seed));
        }
        // nothing left to do
        let again = run_sweep_with(&cfg, Some(&resumed), &|_| panic!("no new rows expected")).unwrap();
        assert_eq!(again, resumed);
    }

    #[test]
    fn seeds_are_distinct() {
        let mut cfg = tiny_train();
        cfg.n_train = vec![16, 32];
        cfg.trials = 3;
        let t = run_sweep(&cfg, None).unwrap();
        let seeds: HashSet<u64> = t.rows.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 6);
    }

    #[test]
    fn approximate_error_decreases() {
        let mut cfg = ExperimentConfig::new(Mode::Approximate, "onedisc");
        cfg.eta_points = 12;
        cfg.j_max = Some(12);
        let t = run_sweep(&cfg, None).unwrap();
        assert_eq!(t.len(), 12);
        let mut pts: Vec<(f64, f64)> = t.rows.iter().map(|r| (r.x, r.metric)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        for w in pts.windows(2) {
            assert!(w[1].1 < w[0].1, "{w:?}");
        }
    }

    #[test]
    fn compile_rows_count_nonzeros() {
        let mut cfg = ExperimentConfig::new(Mode::Compile, "onedisc");
        cfg.eps = vec![0.1, 0.03];
        cfg.mc_points = 0;
        cfg.j_max = Some(10);
        let t = run_sweep(&cfg, None).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.rows.iter().all(|r| r.metric > 0.0 && r.x >= 1.0));
        assert!(t.rows[0].metric > t.rows[1].metric, "smaller eps sorts first and needs more parameters");
    }
}
