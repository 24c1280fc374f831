use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Train MLPs on noisy samples, record test MSE against n.
    Train,
    /// Threshold sweep, record ‖f - p_Λ‖² against #T.
    Approximate,
    /// Compile adaptive approximants for a list of target accuracies, record K.
    Compile,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Approximate => "approximate",
            Mode::Compile => "compile",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Mode::Train),
            "approximate" => Ok(Mode::Approximate),
            "compile" => Ok(Mode::Compile),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}`"))),
        }
    }
}

fn default_targets() -> Vec<String> {
    vec!["onedisc".into()]
}
fn default_n_train() -> Vec<usize> {
    (4..=10).map(|k| 1 << k).collect()
}
fn default_sigma() -> Vec<f64> {
    vec![0.1]
}
fn default_trials() -> usize {
    5
}
fn default_n_test() -> usize {
    10_000
}
fn default_theta() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_epochs() -> usize {
    20_000
}
fn default_lr() -> f64 {
    1e-3
}
fn default_eta_points() -> usize {
    40
}
fn default_mc_points() -> usize {
    100_000
}

/// One experiment. Fields not used by the chosen mode are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "default_targets")]
    pub targets: Vec<String>,
    /// Polynomial degree for approximate and compile runs.
    #[serde(default = "default_theta")]
    pub theta: usize,
    #[serde(default = "default_n_train")]
    pub n_train: Vec<usize>,
    #[serde(default = "default_sigma")]
    pub sigma: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// MLP widths; defaults to d → 64 → 128 → 64 → 1.
    #[serde(default)]
    pub widths: Option<Vec<usize>>,
    /// Explicit thresholds; empty means a geometric grid below max δ.
    #[serde(default)]
    pub eta: Vec<f64>,
    #[serde(default = "default_eta_points")]
    pub eta_points: usize,
    #[serde(default)]
    pub j_max: Option<u32>,
    /// Target accuracies for compile mode.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Regularity index for compile mode; defaults to the target's predicted s.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default = "default_mc_points")]
    pub mc_points: usize,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Defaults for `mode`, single target.
    pub fn new(mode: Mode, target: &str) -> Self {
        let mut cfg: ExperimentConfig =
            serde_json::from_value(serde_json::json!({ "mode": mode, "targets": [target] })).expect("defaults deserialize");
        if mode == Mode::Compile {
            cfg.eps = vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
        }
        cfg
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.targets.is_empty() {
            return bad("no targets");
        }
        for t in &self.targets {
            corpus::target(t)?;
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        match self.mode {
            Mode::Train => {
                if self.n_train.is_empty() || self.sigma.is_empty() {
                    return bad("train mode needs non-empty n_train and sigma grids");
                }
                if self.n_train.contains(&0) || self.n_test == 0 {
                    return bad("sample sizes must be positive");
                }
                if self.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return bad("sigma must be finite and non-negative");
                }
                if !(self.learning_rate > 0.0) {
                    return bad("learning_rate must be positive");
                }
            }
            Mode::Approximate => {
                if self.eta.is_empty() && self.eta_points == 0 {
                    return bad("approximate mode needs eta values or eta_points > 0");
                }
                if self.eta.iter().any(|e| !(*e > 0.0)) {
                    return bad("eta values must be positive");
                }
            }
            Mode::Compile => {
                if self.eps.is_empty() {
                    return bad("compile mode needs a non-empty eps grid");
                }
                if self.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                    return bad("eps values must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }
}
