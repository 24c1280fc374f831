//! Fully connected ReLU regression networks trained with Adam on mean squared error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::relu::{Layer, ReluNetwork};
use crate::{Error, Result};

/// Regression samples: `x` is row-major with `dim` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if dim == 0 || x.len() != dim * y.len() {
            return Err(Error::DimMismatch { expected: dim * y.len(), got: x.len() });
        }
        Ok(Dataset { dim, x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            x.extend_from_slice(self.point(i));
        }
        Dataset { dim: self.dim, x, y: idx.iter().map(|&i| self.y[i]).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpArchitecture {
    widths: Vec<usize>,
}

impl MlpArchitecture {
    /// Layer widths from input to output, e.g. `[1, 64, 128, 64, 1]`.
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 3 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("need input, at least one hidden layer and output, all positive: {widths:?}")));
        }
        Ok(MlpArchitecture { widths })
    }

    /// 1 → 64 → 128 → 64 → 1.
    pub fn default_1d() -> Self {
        MlpArchitecture { widths: vec![1, 64, 128, 64, 1] }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("non-empty")
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// (weight offset, bias offset) of each layer in the flat parameter vector.
    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut at = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let o = (at, at + w[0] * w[1]);
                at += w[0] * w[1] + w[1];
                o
            })
            .collect()
    }
}

/// Weights (row-major, out × in) and biases of every layer, flattened.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    arch: MlpArchitecture,
    params: Vec<f64>,
}

/// Weights and biases i.i.d. uniform on ±1/√fan_in.
pub fn init_mlp(arch: &MlpArchitecture, seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(arch.param_count());
    for w in arch.widths.windows(2) {
        let r = 1.0 / (w[0] as f64).sqrt();
        for _ in 0..w[0] * w[1] + w[1] {
            params.push(rng.random_range(-r..=r));
        }
    }
    Mlp { arch: arch.clone(), params }
}

/// Forward caches: pre-activations and activations per layer, n rows each.
struct Trace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn run(&self, x: &[f64], n: usize) -> Trace {
        let widths = &self.arch.widths;
        let last = widths.len() - 2;
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(widths.len() - 1);
        for (l, (wo, bo)) in self.arch.offsets().into_iter().enumerate() {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let w = &self.params[wo..wo + fan_in * fan_out];
            let b = &self.params[bo..bo + fan_out];
            let mut z = Vec::with_capacity(n * fan_out);
            for _ in 0..n {
                z.extend_from_slice(b);
            }
            let a = &acts[l];
            // Z = A Wᵀ + 1 bᵀ
            unsafe {
                matrixmultiply::dgemm(
                    n, fan_in, fan_out, 1.0, a.as_ptr(), fan_in as isize, 1, w.as_ptr(), 1, fan_in as isize, 1.0,
                    z.as_mut_ptr(), fan_out as isize, 1,
                );
            }
            let h = if l < last { z.iter().map(|v| v.max(0.0)).collect() } else { z.clone() };
            pre.push(z);
            acts.push(h);
        }
        Trace { acts, pre }
    }

    /// Outputs for row-major inputs.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.arch.input_dim();
        if x.len() % d != 0 {
            return Err(Error::DimMismatch { expected: d, got: x.len() % d });
        }
        let mut t = self.run(x, x.len() / d);
        Ok(t.acts.pop().expect("output layer"))
    }

    /// Mean squared error and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, data: &Dataset) -> Result<(f64, Vec<f64>)> {
        let n = data.len();
        if n == 0 {
            return Err(Error::InsufficientData("empty dataset".into()));
        }
        if data.dim != self.arch.input_dim() || self.arch.output_dim() != 1 {
            return Err(Error::DimMismatch { expected: self.arch.input_dim(), got: data.dim });
        }
        let t = self.run(&data.x, n);
        let out = t.acts.last().expect("output");
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(&data.y)
            .map(|(p, y)| {
                let r = p - y;
                loss += r * r;
                2.0 * r / n as f64
            })
            .collect();
        loss /= n as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss {loss}")));
        }
        let widths = &self.arch.widths;
        let offsets = self.arch.offsets();
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..offsets.len()).rev() {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let (wo, bo) = offsets[l];
            let a = &t.acts[l];
            {
                let (gw, gb) = grad[wo..bo + fan_out].split_at_mut(fan_in * fan_out);
                // dW = Δᵀ A
                unsafe {
                    matrixmultiply::dgemm(
                        fan_out, n, fan_in, 1.0, delta.as_ptr(), 1, fan_out as isize, a.as_ptr(), fan_in as isize, 1, 0.0,
                        gw.as_mut_ptr(), fan_in as isize, 1,
                    );
                }
                for row in delta.chunks(fan_out) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += d;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[wo..wo + fan_in * fan_out];
            let mut prev = vec![0.0; n * fan_in];
            // ΔA = Δ W, then mask by the ReLU derivative (0 at the kink)
            unsafe {
                matrixmultiply::dgemm(
                    n, fan_out, fan_in, 1.0, delta.as_ptr(), fan_out as isize, 1, w.as_ptr(), fan_in as isize, 1, 0.0,
                    prev.as_mut_ptr(), fan_in as isize, 1,
                );
            }
            for (p, z) in prev.iter_mut().zip(&t.pre[l - 1]) {
                if *z <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok((loss, grad))
    }

    /// Smallest |pre-activation| of any hidden unit over the inputs; a gradient
    /// check with step h is clean when this exceeds the perturbation's effect.
    pub fn kink_margin(&self, x: &[f64]) -> f64 {
        let d = self.arch.input_dim();
        let t = self.run(x, x.len() / d);
        let hidden = &t.pre[..t.pre.len() - 1];
        hidden.iter().flatten().fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }

    pub fn to_network(&self) -> ReluNetwork {
        let widths = &self.arch.widths;
        let layers = self
            .arch
            .offsets()
            .into_iter()
            .enumerate()
            .map(|(l, (wo, bo))| {
                let (i, o) = (widths[l], widths[l + 1]);
                Layer::from_dense(o, i, &self.params[wo..wo + i * o], self.params[bo..bo + o].to_vec()).expect("shapes agree")
            })
            .collect();
        ReluNetwork::new(widths[0], layers).expect("shapes agree")
    }

    /// Read back a dense network, e.g. one written by [`Mlp::to_network`].
    pub fn from_network(net: &ReluNetwork) -> Result<Self> {
        let mut widths = vec![net.input_dim()];
        widths.extend(net.layers().iter().map(Layer::rows));
        let arch = MlpArchitecture::new(widths)?;
        let mut params = Vec::with_capacity(arch.param_count());
        for l in net.layers() {
            params.extend(l.to_dense());
            params.extend_from_slice(l.bias());
        }
        Ok(Mlp { arch, params })
    }

    pub fn to_json(&self) -> Result<String> {
        self.to_network().to_json()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_network(&ReluNetwork::from_json(s)?)
    }
}

/// Adam moments; β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimMismatch { expected: self.m.len(), got: grads.len() });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient {i} is {} at step {}", grads[i], self.step + 1)));
        }
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full batch; otherwise shuffled mini-batches of this size.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, epochs: 20_000, batch_size: None, seed: 0 }
    }
}

/// Adam on the training MSE. Returns the parameters with the lowest training
/// loss seen and the loss before each epoch plus the final one.
pub fn train(init: &Mlp, data: &Dataset, cfg: &TrainConfig) -> Result<(Mlp, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::InsufficientData("no training samples".into()));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", cfg.learning_rate)));
    }
    let mut net = init.clone();
    let mut adam = AdamState::new(net.params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut best = (f64::INFINITY, net.params.clone());
    for _ in 0..cfg.epochs {
        let loss = match cfg.batch_size {
            Some(b) if b < data.len() => {
                let loss = mse(&net, data)?;
                order.shuffle(&mut rng);
                if loss < best.0 {
                    best = (loss, net.params.clone());
                }
                for chunk in order.chunks(b) {
                    let (_, g) = net.loss_and_grad(&data.subset(chunk))?;
                    adam.update(&mut net.params, &g, cfg.learning_rate)?;
                }
                loss
            }
            _ => {
                let (loss, grad) = net.loss_and_grad(data)?;
                if loss < best.0 {
                    best = (loss, net.params.clone());
                }
                adam.update(&mut net.params, &grad, cfg.learning_rate)?;
                loss
            }
        };
        history.push(loss);
    }
    let final_loss = mse(&net, data)?;
    history.push(final_loss);
    if final_loss < best.0 {
        best = (final_loss, net.params.clone());
    }
    net.params = best.1;
    Ok((net, history))
}

/// Mean of squared residuals.
pub fn mse(net: &Mlp, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    let p = net.predict(&data.x)?;
    let s: f64 = p.iter().zip(&data.y).map(|(a, b)| (a - b) * (a - b)).sum();
    let m = s / data.len() as f64;
    if !m.is_finite() {
        return Err(Error::NonFinite(format!("mean squared error {m}")));
    }
    Ok(m)
}
