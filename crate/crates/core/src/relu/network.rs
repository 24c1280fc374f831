//! Sparse feedforward ReLU networks and the combinators used to assemble them.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Exec, Result};

/// One affine map `h ↦ W h + b`, stored row-compressed.
///
/// Rows keep their entries sorted by column and the forward pass sums them in
/// that order before adding the bias. Several gadgets rely on this order to
/// produce bitwise zeros, so it is part of the contract.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    /// Build from sparse rows `(column, weight)`; exact zeros are dropped.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>, bias: Vec<f64>) -> Result<Self> {
        if rows.len() != bias.len() {
            return Err(Error::DimMismatch { expected: rows.len(), got: bias.len() });
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (i, (c, w)) in row.iter().enumerate() {
                if *c >= cols {
                    return Err(Error::DimMismatch { expected: cols, got: c + 1 });
                }
                if i > 0 && row[i - 1].0 == *c {
                    return Err(Error::InvalidArgument(format!("duplicate column {c} in a layer row")));
                }
                if *w != 0.0 {
                    col_idx.push(*c);
                    vals.push(*w);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Layer { cols, row_ptr, col_idx, vals, bias })
    }

    pub fn from_dense(rows: usize, cols: usize, weights: &[f64], bias: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::DimMismatch { expected: rows * cols, got: weights.len() });
        }
        let sparse = (0..rows)
            .map(|r| (0..cols).map(|c| (c, weights[r * cols + c])).collect())
            .collect();
        Layer::from_rows(cols, sparse, bias)
    }

    pub fn rows(&self) -> usize {
        self.bias.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Nonzero entries of row `r` as (column, weight), sorted by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    fn row_vec(&self, r: usize) -> Vec<(usize, f64)> {
        self.row(r).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.rows() * self.cols];
        for r in 0..self.rows() {
            for (c, v) in self.row(r) {
                w[r * self.cols + c] = v;
            }
        }
        w
    }

    pub fn nonzeros(&self) -> usize {
        self.vals.len() + self.bias.iter().filter(|b| **b != 0.0).count()
    }

    fn max_abs(&self) -> f64 {
        self.vals.iter().chain(&self.bias).fold(0.0, |m, v| m.max(v.abs()))
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>, relu: bool) {
        out.clear();
        for r in 0..self.rows() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * input[self.col_idx[k]];
            }
            s += self.bias[r];
            out.push(if relu { s.max(0.0) } else { s });
        }
    }

    /// `outer ∘ self` as a single affine map.
    fn compose_into(&self, outer: &Layer) -> Layer {
        let mut rows = Vec::with_capacity(outer.rows());
        let mut bias = Vec::with_capacity(outer.rows());
        let mut acc = vec![0.0; self.cols];
        let mut seen = vec![false; self.cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..outer.rows() {
            let mut b = 0.0;
            for (k, w) in outer.row(r) {
                for (c, v) in self.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += w * v;
                }
                b += w * self.bias[k];
            }
            b += outer.bias[r];
            touched.sort_unstable();
            rows.push(touched.iter().map(|&c| (c, acc[c])).collect::<Vec<_>>());
            for &c in &touched {
                acc[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
            bias.push(b);
        }
        Layer::from_rows(self.cols, rows, bias).expect("composed layer is well formed")
    }
}

/// Size statistics of a network: the class parameters (L, w, K, κ, M).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    /// Number of hidden (ReLU) layers.
    #[serde(rename = "L")]
    pub depth: usize,
    /// Largest hidden-layer width.
    #[serde(rename = "w")]
    pub width: usize,
    /// Nonzero weights plus nonzero biases.
    #[serde(rename = "K")]
    pub nonzeros: usize,
    /// Largest absolute parameter.
    pub kappa: f64,
    /// Output bound, when the network ends in a clamp.
    #[serde(rename = "M")]
    pub output_bound: Option<f64>,
}

/// `f(x) = W_L ReLU(W_{L-1} ... ReLU(W_1 x + b_1) ...) + b_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
    clamp: Option<f64>,
}

impl ReluNetwork {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one affine layer".into()));
        }
        let mut cols = input_dim;
        for l in &layers {
            if l.cols() != cols {
                return Err(Error::DimMismatch { expected: cols, got: l.cols() });
            }
            cols = l.rows();
        }
        Ok(ReluNetwork { input_dim, layers, clamp: None })
    }

    /// A single affine layer, no hidden units.
    pub fn affine(input_dim: usize, rows: Vec<Vec<(usize, f64)>>, bias: Vec<f64>) -> Result<Self> {
        Self::new(input_dim, vec![Layer::from_rows(input_dim, rows, bias)?])
    }

    /// Selects the given input coordinates, in order.
    pub fn select(input_dim: usize, coords: &[usize]) -> Result<Self> {
        let rows = coords.iter().map(|&c| vec![(c, 1.0)]).collect();
        Self::affine(input_dim, rows, vec![0.0; coords.len()])
    }

    /// `x ↦ ReLU(x) − ReLU(−x)` per coordinate: one hidden layer of opposing pairs.
    pub fn identity_pairs(dim: usize) -> Self {
        let mut hidden = Vec::with_capacity(2 * dim);
        let mut out = Vec::with_capacity(dim);
        for i in 0..dim {
            hidden.push(vec![(i, 1.0)]);
            hidden.push(vec![(i, -1.0)]);
            out.push(vec![(2 * i, 1.0), (2 * i + 1, -1.0)]);
        }
        let h = Layer::from_rows(dim, hidden, vec![0.0; 2 * dim]).expect("pair layer");
        let o = Layer::from_rows(2 * dim, out, vec![0.0; dim]).expect("pair output");
        ReluNetwork { input_dim: dim, layers: vec![h, o], clamp: None }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::rows)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn clamp_bound(&self) -> Option<f64> {
        self.clamp
    }

    pub fn stats(&self) -> NetworkStats {
        NetworkStats {
            depth: self.depth(),
            width: self.layers[..self.depth()].iter().map(Layer::rows).max().unwrap_or(0),
            nonzeros: self.layers.iter().map(Layer::nonzeros).sum(),
            kappa: self.layers.iter().map(Layer::max_abs).fold(0.0, f64::max),
            output_bound: self.clamp,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimMismatch { expected: self.input_dim, got: x.len() });
        }
        let mut a = x.to_vec();
        let mut b = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.apply(&a, &mut b, i < last);
            std::mem::swap(&mut a, &mut b);
        }
        Ok(a)
    }

    /// Scalar output for a one-output network.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::DimMismatch { expected: 1, got: self.output_dim() });
        }
        Ok(self.forward(x)?[0])
    }

    /// Forward pass over row-major points; outputs row-major.
    pub fn forward_batch(&self, points: &[f64], exec: Exec) -> Result<Vec<f64>> {
        if self.input_dim == 0 || points.len() % self.input_dim != 0 {
            return Err(Error::DimMismatch { expected: self.input_dim, got: points.len() });
        }
        let n = points.len() / self.input_dim;
        let rows = exec.map_range(n, |i| {
            self.forward(&points[i * self.input_dim..(i + 1) * self.input_dim]).expect("dimension checked")
        });
        Ok(rows.concat())
    }

    /// `outer ∘ self`; the last affine map of `self` is merged into the first of `outer`.
    pub fn then(&self, outer: &ReluNetwork) -> Result<ReluNetwork> {
        if self.output_dim() != outer.input_dim {
            return Err(Error::DimMismatch { expected: self.output_dim(), got: outer.input_dim });
        }
        let (last, head) = self.layers.split_last().expect("non-empty");
        let mut layers = head.to_vec();
        layers.push(last.compose_into(&outer.layers[0]));
        layers.extend_from_slice(&outer.layers[1..]);
        Ok(ReluNetwork { input_dim: self.input_dim, layers, clamp: outer.clamp })
    }

    /// Route each output through one hidden layer before it is consumed.
    ///
    /// Nonnegative outputs get a single unit, the rest an opposing pair. A
    /// downstream row then sees each value as a sum with at most one nonzero
    /// term, which keeps exact zeros exact.
    pub fn materialize(&self, nonneg: &[bool]) -> Result<ReluNetwork> {
        let n = self.output_dim();
        if nonneg.len() != n {
            return Err(Error::DimMismatch { expected: n, got: nonneg.len() });
        }
        let mut hidden = Vec::new();
        let mut out = Vec::new();
        for (i, &pos) in nonneg.iter().enumerate() {
            let p = hidden.len();
            hidden.push(vec![(i, 1.0)]);
            if pos {
                out.push(vec![(p, 1.0)]);
            } else {
                hidden.push(vec![(i, -1.0)]);
                out.push(vec![(p, 1.0), (p + 1, -1.0)]);
            }
        }
        let width = hidden.len();
        let carrier = ReluNetwork::new(
            n,
            vec![Layer::from_rows(n, hidden, vec![0.0; width])?, Layer::from_rows(width, out, vec![0.0; n])?],
        )?;
        self.then(&carrier)
    }

    /// Extend to `depth` hidden layers with identity pairs on the outputs.
    pub fn pad_to(&self, depth: usize) -> ReluNetwork {
        let mut net = self.clone();
        let pairs = ReluNetwork::identity_pairs(self.output_dim());
        while net.depth() < depth {
            net = net.then(&pairs).expect("pairs match output dimension");
        }
        net
    }

    /// Append `y ↦ M − ReLU(2M − ReLU(y + M))` to each output, which clips to [−M, M].
    pub fn with_clamp(&self, m: f64) -> Result<ReluNetwork> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("clamp bound must be positive, got {m}")));
        }
        let n = self.output_dim();
        let ident: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
        let neg: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, -1.0)]).collect();
        let clip = ReluNetwork::new(
            n,
            vec![
                Layer::from_rows(n, ident, vec![m; n])?,
                Layer::from_rows(n, neg.clone(), vec![2.0 * m; n])?,
                Layer::from_rows(n, neg, vec![m; n])?,
            ],
        )?;
        let mut net = self.then(&clip)?;
        net.clamp = Some(m);
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        let stats = self.stats();
        let layers: Vec<Value> = self
            .layers
            .iter()
            .map(|l| {
                serde_json::json!({
                    "rows": l.rows(),
                    "cols": l.cols(),
                    "weights": l.to_dense().iter().map(|v| fmt_exact(*v)).collect::<Vec<_>>(),
                    "bias": l.bias().iter().map(|v| fmt_exact(*v)).collect::<Vec<_>>(),
                })
            })
            .collect();
        let doc = serde_json::json!({
            "meta": {
                "input_dim": self.input_dim,
                "output_dim": self.output_dim(),
                "L": stats.depth,
                "w": stats.width,
                "K": stats.nonzeros,
                "kappa": fmt_exact(stats.kappa),
                "M": stats.output_bound.map(fmt_exact),
            },
            "layers": layers,
        });
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(s)?;
        let meta = doc.get("meta").ok_or_else(|| Error::Format("missing meta".into()))?;
        let input_dim = meta
            .get("input_dim")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("meta.input_dim".into()))? as usize;
        let clamp = match meta.get("M") {
            None | Some(Value::Null) => None,
            Some(v) => Some(parse_num(v)?),
        };
        let raw = doc.get("layers").and_then(Value::as_array).ok_or_else(|| Error::Format("missing layers".into()))?;
        let mut layers = Vec::with_capacity(raw.len());
        for l in raw {
            let dim = |k: &str| l.get(k).and_then(Value::as_u64).map(|v| v as usize).ok_or_else(|| Error::Format(format!("layer.{k}")));
            let (rows, cols) = (dim("rows")?, dim("cols")?);
            let nums = |k: &str| -> Result<Vec<f64>> {
                l.get(k)
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::Format(format!("layer.{k}")))?
                    .iter()
                    .map(parse_num)
                    .collect()
            };
            layers.push(Layer::from_dense(rows, cols, &nums("weights")?, nums("bias")?)?);
        }
        let mut net = ReluNetwork::new(input_dim, layers)?;
        net.clamp = clamp;
        if let Some(k) = meta.get("K").and_then(Value::as_u64) {
            if k as usize != net.stats().nonzeros {
                return Err(Error::Format(format!("meta.K = {k} disagrees with the layers")));
            }
        }
        Ok(net)
    }
}

/// Shortest decimal that reads back to the same bits, at most 17 significant digits.
fn fmt_exact(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.16e}")
}

fn parse_num(v: &Value) -> Result<f64> {
    match v {
        Value::String(s) => s.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad number {s:?}"))),
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Format("bad number".into())),
        _ => Err(Error::Format("expected a number".into())),
    }
}

/// Run nets side by side on the same input; outputs are concatenated.
///
/// Shallower nets are padded with identity pairs so every branch ends at the
/// same depth. Each branch computes exactly what it computes alone.
pub fn stack_parallel(nets: &[ReluNetwork]) -> Result<ReluNetwork> {
    let first = nets.first().ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
    let d = first.input_dim;
    if let Some(n) = nets.iter().find(|n| n.input_dim != d) {
        return Err(Error::DimMismatch { expected: d, got: n.input_dim });
    }
    let depth = nets.iter().map(ReluNetwork::depth).max().unwrap_or(0);
    let padded: Vec<ReluNetwork> = nets.iter().map(|n| n.pad_to(depth)).collect();
    let mut layers = Vec::with_capacity(depth + 1);
    for li in 0..=depth {
        let mut rows = Vec::new();
        let mut bias = Vec::new();
        let mut offset = 0;
        for n in &padded {
            let l = &n.layers[li];
            for r in 0..l.rows() {
                let shift = if li == 0 { 0 } else { offset };
                rows.push(l.row_vec(r).into_iter().map(|(c, w)| (c + shift, w)).collect());
            }
            bias.extend_from_slice(l.bias());
            offset += l.cols();
        }
        let cols = if li == 0 { d } else { offset };
        layers.push(Layer::from_rows(cols, rows, bias)?);
    }
    ReluNetwork::new(d, layers)
}

/// log of the δ-covering-number bound K·log(2L²(w+2)κ^L w^{L+1}/δ), evaluated in log space.
///
/// L and w are floored at 1 so the bound stays finite for affine nets.
pub fn covering_bound(stats: &NetworkStats, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("cover radius must be positive, got {radius}")));
    }
    let l = stats.depth.max(1) as f64;
    let w = stats.width.max(1) as f64;
    let inner = 2f64.ln() + 2.0 * l.ln() + (w + 2.0).ln() + l * stats.kappa.ln() + (l + 1.0) * w.ln() - radius.ln();
    Ok(stats.nonzeros as f64 * inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_unit() -> ReluNetwork {
        // ReLU(2x − 1)
        ReluNetwork::new(
            1,
            vec![Layer::from_rows(1, vec![vec![(0, 2.0)]], vec![-1.0]).unwrap(), Layer::from_rows(1, vec![vec![(0, 1.0)]], vec![0.0]).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn identity_pair_is_exact() {
        let id = ReluNetwork::identity_pairs(1);
        assert_eq!(id.eval(&[-0.7]).unwrap(), -0.7);
        for x in [0.0, 1e-300, -3.25, 1e300] {
            assert_eq!(id.eval(&[x]).unwrap(), x);
        }
    }

    #[test]
    fn single_unit() {
        assert_eq!(one_unit().eval(&[1.0]).unwrap(), 1.0);
        assert_eq!(one_unit().eval(&[0.2]).unwrap(), 0.0);
        assert!(matches!(one_unit().forward(&[1.0, 2.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn zero_weights_have_no_parameters() {
        let l1 = Layer::from_dense(3, 2, &[0.0; 6], vec![0.0; 3]).unwrap();
        let l2 = Layer::from_dense(1, 3, &[0.0; 3], vec![0.0]).unwrap();
        let net = ReluNetwork::new(2, vec![l1, l2]).unwrap();
        let s = net.stats();
        assert_eq!((s.depth, s.width, s.nonzeros), (1, 3, 0));
    }

    #[test]
    fn composition_matches_nesting() {
        let inner = one_unit();
        let outer = ReluNetwork::affine(1, vec![vec![(0, -3.0)]], vec![0.5]).unwrap();
        let net = inner.then(&outer).unwrap();
        for x in [-1.0, 0.3, 0.9, 2.0] {
            let expect = -3.0 * inner.eval(&[x]).unwrap() + 0.5;
            assert_eq!(net.eval(&[x]).unwrap(), expect);
        }
        assert_eq!(net.depth(), 1);
    }

    #[test]
    fn stacking_adds_width_and_parameters() {
        let a = one_unit();
        let b = ReluNetwork::identity_pairs(1);
        let s = stack_parallel(&[a.clone(), b.clone()]).unwrap();
        let (sa, sb, ss) = (a.stats(), b.stats(), s.stats());
        assert_eq!(ss.depth, 1);
        assert_eq!(ss.width, sa.width + sb.width);
        assert_eq!(ss.nonzeros, sa.nonzeros + sb.nonzeros);
        for x in [-2.0, 0.1, 0.75] {
            assert_eq!(s.forward(&[x]).unwrap(), vec![a.eval(&[x]).unwrap(), b.eval(&[x]).unwrap()]);
        }
    }

    #[test]
    fn stacking_pads_shallow_branches() {
        let deep = one_unit().then(&one_unit()).unwrap().materialize(&[true]).unwrap();
        let flat = ReluNetwork::affine(1, vec![vec![(0, 0.3)]], vec![-0.1]).unwrap();
        let s = stack_parallel(&[flat.clone(), deep.clone()]).unwrap();
        assert_eq!(s.depth(), deep.depth());
        for i in 0..200 {
            let x = -1.0 + i as f64 * 0.013;
            assert_eq!(s.forward(&[x]).unwrap(), vec![flat.eval(&[x]).unwrap(), deep.eval(&[x]).unwrap()]);
        }
        assert!(stack_parallel(&[]).is_err());
    }

    #[test]
    fn clamp_clips_and_keeps_zero() {
        let lin = ReluNetwork::affine(1, vec![vec![(0, 1.0)]], vec![0.0]).unwrap();
        let c = lin.with_clamp(2.0).unwrap();
        assert_eq!(c.stats().output_bound, Some(2.0));
        assert_eq!(c.depth(), 2);
        assert_eq!(c.eval(&[0.0]).unwrap(), 0.0);
        assert_eq!(c.eval(&[5.0]).unwrap(), 2.0);
        assert_eq!(c.eval(&[-1e300]).unwrap(), -2.0);
        assert_eq!(c.eval(&[1e300]).unwrap(), 2.0);
        assert!((c.eval(&[1.3]).unwrap() - 1.3).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let lin = ReluNetwork::affine(2, vec![vec![(0, 0.1), (1, std::f64::consts::PI)]], vec![1.0 / 3.0]).unwrap();
        let net = one_unit().then(&ReluNetwork::identity_pairs(1)).unwrap();
        let s = stack_parallel(&[lin.then(&ReluNetwork::affine(1, vec![vec![(0, 1e-17)]], vec![0.0]).unwrap()).unwrap()]).unwrap();
        for n in [net.with_clamp(0.7).unwrap(), s] {
            let back = ReluNetwork::from_json(&n.to_json().unwrap()).unwrap();
            assert_eq!(back, n);
        }
    }

    #[test]
    fn covering_bound_closed_form() {
        let st = NetworkStats { depth: 1, width: 2, nonzeros: 3, kappa: 1.0, output_bound: None };
        let b = covering_bound(&st, 1.0).unwrap();
        assert!((b - 3.0 * 32f64.ln()).abs() < 1e-12);
        let half = covering_bound(&st, 0.5).unwrap();
        assert!((half - b - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!(covering_bound(&st, 0.0).is_err());
    }
}
