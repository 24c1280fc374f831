//! Probability measures on [0,1]^d and per-cube integration rules.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{check_dim, CubeIndex, MAX_DIM};
use crate::error::{Error, Result};
use crate::quadrature::tensor_gauss;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Cells whose mass falls below this are treated as invisible to the measure.
pub const MASS_FLOOR: f64 = 1e-12;

#[derive(Clone)]
pub enum Measure {
    Lebesgue { dim: usize },
    Density { dim: usize, density: DensityFn, c_rho: f64, label: String },
    /// Weighted point masses; `points` is point-major with `dim` coordinates each.
    Empirical { dim: usize, points: Vec<f64>, weights: Vec<f64> },
}

impl fmt::Debug for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Lebesgue { dim } => write!(f, "Lebesgue(d={dim})"),
            Measure::Density { dim, c_rho, label, .. } => write!(f, "Density({label}, d={dim}, C_rho={c_rho})"),
            Measure::Empirical { dim, weights, .. } => write!(f, "Empirical(d={dim}, n={})", weights.len()),
        }
    }
}

impl Measure {
    pub fn lebesgue(d: usize) -> Self {
        Measure::Lebesgue { dim: d }
    }

    /// Density measure; the bound `c_rho` is audited on a grid and the density's
    /// integral is checked to be one.
    pub fn density(
        d: usize,
        label: impl Into<String>,
        c_rho: f64,
        density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(d)?;
        let density: DensityFn = Arc::new(density);
        let per_axis: usize = match d {
            1 => 4096,
            2 => 64,
            _ => 16,
        };
        let total = per_axis.pow(d as u32);
        let mut x = [0.0; MAX_DIM];
        let mut worst: f64 = 0.0;
        for idx in 0..total {
            let mut rem = idx;
            for v in x.iter_mut().take(d) {
                *v = ((rem % per_axis) as f64 + 0.5) / per_axis as f64;
                rem /= per_axis;
            }
            let v = density(&x[..d]);
            if !(v >= 0.0) {
                return Err(Error::InvalidMeasure(format!("density {v} at {:?}", &x[..d])));
            }
            worst = worst.max(v);
        }
        if worst > c_rho {
            return Err(Error::DensityBound { bound: c_rho, observed: worst });
        }
        let m = Measure::Density { dim: d, density, c_rho, label: label.into() };
        let total_mass = m.cell_mass(&CubeIndex::root(d));
        if (total_mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidMeasure(format!("density integrates to {total_mass}")));
        }
        Ok(m)
    }

    /// Weighted point measure; weights are normalized to sum to one.
    pub fn empirical(d: usize, points: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        check_dim(d)?;
        if points.is_empty() || points.len() % d != 0 {
            return Err(Error::InvalidMeasure("point list empty or ragged".into()));
        }
        if points.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidMeasure("points must lie in [0,1]^d".into()));
        }
        let n = points.len() / d;
        let mut w = weights.unwrap_or_else(|| vec![1.0; n]);
        if w.len() != n {
            return Err(Error::InvalidMeasure("weight count differs from point count".into()));
        }
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidMeasure("weights must be non-negative".into()));
        }
        let s: f64 = w.iter().sum();
        if s <= 0.0 {
            return Err(Error::InvalidMeasure("weights sum to zero".into()));
        }
        w.iter_mut().for_each(|v| *v /= s);
        Ok(Measure::Empirical { dim: d, points, weights: w })
    }

    /// Load points from CSV: `d` coordinate columns and an optional weight column.
    /// A non-numeric first row is treated as a header.
    pub fn empirical_from_csv(path: &Path, d: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path)?;
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        let mut weighted = None;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            let vals = match vals {
                Ok(v) => v,
                Err(_) if row == 0 => continue,
                Err(e) => return Err(Error::Format(format!("row {}: {e}", row + 1))),
            };
            let has_w = match vals.len() {
                n if n == d => false,
                n if n == d + 1 => true,
                n => return Err(Error::Format(format!("row {}: {n} columns, expected {d} or {}", row + 1, d + 1))),
            };
            if *weighted.get_or_insert(has_w) != has_w {
                return Err(Error::Format("mixed weighted and unweighted rows".into()));
            }
            pts.extend_from_slice(&vals[..d]);
            if has_w {
                wts.push(vals[d]);
            }
        }
        Self::empirical(d, pts, if weighted == Some(true) { Some(wts) } else { None })
    }

    pub fn dim(&self) -> usize {
        match self {
            Measure::Lebesgue { dim } | Measure::Density { dim, .. } | Measure::Empirical { dim, .. } => *dim,
        }
    }

    /// Bound C_rho with rho(S) <= C_rho |S|, when one exists.
    pub fn c_rho(&self) -> Option<f64> {
        match self {
            Measure::Lebesgue { .. } => Some(1.0),
            Measure::Density { c_rho, .. } => Some(*c_rho),
            Measure::Empirical { .. } => None,
        }
    }

    pub fn is_lebesgue(&self) -> bool {
        matches!(self, Measure::Lebesgue { .. })
    }

    /// `n` i.i.d. points (point-major), deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut out = Vec::with_capacity(n * d);
        match self {
            Measure::Lebesgue { .. } => {
                for _ in 0..n * d {
                    out.push(rng.random::<f64>());
                }
            }
            Measure::Density { density, c_rho, .. } => {
                let mut x = [0.0; MAX_DIM];
                let mut got = 0;
                let mut tries = 0u64;
                while got < n {
                    tries += 1;
                    if tries > 1000 * n as u64 + 1_000_000 {
                        return Err(Error::InvalidMeasure("rejection sampler stalled".into()));
                    }
                    for v in x.iter_mut().take(d) {
                        *v = rng.random::<f64>();
                    }
                    let rho = density(&x[..d]);
                    if rho > *c_rho {
                        return Err(Error::DensityBound { bound: *c_rho, observed: rho });
                    }
                    if rng.random::<f64>() * c_rho < rho {
                        out.extend_from_slice(&x[..d]);
                        got += 1;
                    }
                }
            }
            Measure::Empirical { points, weights, .. } => {
                let mut cum = Vec::with_capacity(weights.len());
                let mut s = 0.0;
                for w in weights {
                    s += w;
                    cum.push(s);
                }
                for _ in 0..n {
                    let u = rng.random::<f64>() * s;
                    let i = cum.partition_point(|&c| c <= u).min(weights.len() - 1);
                    out.extend_from_slice(&points[i * d..(i + 1) * d]);
                }
            }
        }
        Ok(out)
    }

    /// rho(cube). Exact for Lebesgue and empirical measures; Gauss order 8 for densities.
    pub fn cell_mass(&self, cube: &CubeIndex) -> f64 {
        match self {
            Measure::Lebesgue { .. } => cube.volume(),
            Measure::Empirical { .. } => {
                let rule = self.cell_rule(cube, &QuadratureSpec::tensor_gauss(1)).expect("valid rule");
                rule.mass()
            }
            Measure::Density { .. } => {
                let rule = self.cell_rule(cube, &QuadratureSpec::tensor_gauss(8)).expect("valid rule");
                rule.mass()
            }
        }
    }

    /// Integration rule for `∫_cube · dρ`.
    pub fn cell_rule(&self, cube: &CubeIndex, quad: &QuadratureSpec) -> Result<CellRule> {
        Ok(RuleBuilder::new(self, quad)?.rule(cube))
    }

    /// `∫_cube g h dρ` under the given quadrature.
    pub fn cell_inner_product(
        &self,
        g: impl Fn(&[f64]) -> f64,
        h: impl Fn(&[f64]) -> f64,
        cube: &CubeIndex,
        quad: &QuadratureSpec,
    ) -> Result<f64> {
        if cube.dim() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), got: cube.dim() });
        }
        let rule = self.cell_rule(cube, quad)?;
        Ok(rule.iter().map(|(x, w)| w * g(x) * h(x)).sum())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum QuadratureKind {
    TensorGauss { order: usize },
    MonteCarlo { n_points: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub kind: QuadratureKind,
    /// Reported alongside results; not used to adapt the rule.
    pub target_tol: f64,
}

impl QuadratureSpec {
    pub fn tensor_gauss(order: usize) -> Self {
        QuadratureSpec { kind: QuadratureKind::TensorGauss { order }, target_tol: 1e-10 }
    }

    pub fn monte_carlo(n_points: usize, seed: u64) -> Self {
        QuadratureSpec { kind: QuadratureKind::MonteCarlo { n_points, seed }, target_tol: 1e-3 }
    }

    /// Default rule for degree-θ fitting: Gauss order 2θ+4 per axis.
    pub fn for_degree(theta: usize) -> Self {
        Self::tensor_gauss(2 * theta + 4)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            QuadratureKind::TensorGauss { order: 0 } => Err(Error::InvalidQuadrature("order must be >= 1".into())),
            QuadratureKind::MonteCarlo { n_points: 0, .. } => {
                Err(Error::InvalidQuadrature("monte-carlo needs n_points >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Weighted points for one cube; `points` is point-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellRule {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CellRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.chunks_exact(self.dim.max(1)).zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Precomputed reference data for producing [`CellRule`]s on many cubes.
pub struct RuleBuilder<'a> {
    measure: &'a Measure,
    quad: QuadratureSpec,
    reference: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> RuleBuilder<'a> {
    pub fn new(measure: &'a Measure, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        let reference = match quad.kind {
            QuadratureKind::TensorGauss { order } => Some(tensor_gauss(order, measure.dim())),
            QuadratureKind::MonteCarlo { .. } => None,
        };
        Ok(RuleBuilder { measure, quad: quad.clone(), reference })
    }

    pub fn measure(&self) -> &Measure {
        self.measure
    }

    /// Reference points and weights on [0,1]^d for tensor-Gauss rules.
    pub fn reference(&self) -> Option<&(Vec<f64>, Vec<f64>)> {
        self.reference.as_ref()
    }

    pub fn rule(&self, cube: &CubeIndex) -> CellRule {
        let d = self.measure.dim();
        match self.measure {
            Measure::Empirical { points, weights, .. } => {
                let mut r = CellRule { dim: d, ..Default::default() };
                for (i, w) in weights.iter().enumerate() {
                    let x = &points[i * d..(i + 1) * d];
                    if cube.contains(x) {
                        r.points.extend_from_slice(x);
                        r.weights.push(*w);
                    }
                }
                r
            }
            Measure::Lebesgue { .. } => self.volume_rule(cube, |_| 1.0),
            Measure::Density { density, .. } => self.volume_rule(cube, |x| density(x)),
        }
    }

    fn volume_rule(&self, cube: &CubeIndex, rho: impl Fn(&[f64]) -> f64) -> CellRule {
        let d = cube.dim();
        let h = cube.side();
        let vol = cube.volume();
        let anchor = cube.anchor();
        let mut r = CellRule { dim: d, ..Default::default() };
        match (&self.reference, &self.quad.kind) {
            (Some((xi, w)), _) => {
                r.points.reserve(xi.len());
                r.weights.reserve(w.len());
                for (q, wq) in xi.chunks_exact(d).zip(w) {
                    let start = r.points.len();
                    for l in 0..d {
                        r.points.push(anchor[l] + h * q[l]);
                    }
                    r.weights.push(vol * wq * rho(&r.points[start..]));
                }
            }
            (None, QuadratureKind::MonteCarlo { n_points, seed }) => {
                let mix = seed ^ (cube.j() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (cube.linear() as u64).rotate_left(17);
                let mut rng = ChaCha8Rng::seed_from_u64(mix);
                let w = vol / *n_points as f64;
                for _ in 0..*n_points {
                    let start = r.points.len();
                    for l in 0..d {
                        r.points.push(anchor[l] + h * rng.random::<f64>());
                    }
                    r.weights.push(w * rho(&r.points[start..]));
                }
            }
            (None, QuadratureKind::TensorGauss { .. }) => unreachable!("reference rule precomputed"),
        }
        r
    }
}
