//! Thresholded trees, adaptive piecewise polynomial approximants and estimates
//! of the approximation class seminorm and rate.
//!
//! Refinement quantities are computed once for every cube up to the scale cap
//! ([`DeltaPyramid`]). A node belongs to T(f, η) exactly when some node of its
//! subtree has δ > η, so after storing the subtree maxima every threshold is a
//! lookup.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dyadic::{check_dim, default_j_max, AdaptivePartition, CubeIndex, TruncatedTree};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::measure::{CellRule, Measure, QuadratureSpec};
use crate::poly::{Fitter, PolynomialPatch};

pub trait Target: Fn(&[f64]) -> f64 + Sync {}
impl<F: Fn(&[f64]) -> f64 + Sync> Target for F {}

#[derive(Clone, Copy, Debug)]
pub struct PyramidOptions {
    pub j_max: u32,
    /// Also compute ‖f - f_{J_max+1}‖², the energy below the finest fitted scale.
    pub with_tail: bool,
    pub exec: Exec,
}

impl PyramidOptions {
    pub fn for_dim(d: usize) -> Self {
        PyramidOptions { j_max: default_j_max(d), with_tail: false, exec: Exec::default() }
    }

    pub fn j_max(mut self, j: u32) -> Self {
        self.j_max = j;
        self
    }

    pub fn with_tail(mut self) -> Self {
        self.with_tail = true;
        self
    }

    pub fn exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

/// Refinement quantities of every cube at scales 0..=J_max.
#[derive(Clone, Debug)]
pub struct DeltaPyramid {
    dim: usize,
    degree: usize,
    j_max: u32,
    /// deltas[j][linear index]
    deltas: Vec<Vec<f64>>,
    /// max of δ over each node's subtree (within the cap)
    subtree_max: Vec<Vec<f64>>,
    /// subtree maxima sorted decreasingly, for counting #T(η)
    sorted: Vec<f64>,
    root_norm: f64,
    tail: Option<f64>,
}

/// Hard limit on the number of cubes held in one pyramid level.
const MAX_LEVEL_CUBES: usize = 1 << 25;

impl DeltaPyramid {
    pub fn build<F: Target + ?Sized>(f: &F, fitter: &Fitter, opts: PyramidOptions) -> Result<Self> {
        let d = fitter.dim();
        check_dim(d)?;
        let cubes_at = |j: u32| 1usize.checked_shl(j * d as u32).unwrap_or(usize::MAX);
        if cubes_at(opts.j_max + 1) > MAX_LEVEL_CUBES {
            return Err(Error::ScaleCap { scale: opts.j_max + 1, cap: opts.j_max.min(25 / d as u32 - 1) });
        }
        let np = fitter.n_p();
        let buckets = Buckets::new(fitter.measure());
        let root = CubeIndex::root(d);
        let root_patch = fitter.fit(f, &root);
        let root_norm = fitter.rule(&root).integrate(|x| root_patch.eval(x).powi(2)).sqrt();
        let mut level: Vec<f64> = root_patch.coeffs.clone();
        let mut deltas = Vec::with_capacity(opts.j_max as usize + 1);
        let mut tail = None;
        for j in 0..=opts.j_max {
            let last = j == opts.j_max;
            let lvl_rules = buckets.as_ref().map(|b| b.level(j + 1));
            let per_parent = opts.exec.map_range(cubes_at(j), |idx| {
                let cube = CubeIndex::from_linear(j, idx, d);
                let parent = PolynomialPatch {
                    coeffs: level[idx * np..(idx + 1) * np].to_vec(),
                    ..PolynomialPatch::zero(cube, fitter.degree())
                };
                let mut energy = 0.0;
                let mut resid = 0.0;
                let mut kids = Vec::with_capacity(np << d);
                if let Some(lr) = &lvl_rules {
                    for ch in cube.children() {
                        let rule = lr.rule(&ch);
                        let p = fitter.fit_with_rule(f, &ch, &rule);
                        energy += rule.integrate(|x| (p.eval(x) - parent.eval(x)).powi(2));
                        if last && opts.with_tail {
                            resid += rule.integrate(|x| (f(x) - p.eval(x)).powi(2));
                        }
                        kids.push(p);
                    }
                } else {
                    let children: Vec<PolynomialPatch> = cube.children().iter().map(|c| fitter.fit(f, c)).collect();
                    energy = fitter.split_energy(&parent, &children);
                    if last && opts.with_tail {
                        resid = children.iter().map(|p| fitter.squared_residual(f, p)).sum();
                    }
                    kids = children;
                }
                (energy.max(0.0).sqrt(), kids, resid)
            });
            let mut next = if last { Vec::new() } else { vec![0.0; cubes_at(j + 1) * np] };
            let mut dj = Vec::with_capacity(per_parent.len());
            let mut r = 0.0;
            for (delta, kids, resid) in per_parent {
                dj.push(delta);
                r += resid;
                if !last {
                    for p in kids {
                        let at = p.cube.linear() * np;
                        next[at..at + np].copy_from_slice(&p.coeffs);
                    }
                }
            }
            if last && opts.with_tail {
                tail = Some(r);
            }
            deltas.push(dj);
            level = next;
        }
        let mut subtree_max: Vec<Vec<f64>> = deltas.clone();
        for j in (0..opts.j_max as usize).rev() {
            let (upper, lower) = subtree_max.split_at_mut(j + 1);
            let cur = &mut upper[j];
            for (idx, v) in lower[0].iter().enumerate() {
                let p = CubeIndex::from_linear(j as u32 + 1, idx, d).parent().expect("non-root").linear();
                if *v > cur[p] {
                    cur[p] = *v;
                }
            }
        }
        let mut sorted: Vec<f64> = subtree_max.iter().flatten().copied().collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        Ok(DeltaPyramid { dim: d, degree: fitter.degree(), j_max: opts.j_max, deltas, subtree_max, sorted, root_norm, tail })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    pub fn delta(&self, c: &CubeIndex) -> Option<f64> {
        self.deltas.get(c.j() as usize).map(|v| v[c.linear()])
    }

    /// All δ at scale j, indexed linearly.
    pub fn level(&self, j: u32) -> &[f64] {
        &self.deltas[j as usize]
    }

    pub fn delta_max(&self) -> f64 {
        self.sorted.first().copied().unwrap_or(0.0)
    }

    /// Largest δ at the capped scale; thresholds below it hit the cap.
    pub fn cap_delta(&self) -> f64 {
        self.deltas[self.j_max as usize].iter().fold(0.0, |m: f64, v| m.max(*v))
    }

    /// ‖p_root‖; the energy identity reads ‖f‖² = ‖p_root‖² + Σδ² + tail.
    pub fn root_norm(&self) -> f64 {
        self.root_norm
    }

    pub fn tail(&self) -> Option<f64> {
        self.tail
    }

    pub fn sum_delta_sq(&self) -> f64 {
        self.deltas.iter().flatten().map(|v| v * v).sum()
    }

    /// Σ δ² over nodes outside T(η) (scales ≤ J_max).
    pub fn outside_energy(&self, eta: f64) -> f64 {
        let mut s = 0.0;
        for (dj, mj) in self.deltas.iter().zip(&self.subtree_max) {
            for (dv, mv) in dj.iter().zip(mj) {
                if !(*mv > eta) {
                    s += dv * dv;
                }
            }
        }
        s
    }

    /// #T(f, η) without building the tree.
    pub fn tree_size(&self, eta: f64) -> usize {
        self.sorted.partition_point(|v| *v > eta)
    }

    /// Largest threshold whose tree has at least `n` nodes, if one exists.
    ///
    /// Ties among subtree maxima can make the returned tree larger than `n`.
    pub fn eta_for_size(&self, n: usize) -> Option<f64> {
        let n = n.max(1);
        let pivot = *self.sorted.get(n - 1)?;
        if !(pivot > 0.0) {
            return None;
        }
        let below = self.sorted[n..].iter().find(|v| **v < pivot).copied().unwrap_or(0.0);
        Some(if below > 0.0 { below } else { pivot / 2.0 })
    }

    pub fn depth_capped(&self, eta: f64) -> bool {
        self.cap_delta() > eta
    }

    pub fn truncate(&self, eta: f64) -> TruncationResult {
        let d = self.dim;
        let mut nodes = Vec::new();
        let root = CubeIndex::root(d);
        if self.subtree_max[0][0] > eta {
            let mut stack = vec![root];
            while let Some(c) = stack.pop() {
                nodes.push(c);
                if c.j() < self.j_max {
                    for ch in c.children() {
                        if self.subtree_max[ch.j() as usize][ch.linear()] > eta {
                            stack.push(ch);
                        }
                    }
                }
            }
        }
        let tree = TruncatedTree::from_nodes(d, nodes).expect("subtree maxima give a proper subtree");
        TruncationResult { tree, eta, depth_capped: self.depth_capped(eta), j_max: self.j_max }
    }
}

/// Per-level bucketing of empirical points so cell rules cost O(points in cell).
enum Buckets {
    Empirical { dim: usize, points: Vec<f64>, weights: Vec<f64> },
}

struct LevelRules<'a> {
    j: u32,
    dim: usize,
    order: Vec<usize>,
    offsets: Vec<usize>,
    src: &'a Buckets,
}

impl Buckets {
    fn new(m: &Measure) -> Option<Self> {
        match m {
            Measure::Empirical { dim, points, weights } => {
                Some(Buckets::Empirical { dim: *dim, points: points.clone(), weights: weights.clone() })
            }
            _ => None,
        }
    }

    fn level(&self, j: u32) -> LevelRules<'_> {
        let Buckets::Empirical { dim, points, .. } = self;
        let n = points.len() / dim;
        let keys: Vec<usize> = (0..n).map(|i| CubeIndex::locate(&points[i * dim..(i + 1) * dim], j).linear()).collect();
        let cells = 1usize << (j as usize * dim);
        let mut offsets = vec![0usize; cells + 1];
        for &k in &keys {
            offsets[k + 1] += 1;
        }
        for i in 0..cells {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut order = vec![0usize; n];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k]] = i;
            fill[k] += 1;
        }
        LevelRules { j, dim: *dim, order, offsets, src: self }
    }
}

impl LevelRules<'_> {
    fn rule(&self, c: &CubeIndex) -> CellRule {
        debug_assert_eq!(c.j(), self.j);
        let Buckets::Empirical { points, weights, .. } = self.src;
        let k = c.linear();
        let d = self.dim;
        let mut r = CellRule { dim: d, ..Default::default() };
        for &i in &self.order[self.offsets[k]..self.offsets[k + 1]] {
            r.points.extend_from_slice(&points[i * d..(i + 1) * d]);
            r.weights.push(weights[i]);
        }
        r
    }
}

#[derive(Clone, Debug)]
pub struct TruncationResult {
    pub tree: TruncatedTree,
    pub eta: f64,
    /// A node at the capped scale still exceeds η: the tree is cut short.
    pub depth_capped: bool,
    pub j_max: u32,
}

impl TruncationResult {
    pub fn warning(&self) -> Option<String> {
        self.depth_capped
            .then(|| format!("depth cap reached: a node at J_max = {} has delta > {:e}", self.j_max, self.eta))
    }
}

/// T(f, η) explored breadth-first over every node up to `j_max`.
pub fn truncate_tree<F: Target + ?Sized>(
    f: &F,
    eta: f64,
    theta: usize,
    measure: &Measure,
    quad: &QuadratureSpec,
    j_max: u32,
) -> Result<TruncationResult> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {eta}")));
    }
    let fitter = Fitter::new(measure, theta, quad)?;
    let pyr = DeltaPyramid::build(f, &fitter, PyramidOptions::for_dim(measure.dim()).j_max(j_max))?;
    Ok(pyr.truncate(eta))
}

/// One fitted patch per cell of a partition.
#[derive(Clone, Debug)]
pub struct PiecewisePolynomial {
    pub partition: AdaptivePartition,
    pub patches: Vec<PolynomialPatch>,
    pub source_eta: f64,
    pub source_tree_size: usize,
    lookup: HashMap<CubeIndex, usize>,
}

impl PartialEq for PiecewisePolynomial {
    fn eq(&self, o: &Self) -> bool {
        self.partition == o.partition
            && self.patches == o.patches
            && self.source_eta.to_bits() == o.source_eta.to_bits()
            && self.source_tree_size == o.source_tree_size
    }
}

#[derive(Serialize, Deserialize)]
struct PiecewiseJson {
    dim: usize,
    degree: usize,
    source_eta: f64,
    source_tree_size: usize,
    cells: Vec<CubeIndex>,
    patches: Vec<serde_json::Value>,
}

impl PiecewisePolynomial {
    pub fn new(partition: AdaptivePartition, patches: Vec<PolynomialPatch>, source_eta: f64, source_tree_size: usize) -> Result<Self> {
        if patches.len() != partition.len() {
            return Err(Error::InvalidArgument("one patch per cell required".into()));
        }
        if let Some((c, p)) = partition.cells().iter().zip(&patches).find(|(c, p)| **c != p.cube) {
            return Err(Error::InvalidArgument(format!("patch for {} attached to cell {c}", p.cube)));
        }
        let lookup = partition.index_map();
        Ok(PiecewisePolynomial { partition, patches, source_eta, source_tree_size, lookup })
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn degree(&self) -> usize {
        self.patches.first().map_or(0, |p| p.degree)
    }

    pub fn patch_at(&self, x: &[f64]) -> &PolynomialPatch {
        let i = self.partition.locate_with(&self.lookup, x).expect("partition tiles the cube");
        &self.patches[i]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.patch_at(x).eval(x)
    }

    pub fn finest_scale(&self) -> u32 {
        self.partition.finest_scale()
    }

    /// Largest |a_α| over all patches (the R_p of the fit).
    pub fn coeff_bound(&self) -> f64 {
        self.patches.iter().map(|p| p.max_abs_coeff()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let j = PiecewiseJson {
            dim: self.dim(),
            degree: self.degree(),
            source_eta: self.source_eta,
            source_tree_size: self.source_tree_size,
            cells: self.partition.cells().to_vec(),
            patches: self.patches.iter().map(|p| p.to_json_value()).collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: PiecewiseJson = serde_json::from_str(s)?;
        let partition = AdaptivePartition::new(j.dim, j.cells)?;
        let mut by_cube: HashMap<CubeIndex, PolynomialPatch> = HashMap::new();
        for v in &j.patches {
            let p = PolynomialPatch::from_json_value(v)?;
            by_cube.insert(p.cube, p);
        }
        let patches = partition
            .cells()
            .iter()
            .map(|c| by_cube.remove(c).ok_or_else(|| Error::Format(format!("no patch for cell {c}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(partition, patches, j.source_eta, j.source_tree_size)
    }
}

/// p_Λ: fit every outer leaf of `tree`.
pub fn build_adaptive_approximant<F: Target + ?Sized>(
    f: &F,
    tree: &TruncatedTree,
    fitter: &Fitter,
    source_eta: f64,
    exec: Exec,
) -> Result<PiecewisePolynomial> {
    let partition = tree.outer_leaves();
    let patches = exec.map(partition.cells(), |c| fitter.fit(f, c));
    PiecewisePolynomial::new(partition, patches, source_eta, tree.len())
}

/// Fit the uniform scale-`depth` partition (baseline for comparisons).
pub fn uniform_approximant<F: Target + ?Sized>(f: &F, depth: u32, fitter: &Fitter, exec: Exec) -> Result<PiecewisePolynomial> {
    let tree = TruncatedTree::uniform(fitter.dim(), depth);
    build_adaptive_approximant(f, &tree, fitter, f64::NAN, exec)
}

/// ‖f - p_Λ‖²_{L²(ρ)} by cellwise quadrature.
pub fn approx_error_sq<F: Target + ?Sized>(f: &F, pp: &PiecewisePolynomial, fitter: &Fitter, exec: Exec) -> f64 {
    exec.map(&pp.patches, |p| fitter.squared_residual(f, p)).iter().sum()
}

/// ‖f - p_Λ‖_{L²(ρ)}.
pub fn approx_error<F: Target + ?Sized>(f: &F, pp: &PiecewisePolynomial, fitter: &Fitter, exec: Exec) -> f64 {
    approx_error_sq(f, pp, fitter, exec).sqrt()
}

/// m = 2/(2s+1).
pub fn rate_exponent(s: f64) -> f64 {
    2.0 / (2.0 * s + 1.0)
}

/// C_s = 2^m Σ_{ℓ≥0} 2^{ℓ(m-2)} = 2^m / (1 - 2^{m-2}).
pub fn error_bound_constant(s: f64) -> f64 {
    let m = rate_exponent(s);
    m.exp2() / (1.0 - (m - 2.0).exp2())
}

/// `points` geometric thresholds from `top` down to `top·10^-decades`.
pub fn eta_grid(top: f64, points: usize, decades: f64) -> Vec<f64> {
    if points == 1 {
        return vec![top];
    }
    (0..points)
        .map(|i| top * 10f64.powf(-decades * i as f64 / (points - 1) as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormRow {
    pub eta: f64,
    pub tree_size: usize,
    pub eta_m_t: f64,
    pub depth_capped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormCurve {
    pub s: f64,
    pub m: f64,
    pub j_max: u32,
    pub rows: Vec<SeminormRow>,
    /// (max over uncapped grid points of η^m #T)^{1/m}
    pub seminorm_estimate: f64,
    /// The maximum sits at the smallest usable threshold.
    pub not_converged: bool,
    pub s_hat: Option<f64>,
}

impl SeminormCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,tree_size,eta_m_T\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{},{:e}\n", r.eta, r.tree_size, r.eta_m_t));
        }
        out
    }

    /// C_s |f|^m η^{2-m}, the certified bound on the squared error at η.
    pub fn error_bound(&self, eta: f64) -> f64 {
        error_bound_constant(self.s) * self.seminorm_estimate.powf(self.m) * eta.powf(2.0 - self.m)
    }
}

pub fn estimate_seminorm(pyr: &DeltaPyramid, s: f64, grid: &[f64]) -> Result<SeminormCurve> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("rate must be positive, got {s}")));
    }
    let m = rate_exponent(s);
    let mut rows: Vec<SeminormRow> = grid
        .iter()
        .map(|&eta| {
            let t = pyr.tree_size(eta);
            SeminormRow { eta, tree_size: t, eta_m_t: eta.powf(m) * t as f64, depth_capped: pyr.depth_capped(eta) }
        })
        .collect();
    rows.sort_by(|a, b| b.eta.total_cmp(&a.eta));
    let usable: Vec<&SeminormRow> = rows.iter().filter(|r| !r.depth_capped).collect();
    let (arg, best) = usable
        .iter()
        .enumerate()
        .fold((0usize, 0.0f64), |(ai, av), (i, r)| if r.eta_m_t > av { (i, r.eta_m_t) } else { (ai, av) });
    let not_converged = best > 0.0 && arg + 1 == usable.len();
    let s_hat = estimate_rate_s(pyr, grid).ok().map(|r| r.s_hat);
    Ok(SeminormCurve { s, m, j_max: pyr.j_max(), rows, seminorm_estimate: best.powf(1.0 / m), not_converged, s_hat })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub s_hat: f64,
    pub s_stderr: f64,
    /// slope of log #T against log(1/η)
    pub slope: f64,
    pub slope_stderr: f64,
    pub points_used: usize,
}

/// Least-squares fit of ordinary lines: (slope, intercept, slope stderr).
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, icept, se)
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// s_hat from the slope of log #T against log(1/η), skipping capped thresholds.
pub fn estimate_rate_s(pyr: &DeltaPyramid, grid: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&eta| !pyr.depth_capped(eta))
        .filter_map(|&eta| {
            let t = pyr.tree_size(eta);
            (t > 0).then(|| ((1.0 / eta).ln(), (t as f64).ln()))
        })
        .collect();
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.1).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::InsufficientData(format!("{} distinct tree sizes, need 5", distinct.len())));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, _, se) = ols(&x, &y);
    let s_hat = (2.0 / slope - 1.0) / 2.0;
    Ok(RateFit { s_hat, s_stderr: se / (slope * slope), slope, slope_stderr: se, points_used: x.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub eta: f64,
    pub tree_size: usize,
    pub cells: usize,
    pub error_sq: f64,
    pub depth_capped: bool,
}

/// (η, #T, #Λ, ‖f - p_Λ‖²) along a threshold grid.
pub fn rate_curve<F: Target + ?Sized>(f: &F, pyr: &DeltaPyramid, fitter: &Fitter, grid: &[f64], exec: Exec) -> Result<Vec<RatePoint>> {
    grid.iter()
        .map(|&eta| {
            let tr = pyr.truncate(eta);
            let pp = build_adaptive_approximant(f, &tr.tree, fitter, eta, exec)?;
            Ok(RatePoint {
                eta,
                tree_size: tr.tree.len(),
                cells: pp.partition.len(),
                error_sq: approx_error_sq(f, &pp, fitter, exec),
                depth_capped: tr.depth_capped,
            })
        })
        .collect()
}

/// Slope of log error² against log #T over uncapped points with a non-empty tree.
pub fn rate_law_slope(points: &[RatePoint]) -> Result<(f64, f64)> {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| !p.depth_capped && p.tree_size > 0 && p.error_sq > 0.0)
        .map(|p| ((p.tree_size as f64).ln(), p.error_sq.ln()))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable points", x.len())));
    }
    let (slope, _, se) = ols(&x, &y);
    Ok((slope, se))
}
