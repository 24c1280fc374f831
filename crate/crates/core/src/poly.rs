//! Best local polynomial fits on dyadic cubes and their refinement quantities.
//!
//! Patches are stored in the scaled monomial basis ((x - r) / 2^-j)^α of their
//! cube. Fitting always goes through an orthonormal basis obtained by
//! Gram–Schmidt on those monomials under the cube's integration rule.

use serde::{Deserialize, Serialize};

use crate::dyadic::{CubeIndex, MAX_DIM};
use crate::error::{Error, Result};
use crate::measure::{CellRule, Measure, QuadratureKind, QuadratureSpec, RuleBuilder, MASS_FLOOR};

pub type MultiIndex = [u32; MAX_DIM];

/// Relative pivot size below which a monomial counts as linearly dependent.
pub const PIVOT_TOL: f64 = 1e-12;

/// Exponents with |α| ≤ θ, ordered by total degree and then lexicographically
/// with the first coordinate most significant (x1 before x2 at each degree).
pub fn monomials(d: usize, theta: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for deg in 0..=theta as u32 {
        let mut cur = [0u32; MAX_DIM];
        push_degree(d, 0, deg, &mut cur, &mut out);
    }
    out
}

fn push_degree(d: usize, axis: usize, left: u32, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
    if axis == d - 1 {
        cur[axis] = left;
        out.push(*cur);
        cur[axis] = 0;
        return;
    }
    for e in (0..=left).rev() {
        cur[axis] = e;
        push_degree(d, axis + 1, left - e, cur, out);
    }
    cur[axis] = 0;
}

/// n_p = C(θ + d, d).
pub fn basis_size(d: usize, theta: usize) -> usize {
    let mut n = 1usize;
    for i in 1..=d {
        n = n * (theta + i) / i;
    }
    n
}

/// Values u^α for every monomial, given u in the cube's scaled coordinates.
pub(crate) fn monomial_values(alphas: &[MultiIndex], theta: usize, u: &[f64], out: &mut [f64]) {
    let d = u.len();
    let mut pw = [[1.0f64; 8]; MAX_DIM];
    for l in 0..d {
        for e in 1..=theta.min(7) {
            pw[l][e] = pw[l][e - 1] * u[l];
        }
    }
    for (o, a) in out.iter_mut().zip(alphas) {
        let mut v = 1.0;
        for l in 0..d {
            let e = a[l] as usize;
            v *= if e < 8 { pw[l][e] } else { u[l].powi(e as i32) };
        }
        *o = v;
    }
}

fn scaled(cube: &CubeIndex, x: &[f64], u: &mut [f64; MAX_DIM]) {
    let r = cube.anchor();
    let inv = (cube.j() as f64).exp2();
    for l in 0..x.len() {
        u[l] = (x[l] - r[l]) * inv;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchFlags {
    /// Cell mass below the floor; the patch is identically zero.
    pub degenerate: bool,
    /// Fewer independent monomials than n_p; minimum-norm coefficients returned.
    pub rank_deficient: bool,
}

/// Polynomial Σ_α a_α ((x - r)/2^-j)^α attached to a cube.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialPatch {
    pub cube: CubeIndex,
    pub degree: usize,
    /// Coefficients aligned with [`monomials`]`(d, degree)`.
    pub coeffs: Vec<f64>,
    pub coeff_bound: Option<f64>,
    pub flags: PatchFlags,
}

impl PolynomialPatch {
    pub fn zero(cube: CubeIndex, degree: usize) -> Self {
        PolynomialPatch {
            cube,
            degree,
            coeffs: vec![0.0; basis_size(cube.dim(), degree)],
            coeff_bound: None,
            flags: PatchFlags::default(),
        }
    }

    pub fn constant(cube: CubeIndex, degree: usize, c: f64) -> Self {
        let mut p = Self::zero(cube, degree);
        p.coeffs[0] = c;
        p
    }

    /// Build from (α, a_α) pairs; missing monomials get coefficient zero.
    pub fn from_terms(cube: CubeIndex, degree: usize, terms: &[(Vec<u32>, f64)]) -> Result<Self> {
        let d = cube.dim();
        let alphas = monomials(d, degree);
        let mut p = Self::zero(cube, degree);
        for (a, v) in terms {
            if a.len() != d {
                return Err(Error::DimMismatch { expected: d, got: a.len() });
            }
            let mut key = [0u32; MAX_DIM];
            key[..d].copy_from_slice(a);
            let pos = alphas
                .iter()
                .position(|b| *b == key)
                .ok_or_else(|| Error::InvalidArgument(format!("exponent {a:?} exceeds degree {degree}")))?;
            p.coeffs[pos] = *v;
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.cube.dim()
    }

    pub fn monomials(&self) -> Vec<MultiIndex> {
        monomials(self.dim(), self.degree)
    }

    /// Evaluate anywhere (the caller restricts to the cube).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut u = [0.0; MAX_DIM];
        scaled(&self.cube, x, &mut u);
        self.eval_scaled(&u[..x.len()])
    }

    pub fn eval_scaled(&self, u: &[f64]) -> f64 {
        let alphas = self.monomials();
        let mut vals = vec![0.0; alphas.len()];
        monomial_values(&alphas, self.degree, u, &mut vals);
        vals.iter().zip(&self.coeffs).map(|(v, a)| v * a).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }

    /// Whether every |a_α| respects the configured bound R_p.
    pub fn within_bound(&self) -> bool {
        self.coeff_bound.is_none_or(|r| self.max_abs_coeff() <= r)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let d = self.dim();
        let terms: Vec<serde_json::Value> = self
            .monomials()
            .iter()
            .zip(&self.coeffs)
            .map(|(a, v)| serde_json::json!([a[..d].to_vec(), v]))
            .collect();
        serde_json::json!({ "cube": self.cube, "degree": self.degree, "coeffs": terms })
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            cube: CubeIndex,
            degree: usize,
            coeffs: Vec<(Vec<u32>, f64)>,
        }
        let raw: Raw = serde_json::from_value(v.clone())?;
        Self::from_terms(raw.cube, raw.degree, &raw.coeffs)
    }
}

/// Orthonormal polynomials φ_ℓ = Σ_α b_{ℓ,α} ((x - r)/2^-j)^α on a cube.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    pub cube: CubeIndex,
    pub degree: usize,
    /// rank × n_p coefficient table, row-major; row ℓ only uses monomials up to its own.
    pub coeffs: Vec<f64>,
    pub rank: usize,
    /// Monomials found dependent on earlier ones.
    pub skipped: Vec<usize>,
    /// Orthonormal (Euclidean) basis of coefficient vectors representing the zero
    /// function under the measure; used for minimum-norm fits.
    null_space: Vec<Vec<f64>>,
}

impl OrthonormalBasis {
    pub fn n_p(&self) -> usize {
        basis_size(self.cube.dim(), self.degree)
    }

    pub fn row(&self, l: usize) -> &[f64] {
        let n = self.n_p();
        &self.coeffs[l * n..(l + 1) * n]
    }

    pub fn eval(&self, l: usize, x: &[f64]) -> f64 {
        let alphas = monomials(self.cube.dim(), self.degree);
        let mut u = [0.0; MAX_DIM];
        scaled(&self.cube, x, &mut u);
        let mut vals = vec![0.0; alphas.len()];
        monomial_values(&alphas, self.degree, &u[..x.len()], &mut vals);
        vals.iter().zip(self.row(l)).map(|(v, b)| v * b).sum()
    }

    /// Turn basis coordinates c_ℓ into a minimum-norm monomial coefficient vector.
    fn coefficients(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n_p();
        let mut a = vec![0.0; n];
        for (l, cl) in c.iter().enumerate() {
            for (ai, b) in a.iter_mut().zip(self.row(l)) {
                *ai += cl * b;
            }
        }
        for nv in &self.null_space {
            let t: f64 = a.iter().zip(nv).map(|(x, y)| x * y).sum();
            for (ai, v) in a.iter_mut().zip(nv) {
                *ai -= t * v;
            }
        }
        a
    }
}

/// Rank-revealing modified Gram–Schmidt on the monomials under `rule`.
fn gram_schmidt(cube: &CubeIndex, theta: usize, alphas: &[MultiIndex], rule: &CellRule) -> OrthonormalBasis {
    let n = alphas.len();
    let q = rule.len();
    let d = cube.dim();
    // weighted monomial columns: sqrt(w_i) u_i^α
    let mut cols = vec![vec![0.0; q]; n];
    let mut vals = vec![0.0; n];
    let mut u = [0.0; MAX_DIM];
    for (i, (x, w)) in rule.iter().enumerate() {
        scaled(cube, x, &mut u);
        monomial_values(alphas, theta, &u[..d], &mut vals);
        let sw = w.max(0.0).sqrt();
        for a in 0..n {
            cols[a][i] = sw * vals[a];
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut qs: Vec<Vec<f64>> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut skipped = Vec::new();
    let mut nulls: Vec<Vec<f64>> = Vec::new();
    for a in 0..n {
        let mut v = cols[a].clone();
        let orig = dot(&v, &v).sqrt();
        let mut row = vec![0.0; n];
        row[a] = 1.0;
        // two passes for orthogonality at the 1e-15 level
        let mut proj = vec![0.0; qs.len()];
        for _ in 0..2 {
            for (l, ql) in qs.iter().enumerate() {
                let t = dot(&v, ql);
                proj[l] += t;
                for (vi, qi) in v.iter_mut().zip(ql) {
                    *vi -= t * qi;
                }
                for (ri, bi) in row.iter_mut().zip(&rows[l]) {
                    *ri -= t * bi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if orig == 0.0 || norm <= PIVOT_TOL * orig {
            skipped.push(a);
            // row now represents (approximately) the zero function
            let mut nv = row;
            for m in &nulls {
                let t = dot(&nv, m);
                for (x, y) in nv.iter_mut().zip(m) {
                    *x -= t * y;
                }
            }
            let nn = dot(&nv, &nv).sqrt();
            if nn > 0.0 {
                nv.iter_mut().for_each(|x| *x /= nn);
                nulls.push(nv);
            }
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        row.iter_mut().for_each(|x| *x /= norm);
        qs.push(v);
        rows.push(row);
    }
    OrthonormalBasis {
        cube: *cube,
        degree: theta,
        rank: rows.len(),
        coeffs: rows.concat(),
        skipped,
        null_space: nulls,
    }
}

/// δ_{j,k} with the fits that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementRecord {
    pub cube: CubeIndex,
    pub delta: f64,
    pub parent_patch: PolynomialPatch,
    pub child_patches: Vec<PolynomialPatch>,
}

/// Reference-cube tables for Lebesgue measure with tensor-Gauss rules, where
/// projection onto polynomials is the same linear map on every cube.
struct LebesgueTables {
    /// n_p × n_q projection: a = P f(points)
    projection: Vec<f64>,
    /// n_p × n_q monomial values at the reference nodes
    own: Vec<f64>,
    /// per child position: n_p × n_q parent-coordinate monomial values at the child's nodes
    in_parent: Vec<Vec<f64>>,
    ref_weights: Vec<f64>,
    ref_points: Vec<f64>,
}

/// Local polynomial fitter of fixed degree under one measure and quadrature rule.
pub struct Fitter<'a> {
    d: usize,
    theta: usize,
    alphas: Vec<MultiIndex>,
    rules: RuleBuilder<'a>,
    tables: Option<LebesgueTables>,
}

impl<'a> Fitter<'a> {
    pub fn new(measure: &'a Measure, theta: usize, quad: &QuadratureSpec) -> Result<Self> {
        if theta > 7 {
            return Err(Error::InvalidArgument(format!("degree {theta} unsupported")));
        }
        let d = measure.dim();
        let alphas = monomials(d, theta);
        let rules = RuleBuilder::new(measure, quad)?;
        let tables = match (measure, &quad.kind) {
            (Measure::Lebesgue { .. }, QuadratureKind::TensorGauss { .. }) => {
                let (pts, wts) = rules.reference().expect("gauss reference").clone();
                Some(lebesgue_tables(d, theta, &alphas, pts, wts)?)
            }
            _ => None,
        };
        Ok(Fitter { d, theta, alphas, rules, tables })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.theta
    }

    pub fn measure(&self) -> &Measure {
        self.rules.measure()
    }

    pub fn n_p(&self) -> usize {
        self.alphas.len()
    }

    pub fn rule(&self, cube: &CubeIndex) -> CellRule {
        self.rules.rule(cube)
    }

    /// Orthonormal basis on `cube`; errors on degenerate mass or dependent monomials.
    pub fn basis(&self, cube: &CubeIndex) -> Result<OrthonormalBasis> {
        self.check_cube(cube)?;
        let rule = self.rule(cube);
        if rule.mass() < MASS_FLOOR {
            return Err(Error::DegenerateCell(cube.to_string()));
        }
        let b = gram_schmidt(cube, self.theta, &self.alphas, &rule);
        if let Some(&idx) = b.skipped.first() {
            return Err(Error::RankDeficient { cell: cube.to_string(), pivot: 0.0, index: idx });
        }
        Ok(b)
    }

    fn check_cube(&self, cube: &CubeIndex) -> Result<()> {
        if cube.dim() != self.d {
            return Err(Error::DimMismatch { expected: self.d, got: cube.dim() });
        }
        Ok(())
    }

    /// Best L²(ρ) polynomial on `cube`.
    pub fn fit<F: Fn(&[f64]) -> f64 + ?Sized>(&self, f: &F, cube: &CubeIndex) -> PolynomialPatch {
        if let Some(t) = &self.tables {
            return self.fit_fast(t, f, cube);
        }
        let rule = self.rule(cube);
        self.fit_with_rule(f, cube, &rule)
    }

    fn fit_fast<F: Fn(&[f64]) -> f64 + ?Sized>(&self, t: &LebesgueTables, f: &F, cube: &CubeIndex) -> PolynomialPatch {
        let d = self.d;
        let h = cube.side();
        let r = cube.anchor();
        let nq = t.ref_weights.len();
        let mut x = [0.0; MAX_DIM];
        let mut coeffs = vec![0.0; self.alphas.len()];
        for i in 0..nq {
            for l in 0..d {
                x[l] = r[l] + h * t.ref_points[i * d + l];
            }
            let fi = f(&x[..d]);
            for (a, c) in coeffs.iter_mut().enumerate() {
                *c += t.projection[a * nq + i] * fi;
            }
        }
        PolynomialPatch { cube: *cube, degree: self.theta, coeffs, coeff_bound: None, flags: PatchFlags::default() }
    }

    /// Fit against an explicit rule (used when the caller already built it).
    pub fn fit_with_rule<F: Fn(&[f64]) -> f64 + ?Sized>(&self, f: &F, cube: &CubeIndex, rule: &CellRule) -> PolynomialPatch {
        let mut patch = PolynomialPatch::zero(*cube, self.theta);
        if rule.mass() < MASS_FLOOR {
            patch.flags.degenerate = true;
            return patch;
        }
        let basis = gram_schmidt(cube, self.theta, &self.alphas, rule);
        let mut c = vec![0.0; basis.rank];
        let mut vals = vec![0.0; self.alphas.len()];
        let mut u = [0.0; MAX_DIM];
        for (x, w) in rule.iter() {
            scaled(cube, x, &mut u);
            monomial_values(&self.alphas, self.theta, &u[..self.d], &mut vals);
            let fw = f(x) * w;
            for (l, cl) in c.iter_mut().enumerate() {
                let phi: f64 = vals.iter().zip(basis.row(l)).map(|(v, b)| v * b).sum();
                *cl += fw * phi;
            }
        }
        patch.coeffs = basis.coefficients(&c);
        patch.flags.rank_deficient = !basis.skipped.is_empty();
        patch
    }

    /// ∫_cube (g - p)² dρ over the patch's cube.
    pub fn squared_residual<F: Fn(&[f64]) -> f64 + ?Sized>(&self, g: &F, patch: &PolynomialPatch) -> f64 {
        let rule = self.rule(&patch.cube);
        rule.integrate(|x| {
            let e = g(x) - patch.eval(x);
            e * e
        })
    }

    /// ‖Σ_children p_child χ_child - p_parent‖²_{L²(ρ)} given already fitted patches.
    pub fn split_energy(&self, parent: &PolynomialPatch, children: &[PolynomialPatch]) -> f64 {
        if let Some(t) = &self.tables {
            let nq = t.ref_weights.len();
            let vol = children[0].cube.volume();
            let np = self.alphas.len();
            let mut s = 0.0;
            for (pos, ch) in children.iter().enumerate() {
                let tab = &t.in_parent[pos];
                for i in 0..nq {
                    let mut diff = 0.0;
                    for a in 0..np {
                        diff += ch.coeffs[a] * t.own[a * nq + i] - parent.coeffs[a] * tab[a * nq + i];
                    }
                    s += t.ref_weights[i] * diff * diff;
                }
            }
            return vol * s;
        }
        children
            .iter()
            .map(|ch| {
                let rule = self.rule(&ch.cube);
                rule.integrate(|x| {
                    let e = ch.eval(x) - parent.eval(x);
                    e * e
                })
            })
            .sum()
    }

    /// Refinement quantity of `cube`: the norm of the change between the parent fit and
    /// the children fits. The root is treated like every other node; its own fit's
    /// norm is available from [`Fitter::root_norm`].
    pub fn refinement<F: Fn(&[f64]) -> f64 + ?Sized>(&self, f: &F, cube: &CubeIndex) -> RefinementRecord {
        let parent = self.fit(f, cube);
        let children: Vec<PolynomialPatch> = cube.children().iter().map(|c| self.fit(f, c)).collect();
        let delta = self.split_energy(&parent, &children).max(0.0).sqrt();
        RefinementRecord { cube: *cube, delta, parent_patch: parent, child_patches: children }
    }

    /// ‖p_root‖_{L²(ρ)}.
    pub fn root_norm<F: Fn(&[f64]) -> f64 + ?Sized>(&self, f: &F) -> f64 {
        let root = CubeIndex::root(self.d);
        let p = self.fit(f, &root);
        self.rule(&root).integrate(|x| p.eval(x).powi(2)).sqrt()
    }
}

fn lebesgue_tables(d: usize, theta: usize, alphas: &[MultiIndex], pts: Vec<f64>, wts: Vec<f64>) -> Result<LebesgueTables> {
    let root = CubeIndex::root(d);
    let rule = CellRule { dim: d, points: pts.clone(), weights: wts.clone() };
    let basis = gram_schmidt(&root, theta, alphas, &rule);
    if !basis.skipped.is_empty() {
        return Err(Error::InvalidQuadrature(format!("Gauss rule too coarse for degree {theta}")));
    }
    let np = alphas.len();
    let nq = wts.len();
    let mut own = vec![0.0; np * nq];
    let mut vals = vec![0.0; np];
    for i in 0..nq {
        monomial_values(alphas, theta, &pts[i * d..(i + 1) * d], &mut vals);
        for a in 0..np {
            own[a * nq + i] = vals[a];
        }
    }
    // P[α][i] = Σ_ℓ b_{ℓα} w_i φ_ℓ(ξ_i)
    let mut projection = vec![0.0; np * nq];
    for i in 0..nq {
        for l in 0..np {
            let phi: f64 = (0..np).map(|a| basis.row(l)[a] * own[a * nq + i]).sum();
            for a in 0..np {
                projection[a * nq + i] += basis.row(l)[a] * wts[i] * phi;
            }
        }
    }
    let mut in_parent = Vec::with_capacity(1 << d);
    let mut u = [0.0; MAX_DIM];
    for pos in 0..1usize << d {
        let mut tab = vec![0.0; np * nq];
        for i in 0..nq {
            for l in 0..d {
                u[l] = 0.5 * (((pos >> l) & 1) as f64 + pts[i * d + l]);
            }
            monomial_values(alphas, theta, &u[..d], &mut vals);
            for a in 0..np {
                tab[a * nq + i] = vals[a];
            }
        }
        in_parent.push(tab);
    }
    Ok(LebesgueTables { projection, own, in_parent, ref_weights: wts, ref_points: pts })
}
