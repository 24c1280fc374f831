//! Named target functions with their predicted regularity, and box counting for
//! discontinuity sets.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dyadic::{CubeIndex, MAX_DIM};
use crate::error::{Error, Result};
use crate::measure::Measure;

/// Regularity class a target is registered under; `r` is the Hölder index of
/// the smooth pieces (infinite for analytic pieces).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum Regularity {
    /// r-Hölder on the whole cube: s = r/d.
    Smooth { r: f64 },
    /// 1D piecewise r-Hölder with finitely many jumps: s = r.
    PiecewiseLine { r: f64, jumps: usize },
    /// Piecewise r-Hölder with a jump set of Minkowski dimension d-1:
    /// s = min(r/d, 1/(2(d-1))).
    PiecewiseBoundary { r: f64 },
    /// r-Hölder where the measure lives, arbitrary elsewhere: s = r/d.
    IrregularOffSupport { r: f64 },
}

/// Closed-box intersection test for a discontinuity set: (lower, upper) corners.
pub type BoundaryOracle = fn(&[f64], &[f64]) -> bool;

#[derive(Clone, Copy)]
pub struct TargetSpec {
    pub name: &'static str,
    pub dim: usize,
    pub description: &'static str,
    pub regularity: Regularity,
    /// Sup-norm bound R.
    pub sup_bound: f64,
    pub eval: fn(&[f64]) -> f64,
    pub boundary: Option<BoundaryOracle>,
    /// Name of the measure the target is meant to be paired with (Lebesgue if None).
    pub measure: Option<&'static str>,
}

impl std::fmt::Debug for TargetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TargetSpec({}, d={})", self.name, self.dim)
    }
}

impl TargetSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Predicted s for fits of degree θ; smoothness beyond θ+1 is not visible.
    pub fn predicted_s(&self, theta: usize) -> f64 {
        let cap = |r: f64| r.min(theta as f64 + 1.0);
        let d = self.dim as f64;
        match self.regularity {
            Regularity::Smooth { r } | Regularity::IrregularOffSupport { r } => cap(r) / d,
            Regularity::PiecewiseLine { r, .. } => cap(r),
            Regularity::PiecewiseBoundary { r } => (cap(r) / d).min(1.0 / (2.0 * (d - 1.0))),
        }
    }

    /// The measure the target is registered with.
    pub fn default_measure(&self) -> Measure {
        match self.measure {
            Some("left-half") => left_half_density(self.dim),
            _ => Measure::lebesgue(self.dim),
        }
    }
}

/// Density 2 on {x_1 < 1/2} and 0 elsewhere (C_rho = 2).
pub fn left_half_density(d: usize) -> Measure {
    Measure::density(d, "left-half", 2.0, |x| if x[0] < 0.5 { 2.0 } else { 0.0 }).expect("valid density")
}

fn s2(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

fn onedisc(x: &[f64]) -> f64 {
    let t = x[0];
    if t < 0.5 {
        s2(t) + 1.0
    } else {
        s2(t) - 1.0
    }
}

fn threedisc(x: &[f64]) -> f64 {
    let t = x[0];
    let off = if t < 0.25 {
        -1.0
    } else if t < 0.5 {
        1.0
    } else if t < 0.75 {
        -1.0
    } else {
        1.0
    };
    s2(t) + off
}

fn fivedisc(x: &[f64]) -> f64 {
    const OFF: [f64; 6] = [-1.0, 0.0, 1.0, -1.0, 0.0, 1.0];
    let t = x[0];
    let i = ((t * 6.0).floor() as usize).min(5);
    s2(t) + OFF[i]
}

fn sevendisc(x: &[f64]) -> f64 {
    const OFF: [f64; 8] = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0, -1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
    let t = x[0];
    let i = ((t * 8.0).floor() as usize).min(7);
    s2(t) + OFF[i]
}

fn sin1d(x: &[f64]) -> f64 {
    s2(x[0])
}

const DISK_C: [f64; 2] = [0.5, 0.5];
const DISK_R: f64 = 0.25;

fn in_disk(x: &[f64]) -> bool {
    (x[0] - DISK_C[0]).powi(2) + (x[1] - DISK_C[1]).powi(2) <= DISK_R * DISK_R
}

fn disk2d(x: &[f64]) -> f64 {
    if in_disk(x) {
        1.0
    } else {
        0.0
    }
}

fn diskjump2d(x: &[f64]) -> f64 {
    let smooth = 0.5 * (2.0 * PI * (x[0] + 0.5 * x[1])).sin();
    if in_disk(x) {
        smooth + 0.5
    } else {
        smooth - 0.5
    }
}

fn smooth2d(x: &[f64]) -> f64 {
    (2.0 * PI * x[0]).sin() * (PI * x[1]).cos()
}

/// Smooth on x < 0.6, a ±1 comb of width 1/64 beyond it. The paired density
/// lives on x < 1/2, so the comb is invisible to the fit.
fn offsupport1d(x: &[f64]) -> f64 {
    let t = x[0];
    if t < 0.6 {
        s2(t)
    } else if ((t * 64.0).floor() as i64) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn points_in(lo: &[f64], hi: &[f64], pts: &[f64]) -> bool {
    pts.iter().any(|&t| lo[0] <= t && t <= hi[0])
}

fn onedisc_jumps(lo: &[f64], hi: &[f64]) -> bool {
    points_in(lo, hi, &[0.5])
}

fn threedisc_jumps(lo: &[f64], hi: &[f64]) -> bool {
    points_in(lo, hi, &[0.25, 0.5, 0.75])
}

fn fivedisc_jumps(lo: &[f64], hi: &[f64]) -> bool {
    points_in(lo, hi, &[1.0 / 6.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 5.0 / 6.0])
}

fn sevendisc_jumps(lo: &[f64], hi: &[f64]) -> bool {
    points_in(lo, hi, &[0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875])
}

/// Closed box meets the circle |x - c| = r.
pub fn circle_meets_box(lo: &[f64], hi: &[f64]) -> bool {
    let mut near = 0.0;
    let mut far = 0.0;
    for l in 0..2 {
        let c = DISK_C[l];
        let dn = if c < lo[l] {
            lo[l] - c
        } else if c > hi[l] {
            c - hi[l]
        } else {
            0.0
        };
        let df = (c - lo[l]).abs().max((hi[l] - c).abs());
        near += dn * dn;
        far += df * df;
    }
    near <= DISK_R * DISK_R && DISK_R * DISK_R <= far
}

const REGISTRY: &[TargetSpec] = &[
    TargetSpec {
        name: "onedisc",
        dim: 1,
        description: "sin(2πx) ± 1 with one jump at 1/2",
        regularity: Regularity::PiecewiseLine { r: f64::INFINITY, jumps: 1 },
        sup_bound: 2.0,
        eval: onedisc,
        boundary: Some(onedisc_jumps),
        measure: None,
    },
    TargetSpec {
        name: "threedisc",
        dim: 1,
        description: "sin(2πx) with offsets -1,+1,-1,+1 on quarters",
        regularity: Regularity::PiecewiseLine { r: f64::INFINITY, jumps: 3 },
        sup_bound: 2.0,
        eval: threedisc,
        boundary: Some(threedisc_jumps),
        measure: None,
    },
    TargetSpec {
        name: "fivedisc",
        dim: 1,
        description: "sin(2πx) with offsets -1,0,+1,-1,0,+1 on sixths (repaired branch list)",
        regularity: Regularity::PiecewiseLine { r: f64::INFINITY, jumps: 5 },
        sup_bound: 2.0,
        eval: fivedisc,
        boundary: Some(fivedisc_jumps),
        measure: None,
    },
    TargetSpec {
        name: "sevendisc",
        dim: 1,
        description: "sin(2πx) with offsets -1,-1/3,+1/3,+1 repeated on eighths",
        regularity: Regularity::PiecewiseLine { r: f64::INFINITY, jumps: 7 },
        sup_bound: 2.0,
        eval: sevendisc,
        boundary: Some(sevendisc_jumps),
        measure: None,
    },
    TargetSpec {
        name: "sin1d",
        dim: 1,
        description: "sin(2πx)",
        regularity: Regularity::Smooth { r: f64::INFINITY },
        sup_bound: 1.0,
        eval: sin1d,
        boundary: None,
        measure: None,
    },
    TargetSpec {
        name: "smooth2d",
        dim: 2,
        description: "sin(2πx1) cos(πx2)",
        regularity: Regularity::Smooth { r: f64::INFINITY },
        sup_bound: 1.0,
        eval: smooth2d,
        boundary: None,
        measure: None,
    },
    TargetSpec {
        name: "disk2d",
        dim: 2,
        description: "indicator of the disk of radius 1/4 centred at (1/2,1/2)",
        regularity: Regularity::PiecewiseBoundary { r: f64::INFINITY },
        sup_bound: 1.0,
        eval: disk2d,
        boundary: Some(circle_meets_box),
        measure: None,
    },
    TargetSpec {
        name: "diskjump2d",
        dim: 2,
        description: "smooth wave with a unit jump across the circle of radius 1/4",
        regularity: Regularity::PiecewiseBoundary { r: f64::INFINITY },
        sup_bound: 1.0,
        eval: diskjump2d,
        boundary: Some(circle_meets_box),
        measure: None,
    },
    TargetSpec {
        name: "offsupport1d",
        dim: 1,
        description: "sin(2πx) on x<0.6, a ±1 comb beyond; paired with density 2 on [0,1/2)",
        regularity: Regularity::IrregularOffSupport { r: f64::INFINITY },
        sup_bound: 1.0,
        eval: offsupport1d,
        boundary: None,
        measure: Some("left-half"),
    },
];

pub fn targets() -> &'static [TargetSpec] {
    REGISTRY
}

pub fn target(name: &str) -> Result<&'static TargetSpec> {
    REGISTRY.iter().find(|t| t.name == name).ok_or_else(|| Error::UnknownTarget(name.into()))
}

pub fn eval_target(name: &str, x: &[f64]) -> Result<f64> {
    let t = target(name)?;
    if x.len() != t.dim {
        return Err(Error::DimMismatch { expected: t.dim, got: x.len() });
    }
    Ok(t.eval(x))
}

pub fn known_rate(name: &str, theta: usize) -> Result<f64> {
    Ok(target(name)?.predicted_s(theta))
}

/// Number of scale-j dyadic cubes (closed) the set meets, by recursive descent.
pub fn count_boundary_cubes(oracle: &dyn Fn(&[f64], &[f64]) -> bool, j: u32, d: usize) -> u64 {
    fn walk(c: CubeIndex, j: u32, oracle: &dyn Fn(&[f64], &[f64]) -> bool) -> u64 {
        let d = c.dim();
        let lo = c.anchor();
        let h = c.side();
        let mut hi = [0.0; MAX_DIM];
        for l in 0..d {
            hi[l] = lo[l] + h;
        }
        if !oracle(&lo[..d], &hi[..d]) {
            return 0;
        }
        if c.j() == j {
            return 1;
        }
        c.children().into_iter().map(|ch| walk(ch, j, oracle)).sum()
    }
    walk(CubeIndex::root(d), j, oracle)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinkowskiEstimate {
    pub dim: f64,
    pub constant: f64,
    pub scales: Vec<u32>,
    pub counts: Vec<u64>,
}

/// Box-counting dimension: slope of log count against j log 2, and
/// c_M = max_j count · 2^{-j d_M}.
pub fn estimate_minkowski_dim(oracle: &dyn Fn(&[f64], &[f64]) -> bool, d: usize, scales: &[u32]) -> Result<MinkowskiEstimate> {
    if scales.len() < 4 {
        return Err(Error::InsufficientData(format!("{} scales, need 4", scales.len())));
    }
    let counts: Vec<u64> = scales.iter().map(|&j| count_boundary_cubes(oracle, j, d)).collect();
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::InsufficientData("the set meets no cube".into()));
    }
    if counts.contains(&0) {
        return Err(Error::InsufficientData("count vanishes at some scale".into()));
    }
    let x: Vec<f64> = scales.iter().map(|&j| j as f64 * 2f64.ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, _, _) = crate::adaptive::ols(&x, &y);
    let constant = scales
        .iter()
        .zip(&counts)
        .map(|(&j, &c)| c as f64 * (-(j as f64) * slope).exp2())
        .fold(0.0, f64::max);
    Ok(MinkowskiEstimate { dim: slope, constant, scales: scales.to_vec(), counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn formula_examples() {
        assert_relative_eq!(eval_target("onedisc", &[0.25]).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(eval_target("onedisc", &[0.75]).unwrap(), -2.0, epsilon = 1e-15);
        assert_relative_eq!(eval_target("threedisc", &[0.5]).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(eval_target("disk2d", &[0.5, 0.5]).unwrap(), 1.0);
        assert!(matches!(eval_target("nope", &[0.1]), Err(Error::UnknownTarget(_))));
        assert!(eval_target("disk2d", &[0.1]).is_err());
    }

    #[test]
    fn predicted_rates() {
        assert_eq!(known_rate("onedisc", 1).unwrap(), 2.0);
        assert_eq!(known_rate("disk2d", 0).unwrap(), 0.5);
        assert_eq!(known_rate("disk2d", 3).unwrap(), 0.5);
        assert_eq!(known_rate("sin1d", 1).unwrap(), 2.0);
        assert_eq!(known_rate("smooth2d", 1).unwrap(), 1.0);
        assert_eq!(known_rate("offsupport1d", 0).unwrap(), 1.0);
    }

    #[test]
    fn branch_coverage_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let offsets: [(&str, usize, f64); 4] = [("onedisc", 2, 2.0), ("threedisc", 4, 4.0), ("fivedisc", 6, 6.0), ("sevendisc", 8, 8.0)];
        for (name, branches, scale) in offsets {
            let t = target(name).unwrap();
            let mut hit = vec![false; branches];
            for _ in 0..100_000 {
                let x: f64 = rng.random();
                let v = t.eval(&[x]);
                assert!(v.abs() <= 2.0 + 1e-12);
                hit[((x * scale).floor() as usize).min(branches - 1)] = true;
            }
            assert!(hit.iter().all(|h| *h), "{name}");
        }
        for t in targets() {
            let n: usize = if t.dim == 1 { 4001 } else { 201 };
            for i in 0..n.pow(t.dim as u32) {
                let x: Vec<f64> = (0..t.dim).map(|l| ((i / n.pow(l as u32)) % n) as f64 / (n - 1) as f64).collect();
                assert!(t.eval(&x).abs() <= t.sup_bound + 1e-12, "{}", t.name);
            }
        }
    }

    #[test]
    fn point_count() {
        for j in 0..12 {
            assert!(count_boundary_cubes(&|lo, hi| lo[0] <= 0.3 && 0.3 <= hi[0], j, 1) <= 2);
            assert_eq!(count_boundary_cubes(&|lo, hi| lo[0] <= 0.5 && 0.5 <= hi[0], j, 1), if j == 0 { 1 } else { 2 });
        }
    }

    #[test]
    fn square_boundary_count() {
        let edge = |lo: &[f64], hi: &[f64]| (0..2).any(|l| lo[l] == 0.0 || hi[l] == 1.0);
        for j in 1..8 {
            assert_eq!(count_boundary_cubes(&edge, j, 2), 4 * (1 << j) - 4);
        }
    }

    #[test]
    fn circle_count_matches_exhaustive_scan() {
        let j = 6u32;
        let n = 1u32 << j;
        let h = 1.0 / n as f64;
        let mut brute = 0;
        for a in 0..n {
            for b in 0..n {
                let lo = [a as f64 * h, b as f64 * h];
                let hi = [lo[0] + h, lo[1] + h];
                if circle_meets_box(&lo, &hi) {
                    brute += 1;
                }
            }
        }
        assert_eq!(count_boundary_cubes(&circle_meets_box, j, 2), brute);
        let est = estimate_minkowski_dim(&circle_meets_box, 2, &[3, 4, 5, 6, 7, 8]).unwrap();
        let c = est.constant;
        assert!((c * 64.0 / 2.0..=c * 64.0 * 2.0).contains(&(brute as f64)));
    }

    #[test]
    fn dimension_estimates() {
        let scales: Vec<u32> = (3..=8).collect();
        let circle = estimate_minkowski_dim(&circle_meets_box, 2, &scales).unwrap();
        assert!((circle.dim - 1.0).abs() <= 0.15, "{}", circle.dim);
        let point = estimate_minkowski_dim(&|lo: &[f64], hi: &[f64]| lo[0] <= 0.3 && 0.3 <= hi[0], 1, &scales).unwrap();
        assert!(point.dim.abs() < 1e-12);
        let filled = estimate_minkowski_dim(&|_: &[f64], _: &[f64]| true, 2, &scales).unwrap();
        assert_relative_eq!(filled.dim, 2.0, epsilon = 1e-12);
        assert!(estimate_minkowski_dim(&|_: &[f64], _: &[f64]| false, 2, &scales).is_err());
        assert!(estimate_minkowski_dim(&circle_meets_box, 2, &[3, 4, 5]).is_err());
    }
}
