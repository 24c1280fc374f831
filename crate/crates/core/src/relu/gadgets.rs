//! Building blocks: trapezoids, the product gadget, chained products, bumps and patches.

use super::network::{stack_parallel, Layer, ReluNetwork};
use crate::dyadic::CubeIndex;
use crate::poly::PolynomialPatch;
use crate::{Error, Result};

fn check_ramp(a: f64, b: f64, delta: f64) -> Result<()> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 <= a < b <= 1, got [{a}, {b}]")));
    }
    if !(delta > 0.0 && delta < b - a) {
        return Err(Error::InvalidArgument(format!("ramp width {delta} must lie in (0, {})", b - a)));
    }
    Ok(())
}

/// Closed-form trapezoid: 1 on [a+δ/2, b−δ/2], linear ramps, 0 outside [a−δ/2, b+δ/2].
/// An interval touching 0 (or 1) has no ramp on that side.
pub fn trapezoid(a: f64, b: f64, delta: f64, x: f64) -> f64 {
    let up = if a == 0.0 { 1.0 } else { (x - (a - delta / 2.0)) / delta };
    let down = if b == 1.0 { 1.0 } else { ((b + delta / 2.0) - x) / delta };
    up.min(down).clamp(0.0, 1.0)
}

/// The trapezoid as one hidden layer of (up to) four units.
pub fn build_trapezoid_net(a: f64, b: f64, delta: f64) -> Result<ReluNetwork> {
    check_ramp(a, b, delta)?;
    let knots = [a - delta / 2.0, a + delta / 2.0, b - delta / 2.0, b + delta / 2.0];
    let signs = [1.0, -1.0, -1.0, 1.0];
    let used: Vec<usize> = match (a == 0.0, b == 1.0) {
        (true, true) => return ReluNetwork::affine(1, vec![vec![]], vec![1.0]),
        (true, false) => vec![2, 3],
        (false, true) => vec![0, 1],
        (false, false) => vec![0, 1, 2, 3],
    };
    let hidden = used.iter().map(|_| vec![(0, 1.0)]).collect();
    let hidden_bias = used.iter().map(|&i| -knots[i]).collect();
    let out = used.iter().enumerate().map(|(u, &i)| (u, signs[i] / delta)).collect();
    let offset = if a == 0.0 { 1.0 } else { 0.0 };
    ReluNetwork::new(
        1,
        vec![Layer::from_rows(1, hidden, hidden_bias)?, Layer::from_rows(used.len(), vec![out], vec![offset])?],
    )
}

/// The trapezoid as min(clip(up), clip(down)) with clip(t) = ReLU(t) − ReLU(t − 1).
///
/// Unlike the four-unit form, this one returns exactly 0 on both sides of the
/// support, which the bump products need.
pub fn build_clipped_trapezoid_net(a: f64, b: f64, delta: f64) -> Result<ReluNetwork> {
    check_ramp(a, b, delta)?;
    let inv = 1.0 / delta;
    // up(x) = (x − a + δ/2)/δ, down(x) = (b + δ/2 − x)/δ
    let up_b = -(a - delta / 2.0) * inv;
    let down_b = (b + delta / 2.0) * inv;
    match (a == 0.0, b == 1.0) {
        (true, true) => ReluNetwork::affine(1, vec![vec![]], vec![1.0]),
        (true, false) | (false, true) => {
            let (w, c) = if a == 0.0 { (-inv, down_b) } else { (inv, up_b) };
            ReluNetwork::new(
                1,
                vec![
                    Layer::from_rows(1, vec![vec![(0, w)], vec![(0, w)]], vec![c, c - 1.0])?,
                    Layer::from_rows(2, vec![vec![(0, 1.0), (1, -1.0)]], vec![0.0])?,
                ],
            )
        }
        (false, false) => ReluNetwork::new(
            1,
            vec![
                Layer::from_rows(
                    1,
                    vec![vec![(0, inv)], vec![(0, inv)], vec![(0, -inv)], vec![(0, -inv)]],
                    vec![up_b, up_b - 1.0, down_b, down_b - 1.0],
                )?,
                Layer::from_rows(
                    4,
                    vec![vec![(0, 1.0), (1, -1.0)], vec![(0, 1.0), (1, -1.0), (2, -1.0), (3, 1.0)]],
                    vec![0.0, 0.0],
                )?,
                Layer::from_rows(2, vec![vec![(0, 1.0), (1, -1.0)]], vec![0.0])?,
            ],
        ),
    }
}

/// Number of sawtooth compositions used by the squaring network.
pub fn squaring_steps(c: f64, eps: f64) -> usize {
    let half_log = ((c * c / eps).log2() / 2.0).ceil();
    half_log.max(0.0) as usize + 2
}

/// ×̃(x, y) ≈ xy for |x|, |y| ≤ c.
///
/// xy = c²(t₊² − t₋²) with t± = |x ± y|/2c ∈ [0,1]; each square is the
/// sawtooth interpolant t − Σ_s g_s(t)/4^s. The two branches are interleaved
/// unit by unit and run identical arithmetic, so whenever x or y is exactly 0
/// they agree bitwise and the output is exactly 0.
pub fn build_product_net(c: f64, eps: f64) -> Result<ReluNetwork> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("input bound must be positive, got {c}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("product accuracy must lie in (0, 1), got {eps}")));
    }
    let m = squaring_steps(c, eps);
    let mut layers = Vec::with_capacity(m + 2);
    // |x+y| = h0 + h2, |x−y| = h1 + h3
    layers.push(Layer::from_rows(
        2,
        vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, -1.0)], vec![(0, -1.0), (1, -1.0)], vec![(0, -1.0), (1, 1.0)]],
        vec![0.0; 4],
    )?);
    // units per layer: [lo_a, lo_b, hi_a, hi_b, sum_a, sum_b]; lo = ReLU(u), hi = ReLU(u − ½)
    let s = 0.5 / c;
    let mut rows = Vec::new();
    for _ in 0..3 {
        rows.push(vec![(0, s), (2, s)]);
        rows.push(vec![(1, s), (3, s)]);
    }
    layers.push(Layer::from_rows(4, rows, vec![0.0, 0.0, -0.5, -0.5, 0.0, 0.0])?);
    let mut scale = 1.0;
    for _ in 1..m {
        scale *= 0.25;
        let mut rows = Vec::with_capacity(6);
        for _ in 0..2 {
            rows.push(vec![(0, 2.0), (2, -4.0)]);
            rows.push(vec![(1, 2.0), (3, -4.0)]);
        }
        rows.push(vec![(0, -2.0 * scale), (2, 4.0 * scale), (4, 1.0)]);
        rows.push(vec![(1, -2.0 * scale), (3, 4.0 * scale), (5, 1.0)]);
        layers.push(Layer::from_rows(6, rows, vec![0.0, 0.0, -0.5, -0.5, 0.0, 0.0])?);
    }
    scale *= 0.25;
    let c2 = c * c;
    let g = 2.0 * c2 * scale;
    layers.push(Layer::from_rows(
        6,
        vec![vec![(0, -g), (1, g), (2, 2.0 * g), (3, -2.0 * g), (4, c2), (5, -c2)]],
        vec![0.0],
    )?);
    ReluNetwork::new(2, layers)
}

/// Π̃(a₁..a_N) = ×̃(a₁, ×̃(a₂, …)) for |a_i| ≤ c ≤ 1, each stage accurate to `eps`.
fn chain_product(n: usize, c: f64, eps: f64) -> Result<ReluNetwork> {
    match n {
        1 => ReluNetwork::select(1, &[0]),
        2 => build_product_net(c, eps),
        _ => {
            let rest: Vec<usize> = (1..n).collect();
            let inner = ReluNetwork::select(n, &rest)?.then(&chain_product(n - 1, c, eps)?)?;
            let head = ReluNetwork::select(n, &[0])?;
            stack_parallel(&[head, inner])?.materialize(&[false, false])?.then(&build_product_net(c, eps)?)
        }
    }
}

/// Π̃ for N factors bounded by c; error at most N·eps.
///
/// Inputs not yet consumed ride along on identity pairs. For c > 1 the
/// inputs are scaled by 1/c on entry and the output by c^N on exit.
pub fn build_multiproduct_net(n: usize, c: f64, eps: f64) -> Result<ReluNetwork> {
    if n == 0 {
        return Err(Error::InvalidArgument("a product needs at least one factor".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("input bound must be positive, got {c}")));
    }
    if c <= 1.0 {
        return chain_product(n, c, eps);
    }
    let gain = c.powi(n as i32);
    let shrink = ReluNetwork::affine(n, (0..n).map(|i| vec![(i, 1.0 / c)]).collect(), vec![0.0; n])?;
    let grow = ReluNetwork::affine(1, vec![vec![(0, gain)]], vec![0.0])?;
    shrink.then(&chain_product(n, 1.0, eps / gain)?)?.then(&grow)
}

/// The interval of a cube along one axis.
fn cube_interval(cube: &CubeIndex, axis: usize) -> (f64, f64) {
    let r = cube.anchor()[axis];
    (r, (r + cube.side()).min(1.0))
}

/// φ̃ for one cube: the product of clipped trapezoids along each axis.
///
/// Exactly 0 outside the cube inflated by δ/2; within 1 ± d·eps elsewhere.
pub fn build_bump_net(cube: &CubeIndex, delta: f64, eps: f64) -> Result<ReluNetwork> {
    let d = cube.dim();
    let limit = (-(cube.j() as f64) - 2.0).exp2();
    if !(delta > 0.0 && delta <= limit) {
        return Err(Error::InvalidArgument(format!("ramp width {delta} exceeds 2^-(j+2) = {limit} for cube {cube}")));
    }
    let axes = (0..d)
        .map(|l| {
            let (a, b) = cube_interval(cube, l);
            ReluNetwork::select(d, &[l])?.then(&build_clipped_trapezoid_net(a, b, delta)?)
        })
        .collect::<Result<Vec<_>>>()?;
    if d == 1 {
        return Ok(axes.into_iter().next().expect("one axis"));
    }
    stack_parallel(&axes)?.materialize(&vec![true; d])?.then(&build_multiproduct_net(d, 1.0, eps)?)
}

/// Bound on |u_ℓ| = 2^j |x_ℓ − r_ℓ| over the cube inflated by δ/2.
pub fn local_coordinate_bound(cube: &CubeIndex, delta: f64) -> f64 {
    1.0 + (cube.j() as f64).exp2() * delta / 2.0
}

/// p̃ for one patch: each monomial u^α is a Π̃ over its |α| local coordinates.
///
/// Accurate on the cube inflated by δ/2 (pass δ = 0 for the bare cube).
pub fn build_patch_net(patch: &PolynomialPatch, eps: f64, delta: f64) -> Result<ReluNetwork> {
    let cube = &patch.cube;
    let d = cube.dim();
    let scale = (cube.j() as f64).exp2();
    let anchor = cube.anchor();
    let bound = local_coordinate_bound(cube, delta);
    let mut branches = Vec::new();
    let mut coeffs = Vec::new();
    let mut constant = 0.0;
    for (alpha, &a) in patch.monomials().iter().zip(&patch.coeffs) {
        if a == 0.0 {
            continue;
        }
        let factors: Vec<usize> = (0..d).flat_map(|l| std::iter::repeat_n(l, alpha[l] as usize)).collect();
        if factors.is_empty() {
            constant += a;
            continue;
        }
        let coords = ReluNetwork::affine(
            d,
            factors.iter().map(|&l| vec![(l, scale)]).collect(),
            factors.iter().map(|&l| -scale * anchor[l]).collect(),
        )?;
        let branch = if factors.len() == 1 {
            coords
        } else {
            coords.then(&build_multiproduct_net(factors.len(), bound, eps)?)?
        };
        branches.push(branch);
        coeffs.push(a);
    }
    if branches.is_empty() {
        return ReluNetwork::affine(d, vec![vec![]], vec![constant]);
    }
    let sum = ReluNetwork::affine(branches.len(), vec![coeffs.into_iter().enumerate().collect()], vec![constant])?;
    stack_parallel(&branches)?.then(&sum)
}

/// Sup of |p| over the cube inflated by δ/2, from the coefficients.
pub fn patch_sup_bound(patch: &PolynomialPatch, delta: f64) -> f64 {
    let u = local_coordinate_bound(&patch.cube, delta);
    patch
        .monomials()
        .iter()
        .zip(&patch.coeffs)
        .map(|(alpha, a)| a.abs() * u.powi(alpha.iter().sum::<u32>() as i32))
        .sum()
}
