//! Assembly of a piecewise polynomial into one clamped network, f̃ = Σ ×̃(φ̃, p̃).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gadgets::{build_bump_net, build_patch_net, build_product_net, local_coordinate_bound, patch_sup_bound, squaring_steps};
use super::network::{covering_bound, stack_parallel, NetworkStats, ReluNetwork};
use crate::adaptive::{build_adaptive_approximant, DeltaPyramid, PiecewisePolynomial, Target};
use crate::poly::Fitter;
use crate::{Error, Exec, Result};

#[derive(Clone, Debug)]
pub struct CompileOptions {
    /// Regularity index used to set the internal accuracies.
    pub s: f64,
    /// Upper bound on the product accuracy ε₁ (the target accuracy, if any).
    pub eps: Option<f64>,
    /// Override ε₁ = (#T)^{-s}.
    pub eps1: Option<f64>,
    /// Override the ramp width δ.
    pub delta: Option<f64>,
    /// Output clamp M; defaults to the largest patch sup on its cell.
    pub clamp: Option<f64>,
    /// Monte-Carlo points for the reported L² mismatch (0 skips it).
    pub mc_points: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl CompileOptions {
    pub fn new(s: f64) -> Self {
        CompileOptions { s, eps: None, eps1: None, delta: None, clamp: None, mc_points: 100_000, seed: 0, exec: Exec::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompileReport {
    pub stats: NetworkStats,
    pub cells: usize,
    pub tree_size: usize,
    pub finest_scale: u32,
    pub s: f64,
    pub eps1: f64,
    pub delta: f64,
    /// Sawtooth steps in the final product gadgets.
    pub squaring_steps: usize,
    /// Input bound of the final product gadgets.
    pub product_bound: f64,
    pub clamp: f64,
    /// Largest |a_α| over the patches.
    pub coeff_bound: f64,
    /// Measured constant in sup|p̃ − p| ≤ C₃·R_p·θ·ε₁ (0 when every patch is affine).
    pub c3: f64,
    /// Monte-Carlo ‖f̃ − p_Λ‖² under Lebesgue measure.
    pub l2_error_sq: f64,
    pub mc_points: usize,
    /// 3(R²d² + 1 + C₃²R_p²θ²)ε₁² + 2^{d+3}·d·R²·δ·(#T)^{1/d}.
    pub error_budget: f64,
    /// log covering number at radius ε₁.
    pub log_covering: f64,
    /// κ·ε₁^{max(2, 1/s)}: the constant in the weight-magnitude budget.
    pub kappa_constant: f64,
}

/// Compile p_Λ into a network.
///
/// ε₁ = (#T)^{-s} (capped at ½ and at `eps`), δ = min{(#T)^{-2s-1/d}, 2^{-J-2}}.
pub fn compile_adaptive_net(pp: &PiecewisePolynomial, opts: &CompileOptions) -> Result<(ReluNetwork, CompileReport)> {
    let d = pp.dim();
    let theta = pp.degree();
    let s = opts.s;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("regularity index must be positive, got {s}")));
    }
    let t = pp.source_tree_size.max(1) as f64;
    let j = pp.finest_scale();
    let mut eps1 = opts.eps1.unwrap_or(t.powf(-s)).min(0.5);
    if let Some(e) = opts.eps {
        eps1 = eps1.min(e);
    }
    if !(eps1 > 0.0) {
        return Err(Error::InvalidArgument(format!("product accuracy must be positive, got {eps1}")));
    }
    let cap = (-(j as f64) - 2.0).exp2();
    let delta = opts.delta.unwrap_or_else(|| t.powf(-2.0 * s - 1.0 / d as f64).min(cap));
    if !(delta > 0.0 && delta <= cap && delta.is_normal()) {
        return Err(Error::InvalidArgument(format!(
            "ramp width {delta:e} infeasible for finest scale {j} (needs 0 < delta <= {cap:e})"
        )));
    }

    let patch_nets = opts.exec.map(&pp.patches, |p| build_patch_net(p, eps1, delta));
    let patch_nets = patch_nets.into_iter().collect::<Result<Vec<_>>>()?;
    let patch_err = |p: &crate::poly::PolynomialPatch| -> f64 {
        p.monomials().iter().zip(&p.coeffs).map(|(a, c)| c.abs() * a.iter().sum::<u32>() as f64 * eps1).sum()
    };
    let product_bound = pp
        .patches
        .iter()
        .map(|p| patch_sup_bound(p, delta) + patch_err(p))
        .fold(1.0 + d as f64 * eps1, f64::max);
    let product = build_product_net(product_bound, eps1)?;

    let cells = opts.exec.map_range(pp.patches.len(), |i| -> Result<ReluNetwork> {
        let bump = build_bump_net(&pp.patches[i].cube, delta, eps1)?;
        stack_parallel(&[bump, patch_nets[i].clone()])?.materialize(&[d == 1, false])?.then(&product)
    });
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let n = cells.len();
    let sum = ReluNetwork::affine(n, vec![(0..n).map(|i| (i, 1.0)).collect()], vec![0.0])?;
    let clamp = opts.clamp.unwrap_or_else(|| pp.patches.iter().map(|p| patch_sup_bound(p, 0.0)).fold(0.0, f64::max));
    let clamp = if clamp > 0.0 { clamp } else { 1.0 };
    let net = stack_parallel(&cells)?.materialize(&vec![false; n])?.then(&sum)?.with_clamp(clamp)?;

    let coeff_bound = pp.coeff_bound();
    let c3 = if theta == 0 || coeff_bound == 0.0 {
        0.0
    } else {
        let worst = opts
            .exec
            .map_range(n, |i| patch_grid_error(&pp.patches[i], &patch_nets[i], delta))
            .into_iter()
            .fold(0.0, f64::max);
        worst / (coeff_bound * theta as f64 * eps1)
    };
    let l2_error_sq = if opts.mc_points > 0 { mc_mismatch(&net, pp, opts.mc_points, opts.seed, opts.exec)? } else { f64::NAN };
    let df = d as f64;
    let r = clamp;
    let error_budget = 3.0 * (r * r * df * df + 1.0 + c3 * c3 * coeff_bound * coeff_bound * (theta * theta) as f64) * eps1 * eps1
        + (df + 3.0).exp2() * df * r * r * delta * t.powf(1.0 / df);
    let stats = net.stats();
    let report = CompileReport {
        stats,
        cells: n,
        tree_size: pp.source_tree_size,
        finest_scale: j,
        s,
        eps1,
        delta,
        squaring_steps: squaring_steps(product_bound, eps1),
        product_bound,
        clamp,
        coeff_bound,
        c3,
        l2_error_sq,
        mc_points: opts.mc_points,
        error_budget,
        log_covering: covering_bound(&stats, eps1)?,
        kappa_constant: stats.kappa * eps1.powf(2f64.max(1.0 / s)),
    };
    Ok((net, report))
}

/// sup |p̃ − p| over a grid on the cube inflated by δ/2.
fn patch_grid_error(p: &crate::poly::PolynomialPatch, net: &ReluNetwork, delta: f64) -> f64 {
    let d = p.dim();
    let per_axis: usize = [0, 513, 65, 17][d];
    let lo = -(local_coordinate_bound(&p.cube, delta) - 1.0);
    let anchor = p.cube.anchor();
    let side = p.cube.side();
    let mut worst = 0.0f64;
    let mut x = vec![0.0; d];
    for idx in 0..per_axis.pow(d as u32) {
        let mut rem = idx;
        for (l, xl) in x.iter_mut().enumerate() {
            let u = lo + (1.0 - 2.0 * lo) * (rem % per_axis) as f64 / (per_axis - 1) as f64;
            rem /= per_axis;
            *xl = anchor[l] + u * side;
        }
        let v = net.eval(&x).expect("patch net takes d inputs");
        worst = worst.max((v - p.eval(&x)).abs());
    }
    worst
}

/// Monte-Carlo ‖net − p_Λ‖² with uniform points on [0,1]^d.
pub fn mc_mismatch(net: &ReluNetwork, pp: &PiecewisePolynomial, n: usize, seed: u64, exec: Exec) -> Result<f64> {
    let d = pp.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
    let out = net.forward_batch(&pts, exec)?;
    let sq = exec.map_range(n, |i| {
        let e = out[i] - pp.eval(&pts[i * d..(i + 1) * d]);
        e * e
    });
    Ok(sq.iter().sum::<f64>() / n as f64)
}

/// Build the tree whose size matches a target accuracy and compile it.
///
/// #T = ⌈(c/ε)^{1/s}⌉, taken from the pyramid's threshold list.
pub fn compile_for_accuracy<F: Target + ?Sized>(
    f: &F,
    fitter: &Fitter,
    pyramid: &DeltaPyramid,
    eps: f64,
    c: f64,
    opts: &CompileOptions,
) -> Result<(PiecewisePolynomial, ReluNetwork, CompileReport)> {
    if !(eps > 0.0 && c > 0.0) {
        return Err(Error::InvalidArgument(format!("need eps > 0 and c > 0, got {eps}, {c}")));
    }
    let want = (c / eps).powf(1.0 / opts.s).ceil() as usize;
    let eta = pyramid
        .eta_for_size(want)
        .ok_or_else(|| Error::InvalidArgument(format!("pyramid holds fewer than {want} refinable nodes")))?;
    let tree = pyramid.truncate(eta).tree;
    let pp = build_adaptive_approximant(f, &tree, fitter, eta, opts.exec)?;
    let (net, report) = compile_adaptive_net(&pp, opts)?;
    Ok((pp, net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{AdaptivePartition, CubeIndex, TruncatedTree};
    use crate::poly::PolynomialPatch;

    #[test]
    fn single_constant_cell() {
        let cube = CubeIndex::root(1);
        let part = AdaptivePartition::new(1, vec![cube]).unwrap();
        let pp = PiecewisePolynomial::new(part, vec![PolynomialPatch::constant(cube, 0, 0.8)], 1.0, 1).unwrap();
        let mut opts = CompileOptions::new(1.0);
        opts.eps1 = Some(1e-3);
        opts.mc_points = 1000;
        let (net, rep) = compile_adaptive_net(&pp, &opts).unwrap();
        for i in 1..100 {
            let x = i as f64 / 100.0;
            assert!((net.eval(&[x]).unwrap() - 0.8).abs() <= 2e-3);
        }
        assert_eq!(rep.stats.output_bound, Some(0.8));
        assert!(rep.l2_error_sq < 4e-6);
    }

    #[test]
    fn cells_do_not_leak() {
        let tree = TruncatedTree::uniform(1, 2);
        let part = tree.outer_leaves();
        let patches: Vec<_> = part.cells().iter().enumerate().map(|(i, c)| PolynomialPatch::constant(*c, 0, i as f64 - 1.5)).collect();
        let pp = PiecewisePolynomial::new(part, patches, 0.1, tree.len()).unwrap();
        let mut opts = CompileOptions::new(1.0);
        opts.mc_points = 0;
        opts.eps1 = Some(1e-3);
        let (net, rep) = compile_adaptive_net(&pp, &opts).unwrap();
        assert!(rep.delta <= 1.0 / 16.0);
        // Deep inside a cell only its own term survives.
        let single = |x: f64| -> f64 {
            let i = CubeIndex::locate(&[x], 2).k()[0] as usize;
            let bump = build_bump_net(&pp.patches[i].cube, rep.delta, rep.eps1).unwrap();
            let patch = build_patch_net(&pp.patches[i], rep.eps1, rep.delta).unwrap();
            let prod = build_product_net(rep.product_bound, rep.eps1).unwrap();
            prod.eval(&[bump.eval(&[x]).unwrap(), patch.eval(&[x]).unwrap()]).unwrap()
        };
        for x in [0.1, 0.4, 0.6, 0.9] {
            assert!((net.eval(&[x]).unwrap() - single(x)).abs() < 1e-12);
            assert!((net.eval(&[x]).unwrap() - pp.eval(&[x])).abs() < 0.05);
        }
    }

    #[test]
    fn infeasible_ramp_is_rejected() {
        let cube = CubeIndex::root(1);
        let part = AdaptivePartition::new(1, vec![cube]).unwrap();
        let pp = PiecewisePolynomial::new(part, vec![PolynomialPatch::constant(cube, 0, 1.0)], 1.0, 1).unwrap();
        let mut opts = CompileOptions::new(1.0);
        opts.delta = Some(0.5);
        assert!(compile_adaptive_net(&pp, &opts).is_err());
    }
}
