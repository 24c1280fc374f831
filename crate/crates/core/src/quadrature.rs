//! Gauss–Legendre rules on [0,1] and their tensor products on [0,1]^d.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [0,1]; weights sum to 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let step = p / d;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        // map [-1,1] -> [0,1]
        nodes[i] = 0.5 * (1.0 - t);
        nodes[n - 1 - i] = 0.5 * (1.0 + t);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    absorb_rounding(&mut weights);
    (nodes, weights)
}

/// (P_n(t), P_n'(t)) by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Tensor rule on [0,1]^d: points flattened row-major (point-major), weights sum to 1.
/// The first coordinate varies fastest.
pub fn tensor_gauss(order: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let total = order.pow(d as u32);
    let mut pts = Vec::with_capacity(total * d);
    let mut wts = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut wt = 1.0;
        for _ in 0..d {
            let i = rem % order;
            rem /= order;
            pts.push(x[i]);
            wt *= w[i];
        }
        wts.push(wt);
    }
    absorb_rounding(&mut wts);
    (pts, wts)
}

/// Adjust the last weight so a left-to-right sum of the weights is exactly 1.
fn absorb_rounding(w: &mut [f64]) {
    if let Some((last, rest)) = w.split_last_mut() {
        let s: f64 = rest.iter().sum();
        if s >= 0.5 {
            *last = 1.0 - s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_monomials_exactly() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert_relative_eq!(s, 1.0 / (p as f64 + 1.0), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn nodes_sorted_and_inside() {
        let (x, _) = gauss_legendre(9);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(x[0] > 0.0 && x[8] < 1.0);
        assert_relative_eq!(x[4], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn tensor_rule_in_2d() {
        let (p, w) = tensor_gauss(3, 2);
        assert_eq!(p.len(), 18);
        let s: f64 = (0..9).map(|i| w[i] * p[2 * i] * p[2 * i] * p[2 * i + 1]).sum();
        assert_relative_eq!(s, 1.0 / 6.0, max_relative = 1e-14);
    }
}
