use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::TargetSpec;
use crate::measure::Measure;
use crate::trainer::Dataset;
use crate::{Error, Result};

/// Stream offset separating the noise draws from the design points.
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// y_i = f(x_i) + ξ_i with x_i ~ `measure` and ξ_i ~ N(0, σ²), both seeded.
pub fn generate_dataset(target: &TargetSpec, n: usize, sigma: f64, measure: &Measure, seed: u64) -> Result<Dataset> {
    if measure.dim() != target.dim {
        return Err(Error::DimMismatch { expected: target.dim, got: measure.dim() });
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be finite and non-negative, got {sigma}")));
    }
    let x = measure.sample(n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_STREAM);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let y = x
        .chunks(target.dim)
        .map(|p| {
            let f = target.eval(p);
            if sigma > 0.0 {
                f + sigma * noise.sample(&mut rng)
            } else {
                f
            }
        })
        .collect();
    Dataset::new(target.dim, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::target;

    #[test]
    fn noiseless_is_exact() {
        let t = target("onedisc").unwrap();
        let d = generate_dataset(t, 200, 0.0, &Measure::lebesgue(1), 3).unwrap();
        for i in 0..d.len() {
            assert_eq!(d.y[i], t.eval(d.point(i)));
        }
        assert_eq!(d, generate_dataset(t, 200, 0.0, &Measure::lebesgue(1), 3).unwrap());
    }

    #[test]
    fn noise_moments_and_tails() {
        let t = target("threedisc").unwrap();
        let n = 100_000;
        let d = generate_dataset(t, n, 0.3, &Measure::lebesgue(1), 11).unwrap();
        let r: Vec<f64> = (0..n).map(|i| d.y[i] - t.eval(d.point(i))).collect();
        let mean = r.iter().sum::<f64>() / n as f64;
        let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((0.295..=0.305).contains(&sd), "{sd}");
        let tail = r.iter().filter(|v| v.abs() > 0.9).count() as f64 / n as f64;
        assert!(tail <= 0.005, "{tail}");
    }

    #[test]
    fn dimension_must_match() {
        let t = target("disk2d").unwrap();
        assert!(generate_dataset(t, 10, 0.1, &Measure::lebesgue(1), 0).is_err());
    }
}
