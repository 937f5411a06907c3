//! Scalar variates that stay finite for the extreme shapes the beta process
//! produces (shapes of order 1e-6 next to shapes of order 1e3).

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Smallest and largest stored probability.
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
pub(crate) fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `ln X` for `X ~ Gamma(shape, 1)`, using `X = Y·U^{1/shape}` with
/// `Y ~ Gamma(shape + 1, 1)` when `shape < 1` so tiny shapes do not
/// underflow.
pub(crate) fn ln_gamma_variate(rng: &mut impl Rng, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("shape is positive");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("shape is positive");
        let u: f64 = rng.random::<f64>();
        g.sample(rng).ln() + u.max(f64::MIN_POSITIVE).ln() / shape
    }
}

/// `Beta(a, b)` variate. A zero shape collapses the mass onto the
/// corresponding endpoint.
pub(crate) fn beta(rng: &mut impl Rng, a: f64, b: f64) -> f64 {
    match (a > 0.0, b > 0.0) {
        (false, false) => 0.5,
        (true, false) => 1.0,
        (false, true) => 0.0,
        (true, true) => {
            let lx = ln_gamma_variate(rng, a);
            let ly = ln_gamma_variate(rng, b);
            // x / (x + y) = 1 / (1 + exp(ly − lx))
            let d = ly - lx;
            if d > 0.0 {
                let e = (-d).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + d.exp())
            }
        }
    }
}

/// `Gamma(shape, rate)` variate.
pub(crate) fn gamma(rng: &mut impl Rng, shape: f64, rate: f64) -> f64 {
    let g = Gamma::new(shape, rate.recip()).expect("shape and rate are positive");
    g.sample(rng).max(f64::MIN_POSITIVE)
}

#[inline]
pub(crate) fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws from the density `∝ exp(t·x)` on `[lo, hi]` by inversion.
pub(crate) fn truncated_exp(rng: &mut impl Rng, t: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let u: f64 = rng.random::<f64>();
    if width <= 0.0 {
        return lo;
    }
    let tw = t * width;
    let x = if tw.abs() < 1e-12 {
        lo + u * width
    } else if t < 0.0 {
        lo + (u * tw.exp_m1()).ln_1p() / t
    } else {
        hi + (u * (-tw).exp_m1()).ln_1p() / t
    };
    x.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn beta_moments_across_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(a, b) in &[(0.5, 0.5), (2.0, 5.0), (0.05, 3.0), (40.0, 0.3), (1.0, 1.0)] {
            let xs: Vec<f64> = (0..100_000).map(|_| beta(&mut rng, a, b)).collect();
            let (m, v) = moments(&xs);
            let mean = a / (a + b);
            let var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
            let se = (var / xs.len() as f64).sqrt();
            assert!((m - mean).abs() < 3.5 * se, "Beta({a},{b}) mean {m} vs {mean}");
            assert!((v - var).abs() < 0.05 * var, "Beta({a},{b}) var {v} vs {var}");
        }
    }

    #[test]
    fn beta_with_tiny_shape_is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let x = beta(&mut rng, 1.0 - 1e-6, 1e-6);
            assert!((0.0..=1.0).contains(&x));
            let y = beta(&mut rng, 1e-9, 1e-9);
            assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn gamma_uses_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..100_000).map(|_| gamma(&mut rng, 3.0, 2.0)).collect();
        let (m, v) = moments(&xs);
        assert!((m - 1.5).abs() < 0.01);
        assert!((v - 0.75).abs() < 0.04);
    }

    #[test]
    fn truncated_exp_matches_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &t in &[-50.0, -1.0, 0.0, 3.0, 400.0] {
            let (lo, hi) = (0.2, 0.7);
            let n = 50_000;
            let mut xs: Vec<f64> = (0..n).map(|_| truncated_exp(&mut rng, t, lo, hi)).collect();
            xs.sort_by(f64::total_cmp);
            let cdf = |x: f64| {
                if t == 0.0 {
                    (x - lo) / (hi - lo)
                } else {
                    // stable for either sign
                    let num = (t * (x - hi)).exp() - (t * (lo - hi)).exp();
                    let den = 1.0 - (t * (lo - hi)).exp();
                    num / den
                }
            };
            let ks = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = cdf(x);
                    (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.01, "t = {t}: ks {ks}");
        }
    }
}
