//! Reconstruction quality and code sparsity.

use crate::{ComplexImage, Error, Result};

/// Reported PSNR when the images are identical.
pub const PSNR_CAP: f64 = 300.0;

/// `10·log₁₀(peak² / MSE)` between magnitude images, with `peak` the largest
/// magnitude of `truth`. Capped at [`PSNR_CAP`].
pub fn psnr(recon: &ComplexImage, truth: &ComplexImage) -> Result<f64> {
    if recon.side() != truth.side() {
        return Err(Error::dim(format!(
            "reconstruction is {0}x{0}, truth is {1}x{1}",
            recon.side(),
            truth.side()
        )));
    }
    let peak = truth.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::param("truth image is identically zero"));
    }
    let mse = recon
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| {
            let d = a.norm() - b.norm();
            d * d
        })
        .sum::<f64>()
        / recon.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP))
}

/// Gini index of `|values|`: 0 for a flat vector, `1 − 1/N` for a one-hot
/// vector. Defined as 0 for an all-zero (or empty) vector.
pub fn gini_index(values: &[f64]) -> f64 {
    let mut c: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let total: f64 = c.iter().sum();
    if c.is_empty() || total == 0.0 || !total.is_finite() {
        return 0.0;
    }
    c.sort_by(f64::total_cmp);
    let n = c.len() as f64;
    let weighted: f64 = c
        .iter()
        .enumerate()
        .map(|(k, &v)| (v / total) * ((n - (k + 1) as f64 + 0.5) / n))
        .sum();
    1.0 - 2.0 * weighted
}

/// Mean of the per-vector Gini indices.
pub fn mean_gini<'a>(vectors: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let (sum, count) = vectors
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + gini_index(v), n + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex64;
    use proptest::prelude::*;

    fn img(values: &[f64]) -> ComplexImage {
        let side = (values.len() as f64).sqrt() as usize;
        ComplexImage::from_real(side, values).unwrap()
    }

    #[test]
    fn identical_images_hit_the_cap() {
        let a = img(&[0.1, 0.5, 1.0, 0.0]);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
    }

    #[test]
    fn unit_range_mse_hundredth_is_twenty_db() {
        let truth = img(&[1.0, 0.0, 0.0, 0.0]);
        // every pixel off by 0.1 → MSE 0.01
        let recon = img(&[0.9, 0.1, 0.1, 0.1]);
        assert!((psnr(&recon, &truth).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_rejects_mismatch_and_zero_truth() {
        let a = img(&[1.0; 4]);
        let b = img(&[1.0; 16]);
        assert!(psnr(&a, &b).is_err());
        assert!(psnr(&a, &img(&[0.0; 4])).is_err());
    }

    #[test]
    fn psnr_uses_magnitudes() {
        let truth = ComplexImage::from_vec(2, vec![Complex64::new(0.0, 1.0); 4]).unwrap();
        let recon = ComplexImage::from_vec(2, vec![Complex64::new(1.0, 0.0); 4]).unwrap();
        assert_eq!(psnr(&recon, &truth).unwrap(), PSNR_CAP);
    }

    #[test]
    fn gini_closed_forms() {
        assert!(gini_index(&[3.0; 10]).abs() < 1e-12);
        let mut one_hot = vec![0.0; 8];
        one_hot[5] = 2.5;
        assert!((gini_index(&one_hot) - (1.0 - 1.0 / 8.0)).abs() < 1e-12);
        assert_eq!(gini_index(&[0.0; 5]), 0.0);
        assert_eq!(gini_index(&[]), 0.0);
    }

    fn direct_psnr(a: &[f64], b: &[f64]) -> f64 {
        let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mse: f64 = a.iter().zip(b).map(|(x, y)| (x.abs() - y.abs()).powi(2)).sum::<f64>()
            / a.len() as f64;
        10.0 * (peak * peak / mse).log10()
    }

    fn direct_gini(v: &[f64]) -> f64 {
        // mean-absolute-difference form, independent of sorting
        let n = v.len() as f64;
        let a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        let mean = a.iter().sum::<f64>() / n;
        let mut diff = 0.0;
        for x in &a {
            for y in &a {
                diff += (x - y).abs();
            }
        }
        diff / (2.0 * n * n * mean)
    }

    proptest! {
        #[test]
        fn psnr_matches_direct_formula(
            a in proptest::collection::vec(0.0f64..1.0, 16),
            b in proptest::collection::vec(0.01f64..1.0, 16),
        ) {
            prop_assume!(a != b);
            let got = psnr(&img(&a), &img(&b)).unwrap();
            prop_assert!((got - direct_psnr(&a, &b)).abs() < 1e-12 * got.abs().max(1.0));
        }

        #[test]
        fn gini_matches_pairwise_form(v in proptest::collection::vec(0.0f64..5.0, 1..40)) {
            prop_assume!(v.iter().sum::<f64>() > 0.0);
            prop_assert!((gini_index(&v) - direct_gini(&v)).abs() < 1e-12);
        }

        #[test]
        fn gini_is_scale_invariant(v in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let scaled: Vec<f64> = v.iter().map(|x| 7.3 * x).collect();
            prop_assert!((gini_index(&v) - gini_index(&scaled)).abs() < 1e-12);
        }

        #[test]
        fn gini_never_drops_when_sparsifying(v in proptest::collection::vec(0.0f64..5.0, 2..40)) {
            let nonzero = v.iter().filter(|x| **x > 0.0).count();
            prop_assume!(nonzero >= 2);
            let mut w = v.clone();
            let (idx, _) = w
                .iter()
                .enumerate()
                .filter(|(_, x)| **x > 0.0)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            let removed = w[idx];
            w[idx] = 0.0;
            let total: f64 = v.iter().sum();
            for x in &mut w {
                *x *= total / (total - removed);
            }
            prop_assert!(gini_index(&w) >= gini_index(&v) - 1e-12);
        }

        #[test]
        fn gini_in_unit_interval(v in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let g = gini_index(&v);
            prop_assert!((0.0..1.0).contains(&g) || g.abs() < 1e-12);
        }
    }
}
