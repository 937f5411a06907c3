use crate::image::ComplexImage;
use crate::linops::wavelet::{dwt2, WaveletCoeffs};
use crate::{Error, Result};

/// Relative threshold `τ` used when none is configured.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 0.01;

/// Set of significant wavelet coefficient positions of a reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    side: usize,
    members: Vec<bool>,
    threshold: f64,
}

impl SupportSet {
    pub fn empty(side: usize) -> Self {
        SupportSet {
            side,
            members: vec![false; side * side],
            threshold: f64::INFINITY,
        }
    }

    pub fn full(side: usize) -> Self {
        SupportSet {
            side,
            members: vec![true; side * side],
            threshold: 0.0,
        }
    }

    /// Builds a support from row-major flat indices.
    pub fn from_indices(side: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut s = Self::empty(side);
        for k in indices {
            if k >= side * side {
                return Err(Error::dim(format!("support index {k} outside {side}x{side} grid")));
            }
            s.members[k] = true;
        }
        s.threshold = f64::NAN;
        Ok(s)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Absolute threshold `ε̂` the set was built with.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    #[inline]
    pub fn contains(&self, k: usize) -> bool {
        self.members[k]
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let side = self.side;
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / side, k % side))
    }

    pub fn mask(&self) -> &[bool] {
        &self.members
    }
}

/// `{(i,j) : |(W x_ref)_{ij}| ≥ τ · max |W x_ref|}`. An all-zero reference has
/// an empty support.
pub fn estimate_support(reference: &ComplexImage, tau: f64, levels: usize) -> Result<SupportSet> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::param(format!("support threshold {tau} outside (0, 1)")));
    }
    let w = dwt2(reference, levels)?;
    let max = w.max_magnitude();
    let side = reference.side();
    if max == 0.0 {
        let mut s = SupportSet::empty(side);
        s.threshold = 0.0;
        return Ok(s);
    }
    let threshold = tau * max;
    Ok(SupportSet {
        side,
        members: w.as_slice().iter().map(|z| z.norm() >= threshold).collect(),
        threshold,
    })
}

/// Zeroes the coefficients inside the support and passes the rest through.
pub fn restrict_complement(coeffs: &WaveletCoeffs, support: &SupportSet) -> Result<WaveletCoeffs> {
    if coeffs.side() != support.side() {
        return Err(Error::dim("support and coefficient grids differ"));
    }
    let mut out = coeffs.clone();
    for (z, &inside) in out.as_mut_slice().iter_mut().zip(&support.members) {
        if inside {
            *z = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(side: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::from_fn(side, |_, _| Complex64::new(rng.random_range(-1.0..1.0), 0.0))
    }

    #[test]
    fn matches_exhaustive_scan() {
        let x = random_image(8, 11);
        let s = estimate_support(&x, 0.1, 1).unwrap();
        let w = dwt2(&x, 1).unwrap();
        let mut max = 0.0f64;
        for z in w.as_slice() {
            max = max.max(z.norm());
        }
        for k in 0..64 {
            assert_eq!(s.contains(k), w.as_slice()[k].norm() >= 0.1 * max, "index {k}");
        }
        assert_eq!(s.threshold(), 0.1 * max);
    }

    #[test]
    fn threshold_above_max_is_empty_and_tiny_tau_is_full() {
        let x = random_image(8, 12);
        // τ just below 1 keeps only the maximum itself
        let s = estimate_support(&x, 0.999_999_999, 1).unwrap();
        assert_eq!(s.len(), 1);
        let w = dwt2(&x, 1).unwrap();
        assert!(w.as_slice().iter().all(|z| z.norm() > 0.0));
        assert_eq!(estimate_support(&x, 1e-300, 1).unwrap().len(), 64);
    }

    #[test]
    fn zero_reference_gives_empty_support() {
        let s = estimate_support(&ComplexImage::zeros(8), 0.5, 1).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn rejects_tau_outside_unit_interval() {
        assert!(estimate_support(&ComplexImage::zeros(8), 0.0, 1).is_err());
        assert!(estimate_support(&ComplexImage::zeros(8), 1.0, 1).is_err());
    }

    #[test]
    fn restriction_matches_indicator_product_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_image(16, 14);
        let w = dwt2(&x, 2).unwrap();
        let picks: Vec<usize> = (0..256).filter(|_| rng.random_bool(0.3)).collect();
        let s = SupportSet::from_indices(16, picks.iter().copied()).unwrap();
        let r = restrict_complement(&w, &s).unwrap();
        for k in 0..256 {
            let ind = if picks.contains(&k) { 0.0 } else { 1.0 };
            assert_eq!(r.as_slice()[k], w.as_slice()[k] * ind);
        }
        assert_eq!(restrict_complement(&r, &s).unwrap(), r);
        assert_eq!(restrict_complement(&w, &SupportSet::empty(16)).unwrap(), w);
        let zeroed = restrict_complement(&w, &SupportSet::full(16)).unwrap();
        assert_eq!(zeroed.norm(), 0.0);
    }
}
