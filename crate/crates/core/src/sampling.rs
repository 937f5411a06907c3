//! Radial Cartesian undersampling masks and measured k-space frames.
//!
//! Masks live in the centered k-space layout of [`crate::linops::fft2c`]:
//! DC is the cell `(side/2, side/2)` and every ray passes through it.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::image::ComplexImage;
use crate::linops::apply_fu;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    side: usize,
    bits: Vec<bool>,
    num_rays: usize,
    sampled: Vec<usize>,
}

impl SamplingMask {
    pub fn from_bits(side: usize, bits: Vec<bool>, num_rays: usize) -> Result<Self> {
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::dim(format!("mask side {side} is not a power of two")));
        }
        if bits.len() != side * side {
            return Err(Error::dim(format!(
                "mask of side {side} needs {} cells, got {}",
                side * side,
                bits.len()
            )));
        }
        let sampled: Vec<usize> = (0..bits.len()).filter(|&k| bits[k]).collect();
        if sampled.is_empty() {
            return Err(Error::param("mask samples no k-space location"));
        }
        Ok(SamplingMask {
            side,
            bits,
            num_rays,
            sampled,
        })
    }

    pub fn full(side: usize) -> Self {
        Self::from_bits(side, vec![true; side * side], 0).expect("valid full mask")
    }

    /// `num_rays` full-diameter lines at angles `seed_angle + kπ/num_rays`
    /// through DC. Along the major axis of each line, every row (or column)
    /// gets the cell whose center lies within half a cell of the line along
    /// the minor axis, so each line covers one cell per step. The result is
    /// then made point-symmetric about DC (modulo the grid) so masks respect
    /// the Hermitian symmetry of real images.
    pub fn radial(side: usize, num_rays: usize, seed_angle: f64) -> Result<Self> {
        if num_rays == 0 {
            return Err(Error::param("radial mask needs at least one ray"));
        }
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::dim(format!("mask side {side} is not a power of two")));
        }
        let center = (side / 2) as f64;
        let dirs: Vec<(f64, f64, f64)> = (0..num_rays)
            .map(|k| {
                let theta = seed_angle + k as f64 * PI / num_rays as f64;
                let (s, c) = theta.sin_cos();
                (c, s, 0.5 * c.abs().max(s.abs()))
            })
            .collect();
        let mut bits = vec![false; side * side];
        for r in 0..side {
            let py = r as f64 - center;
            for c in 0..side {
                let px = c as f64 - center;
                if dirs.iter().any(|&(dx, dy, half)| (px * dy - py * dx).abs() <= half + 1e-9) {
                    bits[r * side + c] = true;
                }
            }
        }
        for r in 0..side {
            for c in 0..side {
                if bits[r * side + c] {
                    let mr = (side - r) % side;
                    let mc = (side - c) % side;
                    bits[mr * side + mc] = true;
                }
            }
        }
        Self::from_bits(side, bits, num_rays)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_rays(&self) -> usize {
        self.num_rays
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn is_sampled(&self, k: usize) -> bool {
        self.bits[k]
    }

    /// Row-major flat indices of sampled cells.
    pub fn sampled_indices(&self) -> &[usize] {
        &self.sampled
    }

    pub fn count(&self) -> usize {
        self.sampled.len()
    }

    /// `m / n`.
    pub fn rate(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn dc_index(&self) -> usize {
        (self.side / 2) * self.side + self.side / 2
    }
}

/// Realized sampling rate of a `num_rays` radial mask.
pub fn rate_for_rays(side: usize, num_rays: usize) -> Result<f64> {
    Ok(SamplingMask::radial(side, num_rays, 0.0)?.rate())
}

/// Smallest ray count whose radial mask reaches `target_rate`.
pub fn rays_for_rate(side: usize, target_rate: f64) -> Result<usize> {
    if !(target_rate > 0.0 && target_rate <= 1.0) {
        return Err(Error::param(format!("sampling rate {target_rate} outside (0, 1]")));
    }
    // Beyond 4·side rays every cell is within half a cell of some line.
    for rays in 1..=4 * side {
        if rate_for_rays(side, rays)? >= target_rate {
            return Ok(rays);
        }
    }
    Err(Error::param(format!(
        "rate {target_rate} is not reachable on a {side}x{side} grid"
    )))
}

/// Radial mask for a target rate.
pub fn mask_for_rate(side: usize, target_rate: f64) -> Result<SamplingMask> {
    SamplingMask::radial(side, rays_for_rate(side, target_rate)?, 0.0)
}

/// Measured k-space values `y` on the sampled cells of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceFrame {
    mask: Arc<SamplingMask>,
    values: Vec<Complex64>,
    frame_index: usize,
    noise_bound: f64,
}

impl KSpaceFrame {
    pub fn new(
        mask: Arc<SamplingMask>,
        values: Vec<Complex64>,
        frame_index: usize,
        noise_bound: f64,
    ) -> Result<Self> {
        if values.len() != mask.count() {
            return Err(Error::dim(format!(
                "{} measurements for a mask with {} samples",
                values.len(),
                mask.count()
            )));
        }
        Ok(KSpaceFrame {
            mask,
            values,
            frame_index,
            noise_bound,
        })
    }

    pub fn mask(&self) -> &Arc<SamplingMask> {
        &self.mask
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    /// `ε̃`: Euclidean norm of the noise added when the frame was simulated.
    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn side(&self) -> usize {
        self.mask.side()
    }

    pub fn with_index(mut self, frame_index: usize) -> Self {
        self.frame_index = frame_index;
        self
    }
}

/// `y = F_u x + w` with circular complex Gaussian `w`, per-component standard
/// deviation `noise_sigma`.
pub fn measure<R: Rng + ?Sized>(
    image: &ComplexImage,
    mask: &Arc<SamplingMask>,
    noise_sigma: f64,
    frame_index: usize,
    rng: &mut R,
) -> Result<KSpaceFrame> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::param(format!("noise sigma {noise_sigma} must be ≥ 0")));
    }
    let exact = apply_fu(image, mask)?;
    let mut values = exact.values().to_vec();
    let mut bound = 0.0;
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        for v in &mut values {
            let w = Complex64::new(normal.sample(rng), normal.sample(rng));
            bound += w.norm_sqr();
            *v += w;
        }
    }
    KSpaceFrame::new(Arc::clone(mask), values, frame_index, bound.sqrt())
}

/// Samples a sequence: frame 1 through `first`, every later frame through
/// `rest`. Noise is drawn from a stream derived from `seed`.
pub fn measure_sequence(
    frames: &[ComplexImage],
    first: &Arc<SamplingMask>,
    rest: &Arc<SamplingMask>,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<KSpaceFrame>> {
    let mut rng = crate::rng::stream(seed, &[crate::rng::TAG_NOISE]);
    frames
        .iter()
        .enumerate()
        .map(|(t, x)| measure(x, if t == 0 { first } else { rest }, noise_sigma, t + 1, &mut rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Rasterization oracle: walks each ray along its major axis and marks
    /// the nearest cell(s) on the minor axis, then mirrors about DC.
    fn oracle_mask(side: usize, rays: usize) -> Vec<bool> {
        let c0 = (side / 2) as f64;
        let mut out = vec![false; side * side];
        let mark = |r: i64, c: i64, out: &mut Vec<bool>| {
            if (0..side as i64).contains(&r) && (0..side as i64).contains(&c) {
                let (r, c) = (r as usize, c as usize);
                out[r * side + c] = true;
                out[((side - r) % side) * side + (side - c) % side] = true;
            }
        };
        for k in 0..rays {
            let t = k as f64 * PI / rays as f64;
            let (st, ct) = t.sin_cos();
            for step in 0..side as i64 {
                let u = step as f64 - c0;
                // minor-axis coordinate of the line at this major-axis step
                let (major_is_col, v) = if ct.abs() >= st.abs() {
                    (true, u * st / ct)
                } else {
                    (false, u * ct / st)
                };
                for cand in [v.floor(), v.ceil()] {
                    if (cand - v).abs() <= 0.5 + 1e-9 {
                        let (r, c) = if major_is_col {
                            (cand + c0, step as f64)
                        } else {
                            (step as f64, cand + c0)
                        };
                        mark(r as i64, c as i64, &mut out);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn single_horizontal_ray_is_one_row() {
        let m = SamplingMask::radial(32, 1, 0.0).unwrap();
        assert_eq!(m.bits(), oracle_mask(32, 1).as_slice());
        assert_eq!(m.count(), 32);
        assert!((m.rate() - 32.0 / 1024.0).abs() < 1e-15);
        assert!((0..32).all(|c| m.bits()[16 * 32 + c]));
    }

    #[test]
    fn matches_oracle_for_several_counts() {
        for rays in [2, 5, 9, 16] {
            assert_eq!(SamplingMask::radial(32, rays, 0.0).unwrap().bits(), oracle_mask(32, rays).as_slice());
        }
    }

    #[test]
    fn saturates_at_full_rate() {
        let rays = rays_for_rate(32, 1.0).unwrap();
        assert_eq!(rate_for_rays(32, rays).unwrap(), 1.0);
        assert!(rate_for_rays(32, rays - 1).unwrap() < 1.0);
    }

    #[test]
    fn symmetric_and_contains_dc() {
        for rays in 1..40 {
            let m = SamplingMask::radial(64, rays, 0.1 * rays as f64).unwrap();
            assert!(m.is_sampled(m.dc_index()));
            for r in 0..64 {
                for c in 0..64 {
                    let mirrored = ((64 - r) % 64) * 64 + (64 - c) % 64;
                    assert_eq!(m.bits()[r * 64 + c], m.bits()[mirrored]);
                }
            }
            assert_eq!(m.rate(), m.bits().iter().filter(|&&b| b).count() as f64 / 4096.0);
        }
    }

    #[test]
    fn rays_for_rate_matches_linear_sweep() {
        let found = rays_for_rate(64, 0.2).unwrap();
        let mut oracle = None;
        for k in 1..=256 {
            let m = SamplingMask::radial(64, k, 0.0).unwrap();
            if m.count() as f64 / 4096.0 >= 0.2 {
                oracle = Some(k);
                break;
            }
        }
        assert_eq!(Some(found), oracle);
        assert!(rays_for_rate(64, 0.0).is_err());
        assert!(rays_for_rate(64, 1.5).is_err());
    }

    #[test]
    fn noiseless_measurement_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = ComplexImage::from_fn(16, |r, c| Complex64::new((r * c) as f64, 1.0));
        let mask = Arc::new(SamplingMask::radial(16, 4, 0.0).unwrap());
        let y = measure(&img, &mask, 0.0, 3, &mut rng).unwrap();
        assert_eq!(y.values(), apply_fu(&img, &mask).unwrap().values());
        assert_eq!(y.frame_index(), 3);
        let z = measure(&ComplexImage::zeros(16), &mask, 0.0, 1, &mut rng).unwrap();
        assert!(z.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = ComplexImage::zeros(128);
        let mask = Arc::new(SamplingMask::full(128));
        let sigma = 0.3;
        let y = measure(&img, &mask, sigma, 1, &mut rng).unwrap();
        let n = y.values().len() as f64;
        let var_re = y.values().iter().map(|v| v.re * v.re).sum::<f64>() / n;
        let var_im = y.values().iter().map(|v| v.im * v.im).sum::<f64>() / n;
        assert!((var_re / (sigma * sigma) - 1.0).abs() < 0.1);
        assert!((var_im / (sigma * sigma) - 1.0).abs() < 0.1);
    }

    #[test]
    fn frame_rejects_wrong_value_count() {
        let mask = Arc::new(SamplingMask::radial(16, 2, 0.0).unwrap());
        assert!(KSpaceFrame::new(mask, vec![], 0, 0.0).is_err());
    }
}
