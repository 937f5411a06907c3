//! Centered, unitary 2-D DFT and the undersampled Fourier operator `F_u`.
//!
//! k-space is laid out with DC at `(side/2, side/2)`. The centering is done by
//! modulating the image with a `(-1)^(r+c)` checkerboard before the FFT,
//! which is exact for even sides.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::image::ComplexImage;
use crate::sampling::{KSpaceFrame, SamplingMask};
use crate::{Error, Result};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(side: usize) -> Plans {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry(side)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(side), planner.plan_fft_inverse(side))
            })
            .clone()
    })
}

fn transpose(data: &mut [Complex64], side: usize) {
    for r in 0..side {
        for c in (r + 1)..side {
            data.swap(r * side + c, c * side + r);
        }
    }
}

fn checkerboard(data: &mut [Complex64], side: usize) {
    if side == 1 {
        return;
    }
    for r in 0..side {
        for c in 0..side {
            if (r + c) % 2 == 1 {
                data[r * side + c] = -data[r * side + c];
            }
        }
    }
}

fn fft2_in_place(data: &mut [Complex64], side: usize, plan: &Arc<dyn Fft<f64>>) {
    plan.process(data);
    transpose(data, side);
    plan.process(data);
    transpose(data, side);
    let scale = 1.0 / side as f64;
    for z in data.iter_mut() {
        *z *= scale;
    }
}

/// Centered unitary forward DFT of the whole grid.
pub fn fft2c(image: &ComplexImage) -> Vec<Complex64> {
    let side = image.side();
    let mut data = image.as_slice().to_vec();
    checkerboard(&mut data, side);
    let (fwd, _) = plans(side);
    fft2_in_place(&mut data, side, &fwd);
    data
}

/// Inverse of [`fft2c`].
pub fn ifft2c(kspace: &[Complex64], side: usize) -> ComplexImage {
    assert_eq!(kspace.len(), side * side);
    let mut data = kspace.to_vec();
    let (_, inv) = plans(side);
    fft2_in_place(&mut data, side, &inv);
    checkerboard(&mut data, side);
    let mut img = ComplexImage::zeros(side);
    img.as_mut_slice().copy_from_slice(&data);
    img
}

/// `F_u x`: centered DFT restricted to the mask, values listed in row-major
/// order of the sampled locations.
pub fn apply_fu(image: &ComplexImage, mask: &Arc<SamplingMask>) -> Result<KSpaceFrame> {
    if image.side() != mask.side() {
        return Err(Error::dim(format!(
            "image side {} does not match mask side {}",
            image.side(),
            mask.side()
        )));
    }
    let full = fft2c(image);
    let values = mask.sampled_indices().iter().map(|&k| full[k]).collect();
    KSpaceFrame::new(Arc::clone(mask), values, 0, 0.0)
}

/// Zero-filled full grid holding the measurements at their mask positions.
pub fn kspace_embed(frame: &KSpaceFrame) -> Vec<Complex64> {
    let mask = frame.mask();
    let mut full = vec![Complex64::new(0.0, 0.0); mask.side() * mask.side()];
    for (&k, &v) in mask.sampled_indices().iter().zip(frame.values()) {
        full[k] = v;
    }
    full
}

/// `F_u^* y`: embed at mask positions, zero elsewhere, inverse DFT. This is
/// also the zero-filled reconstruction.
pub fn apply_fu_adjoint(frame: &KSpaceFrame) -> ComplexImage {
    ifft2c(&kspace_embed(frame), frame.mask().side())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SamplingMask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(side: usize, rng: &mut impl Rng) -> ComplexImage {
        ComplexImage::from_fn(side, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Dense centered DFT evaluated straight from the definition.
    fn dense_dft(image: &ComplexImage) -> Vec<Complex64> {
        let s = image.side();
        let n = (s * s) as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); s * s];
        for ku in 0..s {
            for kv in 0..s {
                let fu = ku as f64 - (s / 2) as f64;
                let fv = kv as f64 - (s / 2) as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..s {
                    for c in 0..s {
                        let phase = -2.0 * std::f64::consts::PI
                            * (fu * r as f64 + fv * c as f64)
                            / s as f64;
                        acc += image.get(r, c) * Complex64::from_polar(1.0, phase);
                    }
                }
                out[ku * s + kv] = acc / n.sqrt();
            }
        }
        out
    }

    #[test]
    fn zero_image_gives_zero_measurements() {
        let mask = Arc::new(SamplingMask::full(8));
        let y = apply_fu(&ComplexImage::zeros(8), &mask).unwrap();
        assert!(y.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn ones_image_has_single_dc_coefficient() {
        let img = ComplexImage::from_fn(4, |_, _| Complex64::new(1.0, 0.0));
        let full = fft2c(&img);
        let oracle = dense_dft(&img);
        for (k, (a, b)) in full.iter().zip(&oracle).enumerate() {
            assert!((a - b).norm() < 1e-12);
            if k == 2 * 4 + 2 {
                assert!((a - Complex64::new(4.0, 0.0)).norm() < 1e-12);
            } else {
                assert!(a.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_dense_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = random_image(8, &mut rng);
        let fast = fft2c(&img);
        let slow = dense_dft(&img);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn full_mask_round_trip_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mask = Arc::new(SamplingMask::full(16));
        let x = random_image(16, &mut rng);
        let y = apply_fu(&x, &mask).unwrap();
        let norm_y: f64 = y.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm_y - x.norm()).abs() <= 1e-10 * x.norm());
        let back = apply_fu_adjoint(&y);
        assert!(back.distance(&x) <= 1e-10 * x.norm());
    }

    #[test]
    fn zero_measurements_give_zero_image() {
        let mask = Arc::new(SamplingMask::radial(16, 3, 0.0).unwrap());
        let y = KSpaceFrame::new(
            Arc::clone(&mask),
            vec![Complex64::new(0.0, 0.0); mask.count()],
            0,
            0.0,
        )
        .unwrap();
        assert_eq!(apply_fu_adjoint(&y).norm(), 0.0);
    }

    #[test]
    fn rejects_mismatched_mask() {
        let mask = Arc::new(SamplingMask::full(8));
        assert!(matches!(
            apply_fu(&ComplexImage::zeros(16), &mask),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn adjoint_identity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..100 {
            let mask = Arc::new(SamplingMask::radial(16, 1 + trial % 7, 0.3 * trial as f64).unwrap());
            let x = random_image(16, &mut rng);
            let yv: Vec<Complex64> = (0..mask.count())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let y = KSpaceFrame::new(Arc::clone(&mask), yv.clone(), 0, 0.0).unwrap();
            let fx = apply_fu(&x, &mask).unwrap();
            let lhs: Complex64 = fx.values().iter().zip(&yv).map(|(a, b)| a * b.conj()).sum();
            let rhs = x.inner(&apply_fu_adjoint(&y));
            let ny = yv.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!((lhs - rhs).norm() <= 1e-10 * x.norm() * ny);
        }
    }
}
