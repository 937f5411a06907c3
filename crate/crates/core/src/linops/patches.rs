//! Overlapping patch operator `P_i` (stride one, periodic wraparound) and its
//! adjoint.
//!
//! Patch `i` has its top-left pixel at `(i / side, i % side)`. Pixels inside a
//! patch are listed row-major. Complex images are stacked as `[re; im]`, so
//! a patch vector has length `2L`.

use num_complex::Complex64;

use crate::image::ComplexImage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    patch_side: usize,
    image_side: usize,
    stacked: bool,
    data: Vec<f64>,
}

impl PatchMatrix {
    pub fn zeros(image_side: usize, patch_side: usize, stacked: bool) -> Self {
        let len = patch_side * patch_side * if stacked { 2 } else { 1 };
        PatchMatrix {
            patch_side,
            image_side,
            stacked,
            data: vec![0.0; len * image_side * image_side],
        }
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn patch_area(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn image_side(&self) -> usize {
        self.image_side
    }

    pub fn is_stacked(&self) -> bool {
        self.stacked
    }

    /// Length of one column (`L` or `2L`).
    pub fn column_len(&self) -> usize {
        self.patch_area() * if self.stacked { 2 } else { 1 }
    }

    pub fn num_patches(&self) -> usize {
        self.image_side * self.image_side
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let len = self.column_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        let len = self.column_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Top-left pixel of patch `i`.
    pub fn location(&self, i: usize) -> (usize, usize) {
        (i / self.image_side, i % self.image_side)
    }

    /// Image pixel index covered by entry `p` (in `0..L`) of patch `i`.
    #[inline]
    pub fn pixel_of(&self, i: usize, p: usize) -> usize {
        let s = self.image_side;
        let (r0, c0) = (i / s, i % s);
        let (dr, dc) = (p / self.patch_side, p % self.patch_side);
        ((r0 + dr) % s) * s + (c0 + dc) % s
    }
}

fn patch_side_for(area: usize, image_side: usize) -> Result<usize> {
    let side = (area as f64).sqrt().round() as usize;
    if area == 0 || side * side != area {
        return Err(Error::param(format!("patch area {area} is not a perfect square")));
    }
    if side > image_side {
        return Err(Error::param(format!(
            "patch side {side} exceeds image side {image_side}"
        )));
    }
    Ok(side)
}

fn extract(image: &ComplexImage, patch_area: usize, stacked: bool) -> Result<PatchMatrix> {
    let ps = patch_side_for(patch_area, image.side())?;
    let mut out = PatchMatrix::zeros(image.side(), ps, stacked);
    let px = image.as_slice();
    let area = ps * ps;
    for i in 0..out.num_patches() {
        for p in 0..area {
            let v = px[out.pixel_of(i, p)];
            let col = out.column_mut(i);
            col[p] = v.re;
            if stacked {
                col[area + p] = v.im;
            }
        }
    }
    Ok(out)
}

/// `[P_1 x, …, P_n x]` with complex entries stacked as `[re; im]`.
pub fn extract_patches(image: &ComplexImage, patch_area: usize) -> Result<PatchMatrix> {
    extract(image, patch_area, true)
}

/// Real parts only; columns have length `L`.
pub fn extract_real_patches(image: &ComplexImage, patch_area: usize) -> Result<PatchMatrix> {
    extract(image, patch_area, false)
}

/// `Σ_i P_iᵀ p_i`. This is a sum, so `assemble(extract(x)) = L·x`.
pub fn assemble_patches(patches: &PatchMatrix) -> ComplexImage {
    let mut img = ComplexImage::zeros(patches.image_side());
    let area = patches.patch_area();
    for i in 0..patches.num_patches() {
        let col = patches.column(i);
        for p in 0..area {
            let im = if patches.is_stacked() { col[area + p] } else { 0.0 };
            img.as_mut_slice()[patches.pixel_of(i, p)] += Complex64::new(col[p], im);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn indexed_image(side: usize) -> ComplexImage {
        ComplexImage::from_fn(side, |r, c| Complex64::new((r * side + c) as f64, 0.0))
    }

    #[test]
    fn constant_image_gives_constant_columns() {
        let img = ComplexImage::from_fn(8, |_, _| Complex64::new(2.5, 0.0));
        let p = extract_real_patches(&img, 4).unwrap();
        assert_eq!(p.num_patches(), 64);
        for i in 0..64 {
            assert!(p.column(i).iter().all(|&v| v == 2.5));
        }
    }

    #[test]
    fn corner_patch_wraps() {
        let p = extract_real_patches(&indexed_image(4), 4).unwrap();
        assert_eq!(p.num_patches(), 16);
        // brute-force enumeration of the wrapped 2x2 window at (3, 3)
        let mut expected: Vec<f64> = Vec::new();
        for dr in 0..2 {
            for dc in 0..2 {
                expected.push((((3 + dr) % 4) * 4 + (3 + dc) % 4) as f64);
            }
        }
        assert_eq!(p.column(15), expected.as_slice());
        let mut got = p.column(15).to_vec();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.0, 3.0, 12.0, 15.0]);
    }

    #[test]
    fn full_size_patches_are_cyclic_shifts() {
        let img = indexed_image(4);
        let p = extract_real_patches(&img, 16).unwrap();
        for i in 0..16 {
            let (r0, c0) = (i / 4, i % 4);
            for r in 0..4 {
                for c in 0..4 {
                    let v = img.get((r0 + r) % 4, (c0 + c) % 4).re;
                    assert_eq!(p.column(i)[r * 4 + c], v);
                }
            }
        }
    }

    #[test]
    fn rejects_non_square_area() {
        assert!(extract_patches(&ComplexImage::zeros(8), 6).is_err());
        assert!(extract_patches(&ComplexImage::zeros(4), 25).is_err());
    }

    #[test]
    fn complex_entries_are_stacked() {
        let img = ComplexImage::from_fn(4, |r, c| Complex64::new(r as f64, c as f64));
        let p = extract_patches(&img, 4).unwrap();
        assert_eq!(p.column_len(), 8);
        assert_eq!(p.column(5), &[1.0, 1.0, 2.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn single_patch_assembles_onto_footprint() {
        let mut p = PatchMatrix::zeros(8, 2, true);
        p.column_mut(9).copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, -1.0]);
        let img = assemble_patches(&p);
        assert_eq!(img.get(1, 1), Complex64::new(1.0, 0.0));
        assert_eq!(img.get(1, 2), Complex64::new(2.0, 0.0));
        assert_eq!(img.get(2, 1), Complex64::new(3.0, 0.0));
        assert_eq!(img.get(2, 2), Complex64::new(4.0, -1.0));
        let nonzero = img.as_slice().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn dense_operator_sum_is_scaled_identity() {
        // Build every P_i as an explicit 0/1 matrix on an 8x8 image and sum P_iᵀP_i.
        let side = 8;
        let n = side * side;
        let area = 4;
        let probe = extract_real_patches(&ComplexImage::zeros(side), area).unwrap();
        let mut gram = vec![0usize; n * n];
        for i in 0..n {
            // explicit L x n selection matrix for P_i
            let mut sel = vec![0usize; area * n];
            for p in 0..area {
                sel[p * n + probe.pixel_of(i, p)] = 1;
            }
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += (0..area).map(|p| sel[p * n + a] * sel[p * n + b]).sum::<usize>();
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                assert_eq!(gram[a * n + b], if a == b { area } else { 0 });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ComplexImage::from_fn(side, |_, _| {
            Complex64::new(rng.random_range(-5..5) as f64, rng.random_range(-5..5) as f64)
        });
        let back = assemble_patches(&extract_patches(&x, area).unwrap());
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert_eq!(*a, b * area as f64);
        }
    }

    proptest! {
        #[test]
        fn assemble_extract_is_exact_on_integer_images(
            vals in proptest::collection::vec(-100i32..100, 64),
            area in prop::sample::select(vec![1usize, 4, 9, 16]),
        ) {
            let x = ComplexImage::from_fn(8, |r, c| Complex64::new(vals[r * 8 + c] as f64, -(vals[c * 8 + r] as f64)));
            let back = assemble_patches(&extract_patches(&x, area).unwrap());
            for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
                prop_assert_eq!(*a, b * area as f64);
            }
        }

        #[test]
        fn patch_adjoint_identity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = ComplexImage::from_fn(8, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let mut q = PatchMatrix::zeros(8, 3, true);
            for i in 0..q.num_patches() {
                for v in q.column_mut(i) {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            let px = extract_patches(&x, 9).unwrap();
            let lhs: f64 = px.as_slice().iter().zip(q.as_slice()).map(|(a, b)| a * b).sum();
            let rhs = x.inner(&assemble_patches(&q)).re;
            let scale = x.norm() * q.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }
}
