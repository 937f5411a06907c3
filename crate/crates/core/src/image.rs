use num_complex::Complex64;

use crate::{Error, Result};

/// Square complex image stored row-major. The side length is a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    side: usize,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn zeros(side: usize) -> Self {
        assert!(side.is_power_of_two(), "image side must be a power of two");
        ComplexImage {
            side,
            data: vec![Complex64::new(0.0, 0.0); side * side],
        }
    }

    /// Validating constructor for data coming from outside the library.
    pub fn from_vec(side: usize, data: Vec<Complex64>) -> Result<Self> {
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::dim(format!("image side {side} is not a power of two")));
        }
        if data.len() != side * side {
            return Err(Error::dim(format!(
                "expected {} pixels for side {side}, got {}",
                side * side,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("image contains non-finite entries"));
        }
        Ok(ComplexImage { side, data })
    }

    pub fn from_real(side: usize, values: &[f64]) -> Result<Self> {
        Self::from_vec(side, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut img = Self::zeros(side);
        for r in 0..side {
            for c in 0..side {
                img.data[r * side + c] = f(r, c);
            }
        }
        img
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    /// Pixel count `n`.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.side + col] = value;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Σ a_k · conj(b_k)`.
    pub fn inner(&self, other: &ComplexImage) -> Complex64 {
        debug_assert_eq!(self.side, other.side);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn sub(&self, other: &ComplexImage) -> ComplexImage {
        debug_assert_eq!(self.side, other.side);
        ComplexImage {
            side: self.side,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn distance(&self, other: &ComplexImage) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}
