//! Orthonormal separable 2-D Daubechies-4 (four-tap) wavelet transform with
//! periodic boundaries, Mallat subband layout.

use num_complex::Complex64;

use crate::image::ComplexImage;
use crate::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const NORM: f64 = 5.656_854_249_492_381; // 4·√2

const LO: [f64; 4] = [
    (1.0 + SQRT3) / NORM,
    (3.0 + SQRT3) / NORM,
    (3.0 - SQRT3) / NORM,
    (1.0 - SQRT3) / NORM,
];
const HI: [f64; 4] = [LO[3], -LO[2], LO[1], -LO[0]];

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    side: usize,
    levels: usize,
    data: Vec<Complex64>,
}

impl WaveletCoeffs {
    pub fn zeros(side: usize, levels: usize) -> Self {
        WaveletCoeffs {
            side,
            levels,
            data: vec![Complex64::new(0.0, 0.0); side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `log2(side) - 2`, floored at zero.
pub fn default_levels(side: usize) -> usize {
    (side.trailing_zeros() as usize).saturating_sub(2)
}

fn check_levels(side: usize, levels: usize) -> Result<()> {
    if levels >= usize::BITS as usize || (1usize << levels) > side {
        return Err(Error::param(format!(
            "{levels} decomposition levels do not fit a side of {side}"
        )));
    }
    Ok(())
}

fn analyze(input: &[Complex64], out: &mut [Complex64]) {
    let m = input.len();
    let half = m / 2;
    for i in 0..half {
        let mut a = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for k in 0..4 {
            let x = input[(2 * i + k) % m];
            a += x * LO[k];
            d += x * HI[k];
        }
        out[i] = a;
        out[half + i] = d;
    }
}

fn synthesize(input: &[Complex64], out: &mut [Complex64]) {
    let m = input.len();
    let half = m / 2;
    out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    for i in 0..half {
        let (a, d) = (input[i], input[half + i]);
        for k in 0..4 {
            out[(2 * i + k) % m] += a * LO[k] + d * HI[k];
        }
    }
}

fn for_each_line(
    data: &mut [Complex64],
    side: usize,
    m: usize,
    f: fn(&[Complex64], &mut [Complex64]),
) {
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for r in 0..m {
        line.copy_from_slice(&data[r * side..r * side + m]);
        f(&line, &mut out);
        data[r * side..r * side + m].copy_from_slice(&out);
    }
    for c in 0..m {
        for r in 0..m {
            line[r] = data[r * side + c];
        }
        f(&line, &mut out);
        for r in 0..m {
            data[r * side + c] = out[r];
        }
    }
}

pub fn dwt2(image: &ComplexImage, levels: usize) -> Result<WaveletCoeffs> {
    let side = image.side();
    check_levels(side, levels)?;
    let mut data = image.as_slice().to_vec();
    let mut m = side;
    for _ in 0..levels {
        for_each_line(&mut data, side, m, analyze);
        m /= 2;
    }
    Ok(WaveletCoeffs { side, levels, data })
}

pub fn idwt2(coeffs: &WaveletCoeffs) -> ComplexImage {
    let side = coeffs.side;
    let mut data = coeffs.data.clone();
    for level in (0..coeffs.levels).rev() {
        let m = side >> level;
        for_each_line(&mut data, side, m, synthesize);
    }
    let mut img = ComplexImage::zeros(side);
    img.as_mut_slice().copy_from_slice(&data);
    img
}
