//! PNG images and CSV tables.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use dnbg::admm::IterationRecord;
use dnbg::ComplexImage;
use image::GrayImage;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Gain applied to error maps.
pub const ERROR_GAIN: f64 = 4.0;

fn to_gray(side: usize, values: impl Iterator<Item = f64>) -> GrayImage {
    let bytes = values
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    GrayImage::from_raw(side as u32, side as u32, bytes).expect("one byte per pixel")
}

fn save(img: &GrayImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| CliError::Png {
            path: path.to_path_buf(),
            source,
        })
}

/// 8-bit magnitude image; magnitudes above 1 saturate.
pub fn write_magnitude(img: &ComplexImage, path: &Path) -> Result<()> {
    save(&to_gray(img.side(), img.as_slice().iter().map(|v| v.norm())), path)
}

/// `ERROR_GAIN · ||recon| − |truth||` as an 8-bit image.
pub fn write_error_map(recon: &ComplexImage, truth: &ComplexImage, path: &Path) -> Result<()> {
    let err = recon
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| ERROR_GAIN * (a.norm() - b.norm()).abs());
    save(&to_gray(recon.side(), err), path)
}

/// CSV writer to a file or standard output.
pub struct Table {
    inner: csv::Writer<Box<dyn Write>>,
    name: String,
}

impl Table {
    pub fn create(path: Option<&Path>) -> Result<Self> {
        let (sink, name): (Box<dyn Write>, String) = match path {
            Some(p) => (
                Box::new(File::create(p).map_err(|e| CliError::io(p, e))?),
                p.display().to_string(),
            ),
            None => (Box::new(std::io::stdout()), "<stdout>".into()),
        };
        Ok(Table {
            inner: csv::Writer::from_writer(sink),
            name,
        })
    }

    fn wrap(&self, source: csv::Error) -> CliError {
        CliError::Csv {
            path: self.name.clone().into(),
            source,
        }
    }

    pub fn row(&mut self, row: &impl Serialize) -> Result<()> {
        self.inner.serialize(row).map_err(|e| self.wrap(e))
    }

    /// Flushes so that rows already written survive a later failure.
    pub fn flush(&mut self) -> Result<()> {
        self.inner
            .flush()
            .map_err(|e| CliError::io(self.name.clone(), e))
    }
}

#[derive(Debug, Serialize)]
pub struct DiagnosticRow {
    pub frame: usize,
    pub iteration: usize,
    pub relative_change: f64,
    pub data_error: f64,
    pub dual_gap: f64,
    pub psnr: Option<f64>,
    pub active_atoms: usize,
    pub gini: f64,
    pub gamma_eps: f64,
    pub seconds: f64,
}

impl DiagnosticRow {
    pub fn new(frame: usize, r: &IterationRecord) -> Self {
        DiagnosticRow {
            frame,
            iteration: r.iteration,
            relative_change: r.relative_change,
            data_error: r.data_error,
            dual_gap: r.dual_gap,
            psnr: r.psnr,
            active_atoms: r.active_atoms,
            gini: r.gini,
            gamma_eps: r.gamma_eps,
            seconds: r.seconds,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FrameRow {
    pub frame: usize,
    pub psnr: Option<f64>,
    pub zero_filled_psnr: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct EvaluationRow {
    pub frame: usize,
    pub psnr: f64,
    /// Gini index of the reconstruction's wavelet coefficient magnitudes.
    pub wavelet_gini: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub runs: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub gini_mean: f64,
    pub gini_std: f64,
    pub iteration_seconds_mean: f64,
    pub iteration_seconds_std: f64,
}

/// Sample mean and standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn gray_saturates() {
        let g = to_gray(2, [-1.0, 0.0, 0.5, 3.0].into_iter());
        assert_eq!(g.as_raw(), &[0, 0, 128, 255]);
    }
}
