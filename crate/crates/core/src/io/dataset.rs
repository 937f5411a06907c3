use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::{Complex64, ComplexImage, Error, Result};

/// Largest accepted image side and frame count, to bound allocations when
/// reading untrusted headers.
pub const MAX_SIDE: usize = 1 << 12;
pub const MAX_FRAMES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    Real32,
    Complex64,
}

impl DType {
    /// Bytes per pixel.
    pub fn element_size(self) -> usize {
        match self {
            DType::Real32 => 4,
            DType::Complex64 => 8,
        }
    }

    fn components(self) -> usize {
        self.element_size() / 4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub side: usize,
    pub frames: usize,
    pub dtype: DType,
    /// Multiplier mapping stored values to unit magnitude range.
    pub intensity_scale: f64,
}

impl DatasetHeader {
    pub fn validate(&self) -> Result<()> {
        if self.side == 0 || self.side > MAX_SIDE {
            return Err(Error::format(format!("side {} out of range", self.side)));
        }
        if self.frames == 0 || self.frames > MAX_FRAMES {
            return Err(Error::format(format!("frame count {} out of range", self.frames)));
        }
        if !(self.intensity_scale > 0.0 && self.intensity_scale.is_finite()) {
            return Err(Error::format(format!(
                "intensity_scale {} must be positive",
                self.intensity_scale
            )));
        }
        Ok(())
    }

    pub fn payload_len(&self) -> usize {
        self.frames * self.side * self.side * self.dtype.element_size()
    }
}

/// An image sequence stored as single-precision samples, frame-major and
/// row-major, complex values interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    header: DatasetHeader,
    samples: Vec<f32>,
}

impl Dataset {
    pub fn new(header: DatasetHeader, samples: Vec<f32>) -> Result<Self> {
        header.validate()?;
        if samples.len() * 4 != header.payload_len() {
            return Err(Error::dim(format!(
                "{} samples for a {}x{}x{} {:?} dataset",
                samples.len(),
                header.frames,
                header.side,
                header.side,
                header.dtype
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("dataset contains non-finite samples"));
        }
        Ok(Dataset { header, samples })
    }

    /// Quantizes images to single precision.
    pub fn from_images(images: &[ComplexImage], dtype: DType, intensity_scale: f64) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::param("a dataset needs at least one frame"))?;
        let side = first.side();
        let mut samples = Vec::with_capacity(images.len() * side * side * dtype.components());
        for img in images {
            if img.side() != side {
                return Err(Error::dim("frames differ in size"));
            }
            for v in img.as_slice() {
                samples.push(v.re as f32);
                if dtype == DType::Complex64 {
                    samples.push(v.im as f32);
                }
            }
        }
        Dataset::new(
            DatasetHeader {
                side,
                frames: images.len(),
                dtype,
                intensity_scale,
            },
            samples,
        )
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn side(&self) -> usize {
        self.header.side
    }

    pub fn num_frames(&self) -> usize {
        self.header.frames
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    /// Frame `t` (zero-based), multiplied by the intensity scale.
    pub fn frame(&self, t: usize) -> ComplexImage {
        let n = self.side() * self.side();
        let comps = self.header.dtype.components();
        let chunk = &self.samples[t * n * comps..(t + 1) * n * comps];
        let scale = self.header.intensity_scale;
        let data = (0..n)
            .map(|i| {
                let re = chunk[i * comps] as f64 * scale;
                let im = if comps == 2 { chunk[i * comps + 1] as f64 * scale } else { 0.0 };
                Complex64::new(re, im)
            })
            .collect();
        ComplexImage::from_vec(self.side(), data).expect("chunk length matches the side")
    }

    pub fn frames(&self) -> Vec<ComplexImage> {
        (0..self.num_frames()).map(|t| self.frame(t)).collect()
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.samples.len() * 4];
        LittleEndian::write_f32_into(&self.samples, &mut out);
        out
    }

    pub fn encode_header(&self) -> String {
        serde_json::to_string_pretty(&self.header).expect("header is plain data")
    }

    /// Parses a JSON header and its raw payload.
    pub fn decode(header_json: &str, payload: &[u8]) -> Result<Self> {
        let header: DatasetHeader = serde_json::from_str(header_json)?;
        header.validate()?;
        if payload.len() != header.payload_len() {
            return Err(Error::format(format!(
                "payload has {} bytes, header implies {}",
                payload.len(),
                header.payload_len()
            )));
        }
        let mut samples = vec![0f32; payload.len() / 4];
        LittleEndian::read_f32_into(payload, &mut samples);
        Dataset::new(header, samples)
    }

    /// Writes `<stem>.json` and `<stem>.raw`.
    pub fn write(&self, stem: &Path) -> Result<()> {
        let (json, raw) = dataset_paths(stem);
        std::fs::write(&json, self.encode_header()).map_err(|e| Error::io(&json, e))?;
        std::fs::write(&raw, self.encode_payload()).map_err(|e| Error::io(&raw, e))
    }

    pub fn read(stem: &Path) -> Result<Self> {
        let (json, raw) = dataset_paths(stem);
        let header = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let payload = std::fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
        Dataset::decode(&header, &payload)
    }
}

/// Header and payload paths for a dataset stem; an existing `.json` or
/// `.raw` extension on the stem is replaced.
pub fn dataset_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let base = match stem.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => stem.with_extension(""),
        _ => stem.to_path_buf(),
    };
    let mut json = base.clone().into_os_string();
    json.push(".json");
    let mut raw = base.into_os_string();
    raw.push(".raw");
    (json.into(), raw.into())
}
