//! Measured k-space sequences: `DNBGKSP1`, a frame count, then per frame the
//! side, ray count, frame index, noise bound, packed mask bits, measurement
//! count and interleaved `(re, im)` doubles. Little-endian throughout.

use std::path::Path;
use std::sync::Arc;

use super::bytes::{Reader, Writer};
use super::{MAX_FRAMES, MAX_SIDE};
use crate::sampling::{KSpaceFrame, SamplingMask};
use crate::{Complex64, Error, Result};

pub const KSPACE_MAGIC: &[u8; 8] = b"DNBGKSP1";

pub fn encode_kspace(frames: &[KSpaceFrame]) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(KSPACE_MAGIC);
    w.u32(frames.len() as u32);
    for f in frames {
        let mask = f.mask();
        w.u32(mask.side() as u32);
        w.u32(mask.num_rays() as u32);
        w.u64(f.frame_index() as u64);
        w.f64(f.noise_bound());
        w.bits(mask.bits());
        w.u32(f.values().len() as u32);
        for v in f.values() {
            w.f64(v.re);
            w.f64(v.im);
        }
    }
    w.buf
}

/// Decodes a sequence. Consecutive frames with identical masks share one
/// allocation.
pub fn decode_kspace(buf: &[u8]) -> Result<Vec<KSpaceFrame>> {
    let mut r = Reader::new(buf);
    r.magic(KSPACE_MAGIC)?;
    let count = r.len(MAX_FRAMES, "frame count")?;
    let mut frames: Vec<KSpaceFrame> = Vec::new();
    for _ in 0..count {
        let side = r.len(MAX_SIDE, "side")?;
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::format(format!("k-space side {side} unsupported")));
        }
        let num_rays = r.u32()? as usize;
        let index = usize::try_from(r.u64()?).map_err(|_| Error::format("frame index too large"))?;
        let noise_bound = r.f64()?;
        if !(noise_bound >= 0.0 && noise_bound.is_finite()) {
            return Err(Error::format(format!("noise bound {noise_bound} invalid")));
        }
        let bits = r.bits(side * side)?;
        let mask = match frames.last() {
            Some(prev) if prev.mask().bits() == bits.as_slice() && prev.mask().num_rays() == num_rays => {
                Arc::clone(prev.mask())
            }
            _ => Arc::new(
                SamplingMask::from_bits(side, bits, num_rays)
                    .map_err(|e| Error::format(e.to_string()))?,
            ),
        };
        let m = r.len(side * side, "measurement count")?;
        if m != mask.count() {
            return Err(Error::format(format!(
                "{m} measurements for a mask with {} samples",
                mask.count()
            )));
        }
        let raw = r.finite_f64s(2 * m, "measurements")?;
        let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        frames.push(KSpaceFrame::new(mask, values, index, noise_bound)?);
    }
    r.finish()?;
    Ok(frames)
}

pub fn write_kspace(frames: &[KSpaceFrame], path: &Path) -> Result<()> {
    std::fs::write(path, encode_kspace(frames)).map_err(|e| Error::io(path, e))
}

pub fn read_kspace(path: &Path) -> Result<Vec<KSpaceFrame>> {
    decode_kspace(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
