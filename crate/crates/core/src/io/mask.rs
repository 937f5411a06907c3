//! Masks as 8-bit PGM (0 or 255 per cell) or as a packed bitmap, each with a
//! JSON sidecar `{side, num_rays, rate}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bytes::{pack_bits, unpack_bits};
use super::MAX_SIDE;
use crate::sampling::SamplingMask;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSidecar {
    pub side: usize,
    pub num_rays: usize,
    pub rate: f64,
}

impl MaskSidecar {
    pub fn of(mask: &SamplingMask) -> Self {
        MaskSidecar {
            side: mask.side(),
            num_rays: mask.num_rays(),
            rate: mask.rate(),
        }
    }

    /// Checks the sidecar against decoded bits.
    pub fn check(&self, mask: &SamplingMask) -> Result<()> {
        if self.side != mask.side() {
            return Err(Error::format(format!(
                "sidecar side {} but mask side {}",
                self.side,
                mask.side()
            )));
        }
        if (self.rate - mask.rate()).abs() > 1e-9 {
            return Err(Error::format(format!(
                "sidecar rate {} but mask rate {}",
                self.rate,
                mask.rate()
            )));
        }
        Ok(())
    }
}

fn check_side(side: usize) -> Result<()> {
    if side == 0 || side > MAX_SIDE || !side.is_power_of_two() {
        return Err(Error::format(format!("mask side {side} unsupported")));
    }
    Ok(())
}

pub fn encode_pgm(mask: &SamplingMask) -> Vec<u8> {
    let side = mask.side();
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn pgm_token<'a>(buf: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < buf.len() && buf[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < buf.len() && buf[*pos] == b'#' {
            while *pos < buf.len() && buf[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < buf.len() && !buf[*pos].is_ascii_whitespace() && buf[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("truncated PGM header"));
    }
    Ok(&buf[start..*pos])
}

fn pgm_number(buf: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = pgm_token(buf, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .filter(|s| s.len() <= 9 && s.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(format!("bad PGM {what}")))
}

/// Decodes a binary PGM whose pixels are all 0 or 255.
pub fn decode_pgm(buf: &[u8]) -> Result<SamplingMask> {
    let mut pos = 0;
    if pgm_token(buf, &mut pos)? != b"P5" {
        return Err(Error::format("not a binary PGM (P5)"));
    }
    let width = pgm_number(buf, &mut pos, "width")?;
    let height = pgm_number(buf, &mut pos, "height")?;
    let maxval = pgm_number(buf, &mut pos, "maxval")?;
    if width != height {
        return Err(Error::format(format!("mask is {width}x{height}, not square")));
    }
    check_side(width)?;
    if maxval != 255 {
        return Err(Error::format(format!("PGM maxval {maxval}, expected 255")));
    }
    if pos >= buf.len() || !buf[pos].is_ascii_whitespace() {
        return Err(Error::format("missing separator after PGM header"));
    }
    let pixels = &buf[pos + 1..];
    if pixels.len() != width * width {
        return Err(Error::format(format!(
            "{} PGM pixel bytes, expected {}",
            pixels.len(),
            width * width
        )));
    }
    let bits = pixels
        .iter()
        .map(|&p| match p {
            0 => Ok(false),
            255 => Ok(true),
            v => Err(Error::format(format!("mask pixel value {v} is neither 0 nor 255"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    SamplingMask::from_bits(width, bits, 0).map_err(|e| Error::format(e.to_string()))
}

pub fn encode_bitmap(mask: &SamplingMask) -> Vec<u8> {
    pack_bits(mask.bits())
}

/// Decodes a packed bitmap; dimensions and ray count come from the sidecar.
pub fn decode_bitmap(buf: &[u8], sidecar: &MaskSidecar) -> Result<SamplingMask> {
    check_side(sidecar.side)?;
    let bits = unpack_bits(buf, sidecar.side * sidecar.side)?;
    let mask = SamplingMask::from_bits(sidecar.side, bits, sidecar.num_rays)
        .map_err(|e| Error::format(e.to_string()))?;
    sidecar.check(&mask)?;
    Ok(mask)
}

pub fn decode_sidecar(json: &str) -> Result<MaskSidecar> {
    let s: MaskSidecar = serde_json::from_str(json)?;
    check_side(s.side)?;
    Ok(s)
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes the mask as `.pgm` or packed `.bin` depending on the extension,
/// plus the `.json` sidecar.
pub fn write_mask(mask: &SamplingMask, path: &Path) -> Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => encode_pgm(mask),
        _ => encode_bitmap(mask),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&MaskSidecar::of(mask))?;
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

/// Reads a mask written by [`write_mask`]. A PGM may come without sidecar.
pub fn read_mask(path: &Path) -> Result<SamplingMask> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let side_path = sidecar_path(path);
    let sidecar = match std::fs::read_to_string(&side_path) {
        Ok(text) => Some(decode_sidecar(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&side_path, e)),
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => {
            let mask = decode_pgm(&bytes)?;
            match sidecar {
                Some(s) => {
                    s.check(&mask)?;
                    SamplingMask::from_bits(mask.side(), mask.bits().to_vec(), s.num_rays)
                }
                None => Ok(mask),
            }
        }
        _ => {
            let s = sidecar.ok_or_else(|| {
                Error::format(format!("bitmap mask needs sidecar {}", side_path.display()))
            })?;
            decode_bitmap(&bytes, &s)
        }
    }
}
