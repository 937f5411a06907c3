//! Little-endian encoding helpers with bounds-checked reads.

use byteorder::{ByteOrder, LittleEndian};

use crate::{Error, Result};

#[derive(Default)]
pub(crate) struct Writer {
    pub(crate) buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub(crate) fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64s(&mut self, v: &[f64]) {
        let start = self.buf.len();
        self.buf.resize(start + 8 * v.len(), 0);
        LittleEndian::write_f64_into(v, &mut self.buf[start..]);
    }

    pub(crate) fn u32s(&mut self, v: &[u32]) {
        let start = self.buf.len();
        self.buf.resize(start + 4 * v.len(), 0);
        LittleEndian::write_u32_into(v, &mut self.buf[start..]);
    }

    /// Row-major bits, most significant bit first, zero padded.
    pub(crate) fn bits(&mut self, v: &[bool]) {
        self.buf.extend(pack_bits(v));
    }
}

pub(crate) fn pack_bits(v: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; v.len().div_ceil(8)];
    for (i, &b) in v.iter().enumerate() {
        if b {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

/// Inverse of [`pack_bits`]; padding bits must be zero.
pub(crate) fn unpack_bits(bytes: &[u8], len: usize) -> Result<Vec<bool>> {
    if bytes.len() != len.div_ceil(8) {
        return Err(Error::format(format!(
            "{} bitmap bytes for {len} bits",
            bytes.len()
        )));
    }
    let bits: Vec<bool> = (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect();
    if len % 8 != 0 && bytes[len / 8] & (0xFF >> (len % 8)) != 0 {
        return Err(Error::format("nonzero padding bits in bitmap"));
    }
    Ok(bits)
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::format(format!(
                    "truncated input: need {n} bytes at offset {}, have {}",
                    self.pos,
                    self.buf.len() - self.pos
                ))
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, want: &[u8]) -> Result<()> {
        let got = self.take(want.len())?;
        if got != want {
            return Err(Error::format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(want)
            )));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4)?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8)?))
    }

    pub(crate) fn u128(&mut self) -> Result<u128> {
        Ok(LittleEndian::read_u128(self.take(16)?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(LittleEndian::read_f64(self.take(8)?))
    }

    /// A `u32` length bounded by `max`.
    pub(crate) fn len(&mut self, max: usize, what: &str) -> Result<usize> {
        let v = self.u32()? as usize;
        if v > max {
            return Err(Error::format(format!("{what} = {v} exceeds limit {max}")));
        }
        Ok(v)
    }

    /// `n` doubles; the byte count is checked before allocating.
    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::format("length overflow"))?)?;
        let mut out = vec![0.0; n];
        LittleEndian::read_f64_into(bytes, &mut out);
        Ok(out)
    }

    pub(crate) fn finite_f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let v = self.f64s(n)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::format(format!("non-finite value in {what}")));
        }
        Ok(v)
    }

    pub(crate) fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::format("length overflow"))?)?;
        let mut out = vec![0; n];
        LittleEndian::read_u32_into(bytes, &mut out);
        Ok(out)
    }

    pub(crate) fn bits(&mut self, n: usize) -> Result<Vec<bool>> {
        let bytes = self.take(n.div_ceil(8))?;
        unpack_bits(bytes, n)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bits_round_trip(v in proptest::collection::vec(any::<bool>(), 0..100)) {
            prop_assert_eq!(unpack_bits(&pack_bits(&v), v.len()).unwrap(), v);
        }
    }

    #[test]
    fn padding_must_be_zero() {
        assert!(unpack_bits(&[0b1000_0001], 3).is_err());
        assert_eq!(unpack_bits(&[0b1010_0000], 3).unwrap(), vec![true, false, true]);
    }

    #[test]
    fn reader_bounds() {
        let mut r = Reader::new(&[1, 0, 0, 0, 9]);
        assert_eq!(r.u32().unwrap(), 1);
        assert!(r.u32().is_err());
        assert!(r.finish().is_err());
        let mut r = Reader::new(&[0xff, 0xff, 0xff, 0xff]);
        assert!(r.len(10, "n").is_err());
        let mut r = Reader::new(&[]);
        assert!(r.f64s(usize::MAX / 4).is_err());
    }
}
