//! Patch grouping sidecar: `DNBGGRP1`, image side, group count, centroid
//! length, guide frame, one `u32` label per patch, then the centroids.

use std::path::Path;

use super::bytes::{Reader, Writer};
use super::MAX_SIDE;
use crate::grouping::PatchGrouping;
use crate::{Error, Result};

pub const GROUPING_MAGIC: &[u8; 8] = b"DNBGGRP1";

/// Longest accepted centroid (a 32×32 complex patch).
const MAX_COLUMN: usize = 2048;

pub fn encode_grouping(g: &PatchGrouping) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(GROUPING_MAGIC);
    w.u32(g.image_side() as u32);
    w.u32(g.num_groups() as u32);
    let column_len = g.centroids().first().map_or(0, Vec::len);
    w.u32(column_len as u32);
    w.u64(g.guide_frame() as u64);
    w.u32s(g.assignment());
    for c in g.centroids() {
        w.f64s(c);
    }
    w.buf
}

pub fn decode_grouping(buf: &[u8]) -> Result<PatchGrouping> {
    let mut r = Reader::new(buf);
    r.magic(GROUPING_MAGIC)?;
    let side = r.len(MAX_SIDE, "side")?;
    let n = side * side;
    let groups = r.len(n.max(1), "group count")?;
    let column_len = r.len(MAX_COLUMN, "centroid length")?;
    let guide = usize::try_from(r.u64()?).map_err(|_| Error::format("guide frame too large"))?;
    let assignment = r.u32s(n)?;
    let mut centroids = Vec::with_capacity(groups);
    for _ in 0..groups {
        centroids.push(r.finite_f64s(column_len, "centroid")?);
    }
    r.finish()?;
    PatchGrouping::from_parts(side, groups, assignment, centroids, guide)
        .map_err(|e| Error::format(e.to_string()))
}

pub fn write_grouping(g: &PatchGrouping, path: &Path) -> Result<()> {
    std::fs::write(path, encode_grouping(g)).map_err(|e| Error::io(path, e))
}

pub fn read_grouping(path: &Path) -> Result<PatchGrouping> {
    decode_grouping(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
