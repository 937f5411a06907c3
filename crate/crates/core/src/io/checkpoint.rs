//! Sampler checkpoints: a binary dump of a [`GibbsState`] (`DNBGCKPT`) plus a
//! JSON manifest summarizing it.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bytes::{Reader, Writer};
use super::MAX_SIDE;
use crate::dictlearn::state::{LocalNeighbors, LocalRows};
use crate::dictlearn::{Dictionary, GibbsState, GroupState, HyperParams, HyperState, SparseCode};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DNBGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Upper bounds on decoded sizes.
const MAX_ATOMS: usize = 4096;
const MAX_ATOM_LEN: usize = 2048;
const MAX_CELLS: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub groups: usize,
    pub num_atoms: usize,
    pub atom_len: usize,
    pub image_side: usize,
    pub patch_side: usize,
    pub sweep_count: u64,
    pub seed: u64,
    /// Last frame folded into the state, if known.
    pub frame: Option<usize>,
}

impl CheckpointManifest {
    pub fn of(state: &GibbsState, frame: Option<usize>) -> Self {
        CheckpointManifest {
            format: String::from_utf8_lossy(CHECKPOINT_MAGIC).into_owned(),
            version: CHECKPOINT_VERSION,
            groups: state.num_groups(),
            num_atoms: state.num_atoms(),
            atom_len: state.atom_len(),
            image_side: state.image_side(),
            patch_side: state.patch_side(),
            sweep_count: state.sweeps(),
            seed: state.seed(),
            frame,
        }
    }

    /// Checks the manifest against a decoded state.
    pub fn check(&self, state: &GibbsState) -> Result<()> {
        let mut expect = CheckpointManifest::of(state, self.frame);
        expect.format.clone_from(&self.format);
        if &expect != self || self.format.as_bytes() != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint manifest does not match the state"));
        }
        Ok(())
    }
}

fn write_params(w: &mut Writer, p: &HyperParams) {
    for v in [p.c0, p.c1, p.eta0, p.e0, p.f0, p.g0, p.h0] {
        w.f64(v);
    }
}

fn read_params(r: &mut Reader<'_>) -> Result<HyperParams> {
    let v = r.f64s(7)?;
    let p = HyperParams {
        c0: v[0],
        c1: v[1],
        eta0: v[2],
        e0: v[3],
        f0: v[4],
        g0: v[5],
        h0: v[6],
    };
    p.validate().map_err(|e| Error::format(e.to_string()))?;
    Ok(p)
}

fn write_rows<T: Copy>(w: &mut Writer, rows: &LocalRows<T>, n: usize, mut put: impl FnMut(&mut Writer, T)) {
    for i in 0..n {
        w.u32(rows.row(i).len() as u32);
    }
    for &e in &rows.entries {
        put(w, e);
    }
}

fn read_row_lengths(r: &mut Reader<'_>, n: usize) -> Result<Vec<usize>> {
    let lens = r.u32s(n)?;
    let mut total = 0usize;
    for &l in &lens {
        if l as usize > n {
            return Err(Error::format("row longer than the group"));
        }
        total += l as usize;
    }
    if total > MAX_CELLS {
        return Err(Error::format("too many row entries"));
    }
    Ok(lens.into_iter().map(|l| l as usize).collect())
}

fn encode_group(w: &mut Writer, g: &GroupState) {
    let (n, k, p) = (g.num_patches(), g.num_atoms(), g.dictionary.atom_len());
    write_params(w, &g.params);
    w.u32(p as u32);
    w.u32(k as u32);
    w.u32(n as u32);
    w.f64s(g.dictionary.as_slice());
    w.bits(&g.codes.z);
    w.f64s(&g.codes.s);
    w.f64s(&g.hyper.pi_star);
    w.f64s(&g.hyper.pi);
    w.f64s(&g.hyper.eta);
    w.f64s(&g.hyper.gamma_s);
    w.f64(g.hyper.gamma_eps);
    match &g.neighbors {
        LocalNeighbors::Global => w.u8(0),
        LocalNeighbors::Spatial(rows) => {
            w.u8(1);
            write_rows(w, rows, n, |w, j| w.u32(j));
        }
    }
    write_rows(w, &g.dependence, n, |w, (j, a)| {
        w.u32(j);
        w.f64(a);
    });
    w.u32s(&g.idle);
    w.u64(g.eta_failures);
    w.bytes(&g.rng.get_seed());
    w.u64(g.rng.get_stream());
    w.u128(g.rng.get_word_pos());
}

fn decode_group(r: &mut Reader<'_>, members: usize) -> Result<GroupState> {
    let params = read_params(r)?;
    let p = r.len(MAX_ATOM_LEN, "atom length")?;
    let k = r.len(MAX_ATOMS, "atom count")?;
    let n = r.len(MAX_CELLS, "patch count")?;
    if n != members {
        return Err(Error::format(format!(
            "group holds {n} patches, assignment gives {members}"
        )));
    }
    if p == 0 || k == 0 || n.saturating_mul(k) > MAX_CELLS {
        return Err(Error::format("group dimensions out of range"));
    }
    let atoms = r.finite_f64s(p * k, "dictionary")?;
    let dictionary = Dictionary::from_columns(p, atoms).map_err(|e| Error::format(e.to_string()))?;
    let z = r.bits(n * k)?;
    let s = r.finite_f64s(n * k, "weights")?;
    let codes = SparseCode {
        num_atoms: k,
        num_patches: n,
        z,
        s,
    };
    let hyper = HyperState {
        pi_star: r.f64s(n * k)?,
        pi: r.f64s(n * k)?,
        eta: r.f64s(k)?,
        gamma_s: r.f64s(k)?,
        gamma_eps: r.f64()?,
    };
    let neighbors = match r.u8()? {
        0 => None,
        1 => {
            let lens = read_row_lengths(r, n)?;
            let mut rows = Vec::with_capacity(n);
            for l in lens {
                rows.push(r.u32s(l)?);
            }
            Some(rows)
        }
        t => return Err(Error::format(format!("unknown neighbor system tag {t}"))),
    };
    let lens = read_row_lengths(r, n)?;
    let mut dependence = Vec::with_capacity(n);
    for l in lens {
        let mut row = Vec::with_capacity(l);
        for _ in 0..l {
            row.push((r.u32()?, r.f64()?));
        }
        dependence.push(row);
    }
    let idle = r.u32s(k)?;
    let eta_failures = r.u64()?;
    let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes taken");
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(r.u64()?);
    rng.set_word_pos(r.u128()?);
    let mut g = GroupState::new(dictionary, codes, hyper, params, neighbors, dependence, rng)
        .map_err(|e| Error::format(e.to_string()))?;
    g.idle = idle;
    g.eta_failures = eta_failures;
    Ok(g)
}

pub fn encode_checkpoint(state: &GibbsState) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.u32(state.image_side() as u32);
    w.u32(state.patch_side() as u32);
    w.u64(state.sweeps());
    w.u64(state.seed());
    w.u32(state.num_groups() as u32);
    w.u32s(state.assignment());
    for g in state.groups() {
        encode_group(&mut w, g);
    }
    w.buf
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<GibbsState> {
    let mut r = Reader::new(buf);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let side = r.len(MAX_SIDE, "image side")?;
    let patch_side = r.len(side, "patch side")?;
    let sweeps = r.u64()?;
    let seed = r.u64()?;
    let n = side * side;
    let groups = r.len(n, "group count")?;
    if groups == 0 || patch_side == 0 {
        return Err(Error::format("empty checkpoint"));
    }
    let assignment = r.u32s(n)?;
    let mut sizes = vec![0usize; groups];
    for &g in &assignment {
        *sizes
            .get_mut(g as usize)
            .ok_or_else(|| Error::format(format!("group id {g} out of range")))? += 1;
    }
    let mut states = Vec::with_capacity(groups);
    for &size in &sizes {
        states.push(decode_group(&mut r, size)?);
    }
    r.finish()?;
    let k = states[0].num_atoms();
    if states.iter().any(|g| g.num_atoms() != k) {
        return Err(Error::format("groups disagree on dictionary size"));
    }
    GibbsState::from_parts(states, assignment, side, patch_side, sweeps, seed)
        .map_err(|e| Error::format(e.to_string()))
}

fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the binary state to `path` and the manifest next to it.
pub fn write_checkpoint(state: &GibbsState, frame: Option<usize>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(state)).map_err(|e| Error::io(path, e))?;
    let m = manifest_path(path);
    let json = serde_json::to_string_pretty(&CheckpointManifest::of(state, frame))?;
    std::fs::write(&m, json).map_err(|e| Error::io(&m, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(GibbsState, CheckpointManifest)> {
    let state = decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)?;
    let m = manifest_path(path);
    let text = std::fs::read_to_string(&m).map_err(|e| Error::io(&m, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    manifest.check(&state)?;
    Ok((state, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictlearn::{gibbs_sweep, NeighborSystem};
    use crate::grouping::{DependenceMatrix, Neighborhoods, PatchGrouping};
    use crate::linops::extract_patches;
    use crate::{Complex64, ComplexImage};

    fn state() -> (GibbsState, crate::linops::PatchMatrix) {
        let side = 8;
        let assignment = (0..64u32).map(|i| (i / 8) % 2).collect();
        let grouping =
            PatchGrouping::from_parts(side, 2, assignment, vec![vec![0.0; 8]; 2], 0).unwrap();
        let nb = Neighborhoods::build(&grouping, 2.0).unwrap();
        let a = DependenceMatrix::identity(64);
        let img = ComplexImage::from_fn(side, |r, c| Complex64::new((r + 2 * c) as f64 / 21.0, 0.1));
        let patches = extract_patches(&img, 4).unwrap();
        let params = HyperParams { eta0: 0.3, ..HyperParams::default() };
        let mut s =
            GibbsState::init(&grouping, 2, true, &a, NeighborSystem::Spatial(&nb), 5, params, 9)
                .unwrap();
        gibbs_sweep(&mut s, &patches).unwrap();
        (s, patches)
    }

    #[test]
    fn resumed_chain_is_identical() {
        let (mut s, patches) = state();
        let mut resumed = decode_checkpoint(&encode_checkpoint(&s)).unwrap();
        assert_eq!(resumed.groups(), s.groups());
        for _ in 0..3 {
            gibbs_sweep(&mut s, &patches).unwrap();
            gibbs_sweep(&mut resumed, &patches).unwrap();
        }
        assert_eq!(encode_checkpoint(&resumed), encode_checkpoint(&s));
    }

    #[test]
    fn file_round_trip_with_manifest() {
        let (s, _) = state();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("state.ckpt");
        write_checkpoint(&s, Some(3), &p).unwrap();
        let (back, m) = read_checkpoint(&p).unwrap();
        assert_eq!(m.frame, Some(3));
        assert_eq!(m.groups, 2);
        assert_eq!(m.atom_len, 8);
        assert_eq!(back.groups(), s.groups());
    }

    #[test]
    fn truncation_never_panics() {
        let (s, _) = state();
        let buf = encode_checkpoint(&s);
        for cut in (0..buf.len()).step_by(97) {
            assert!(decode_checkpoint(&buf[..cut]).is_err());
        }
        let mut flipped = buf.clone();
        let last = flipped.len() - 30;
        flipped[last] ^= 0xff;
        let _ = decode_checkpoint(&flipped);
    }
}
