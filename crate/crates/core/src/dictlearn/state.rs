use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::draw;
use crate::grouping::{DependenceMatrix, Neighborhoods, PatchGrouping};
use crate::{Error, Result};

/// Constants of the beta-process and gamma hyperpriors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub c0: f64,
    pub c1: f64,
    pub eta0: f64,
    pub e0: f64,
    pub f0: f64,
    pub g0: f64,
    pub h0: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            c0: 1.0,
            c1: 1.0,
            eta0: 1.0,
            e0: 1.0,
            f0: 1.0,
            g0: 1.0,
            h0: 1.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c0", self.c0),
            ("c1", self.c1),
            ("e0", self.e0),
            ("f0", self.f0),
            ("g0", self.g0),
            ("h0", self.h0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} = {v} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta0) {
            return Err(Error::param(format!("eta0 = {} must lie in [0, 1]", self.eta0)));
        }
        Ok(())
    }
}

/// Real atoms stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub(crate) atom_len: usize,
    pub(crate) num_atoms: usize,
    pub(crate) atoms: Vec<f64>,
}

impl Dictionary {
    pub fn zeros(atom_len: usize, num_atoms: usize) -> Self {
        Dictionary {
            atom_len,
            num_atoms,
            atoms: vec![0.0; atom_len * num_atoms],
        }
    }

    pub fn from_columns(atom_len: usize, atoms: Vec<f64>) -> Result<Self> {
        if atom_len == 0 || atoms.is_empty() || atoms.len() % atom_len != 0 {
            return Err(Error::dim("atom storage is not a whole number of columns"));
        }
        Ok(Dictionary {
            atom_len,
            num_atoms: atoms.len() / atom_len,
            atoms,
        })
    }

    /// I.i.d. `N(0, 1/atom_len)` entries.
    pub fn from_prior(atom_len: usize, num_atoms: usize, rng: &mut impl Rng) -> Self {
        let sd = (atom_len as f64).recip().sqrt();
        let atoms = (0..atom_len * num_atoms)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dictionary {
            atom_len,
            num_atoms,
            atoms,
        }
    }

    pub fn atom_len(&self) -> usize {
        self.atom_len
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    #[inline]
    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k * self.atom_len..(k + 1) * self.atom_len]
    }

    pub fn atom_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.atoms[k * self.atom_len..(k + 1) * self.atom_len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.atoms
    }

    /// `D α` for a code given as `(atom, weight)` pairs.
    pub fn synthesize(&self, code: impl IntoIterator<Item = (usize, f64)>, out: &mut [f64]) {
        out.fill(0.0);
        for (k, a) in code {
            for (o, d) in out.iter_mut().zip(self.atom(k)) {
                *o += a * d;
            }
        }
    }
}

/// Binary usage `z` and Gaussian weights `s`, stored patch by patch.
/// The sparse code is `α = s ⊙ z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub(crate) num_atoms: usize,
    pub(crate) num_patches: usize,
    pub(crate) z: Vec<bool>,
    pub(crate) s: Vec<f64>,
}

impl SparseCode {
    pub fn zeros(num_atoms: usize, num_patches: usize) -> Self {
        SparseCode {
            num_atoms,
            num_patches,
            z: vec![false; num_atoms * num_patches],
            s: vec![0.0; num_atoms * num_patches],
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn num_patches(&self) -> usize {
        self.num_patches
    }

    #[inline]
    pub fn z(&self, i: usize, k: usize) -> bool {
        self.z[i * self.num_atoms + k]
    }

    #[inline]
    pub fn s(&self, i: usize, k: usize) -> f64 {
        self.s[i * self.num_atoms + k]
    }

    #[inline]
    pub fn alpha(&self, i: usize, k: usize) -> f64 {
        if self.z(i, k) {
            self.s(i, k)
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, k: usize, z: bool, s: f64) {
        self.z[i * self.num_atoms + k] = z;
        self.s[i * self.num_atoms + k] = s;
    }

    /// Nonzero entries of `α_i` as `(atom, weight)` pairs.
    pub fn active(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let base = i * self.num_atoms;
        (0..self.num_atoms).filter_map(move |k| self.z[base + k].then(|| (k, self.s[base + k])))
    }

    /// Dense `α_i`.
    pub fn alpha_column(&self, i: usize) -> Vec<f64> {
        (0..self.num_atoms).map(|k| self.alpha(i, k)).collect()
    }

    /// Number of patches using each atom.
    pub fn usage(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_atoms];
        for row in self.z.chunks_exact(self.num_atoms) {
            for (c, &z) in counts.iter_mut().zip(row) {
                *c += z as usize;
            }
        }
        counts
    }

    pub fn active_atoms(&self) -> usize {
        self.usage().iter().filter(|&&c| c > 0).count()
    }
}

/// Usage probabilities, their beta-process parents and the precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperState {
    /// `π*`, patch-major `N × K`.
    pub pi_star: Vec<f64>,
    /// `π = A π*`, patch-major `N × K`.
    pub pi: Vec<f64>,
    pub eta: Vec<f64>,
    pub gamma_s: Vec<f64>,
    pub gamma_eps: f64,
}

impl HyperState {
    pub fn validate(&self, num_patches: usize, num_atoms: usize) -> Result<()> {
        let nk = num_patches * num_atoms;
        if self.pi_star.len() != nk || self.pi.len() != nk {
            return Err(Error::dim("usage probability arrays do not match N × K"));
        }
        if self.eta.len() != num_atoms || self.gamma_s.len() != num_atoms {
            return Err(Error::dim("per-atom arrays do not match K"));
        }
        let prob = |p: &f64| (0.0..=1.0).contains(p);
        if !self.pi_star.iter().all(prob) || !self.pi.iter().all(prob) || !self.eta.iter().all(prob)
        {
            return Err(Error::param("probability outside [0, 1]"));
        }
        let pos = |g: &f64| *g > 0.0 && g.is_finite();
        if !self.gamma_s.iter().all(pos) || !pos(&self.gamma_eps) {
            return Err(Error::param("precision must be positive and finite"));
        }
        Ok(())
    }
}

/// Where the usage counts of the π* update come from.
#[derive(Debug, Clone, Copy)]
pub enum NeighborSystem<'a> {
    /// Same-group patches within a spatial radius.
    Spatial(&'a Neighborhoods),
    /// Every patch of the group.
    Global,
}

/// Sparse rows in group-local indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct LocalRows<T> {
    pub(crate) offsets: Vec<usize>,
    pub(crate) entries: Vec<T>,
}

impl<T> LocalRows<T> {
    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[T] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub(crate) fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for row in rows {
            entries.extend(row);
            offsets.push(entries.len());
        }
        LocalRows { offsets, entries }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LocalNeighbors {
    Spatial(LocalRows<u32>),
    Global,
}

/// Sampler state of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    pub dictionary: Dictionary,
    pub codes: SparseCode,
    pub hyper: HyperState,
    pub params: HyperParams,
    pub(crate) neighbors: LocalNeighbors,
    pub(crate) dependence: LocalRows<(u32, f64)>,
    /// Consecutive sweeps without a single patch using the atom.
    pub(crate) idle: Vec<u32>,
    pub(crate) eta_failures: u64,
    pub(crate) rng: ChaCha8Rng,
}

impl GroupState {
    /// Assembles a group state from explicit parts. `neighbors` are the
    /// usage-count sets (`None` for the whole group) and `dependence` the
    /// rows of `A`, both in group-local indices.
    pub fn new(
        dictionary: Dictionary,
        codes: SparseCode,
        hyper: HyperState,
        params: HyperParams,
        neighbors: Option<Vec<Vec<u32>>>,
        dependence: Vec<Vec<(u32, f64)>>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        params.validate()?;
        let (n, k) = (codes.num_patches, codes.num_atoms);
        if dictionary.num_atoms != k {
            return Err(Error::dim("dictionary and codes disagree on atom count"));
        }
        hyper.validate(n, k)?;
        if dependence.len() != n {
            return Err(Error::dim("dependence rows do not match patch count"));
        }
        let in_range = |j: u32| (j as usize) < n;
        if dependence.iter().flatten().any(|&(j, w)| !in_range(j) || !(w >= 0.0)) {
            return Err(Error::param("dependence entry out of range or negative"));
        }
        let neighbors = match neighbors {
            None => LocalNeighbors::Global,
            Some(rows) => {
                if rows.len() != n || rows.iter().flatten().any(|&j| !in_range(j)) {
                    return Err(Error::dim("neighbor rows do not match patch count"));
                }
                LocalNeighbors::Spatial(LocalRows::from_rows(rows))
            }
        };
        Ok(GroupState {
            dictionary,
            codes,
            hyper,
            params,
            neighbors,
            dependence: LocalRows::from_rows(dependence),
            idle: vec![0; k],
            eta_failures: 0,
            rng,
        })
    }

    pub fn num_patches(&self) -> usize {
        self.codes.num_patches
    }

    pub fn num_atoms(&self) -> usize {
        self.codes.num_atoms
    }

    /// Atoms used by at least one patch.
    pub fn active_atoms(&self) -> usize {
        self.codes.active_atoms()
    }

    /// Atoms idle for at least `sweeps` consecutive sweeps.
    pub fn idle_atoms(&self, sweeps: u32) -> usize {
        self.idle.iter().filter(|&&c| c >= sweeps).count()
    }

    /// Slice-sampler draws that found an empty interval and kept η.
    pub fn eta_failures(&self) -> u64 {
        self.eta_failures
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Recomputes `π_i = Σ_l a_il π*_l`.
    pub(crate) fn refresh_pi(&mut self) {
        let k = self.num_atoms();
        let pi_star = &self.hyper.pi_star;
        for (i, out) in self.hyper.pi.chunks_exact_mut(k).enumerate() {
            out.fill(0.0);
            for &(l, a) in self.dependence.row(i) {
                let src = &pi_star[l as usize * k..(l as usize + 1) * k];
                for (o, p) in out.iter_mut().zip(src) {
                    *o += a * p;
                }
            }
            for o in out.iter_mut() {
                *o = o.clamp(0.0, 1.0);
            }
        }
    }

    pub(crate) fn update_idle(&mut self) {
        for (idle, used) in self.idle.iter_mut().zip(self.codes.usage()) {
            *idle = if used > 0 { 0 } else { idle.saturating_add(1) };
        }
    }

    /// Draws every variable from the prior.
    pub(crate) fn from_prior(
        atom_len: usize,
        num_atoms: usize,
        num_patches: usize,
        params: HyperParams,
        neighbors: LocalNeighbors,
        dependence: LocalRows<(u32, f64)>,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let dictionary = Dictionary::from_prior(atom_len, num_atoms, &mut rng);
        let eta: Vec<f64> = (0..num_atoms)
            .map(|_| initial_eta(&params, &mut rng))
            .collect();
        let mut pi_star = vec![0.0; num_patches * num_atoms];
        for row in pi_star.chunks_exact_mut(num_atoms) {
            for (p, &e) in row.iter_mut().zip(&eta) {
                *p = draw::beta(&mut rng, params.c1 * e, params.c1 * (1.0 - e));
            }
        }
        let gamma_eps = draw::gamma(&mut rng, params.g0, params.h0);
        let gamma_s: Vec<f64> = (0..num_atoms)
            .map(|_| draw::gamma(&mut rng, params.e0, params.f0))
            .collect();
        let hyper = HyperState {
            pi: vec![0.0; pi_star.len()],
            pi_star,
            eta,
            gamma_s,
            gamma_eps,
        };
        let mut state = GroupState {
            dictionary,
            codes: SparseCode::zeros(num_atoms, num_patches),
            hyper,
            params,
            neighbors,
            dependence,
            idle: vec![0; num_atoms],
            eta_failures: 0,
            rng,
        };
        state.refresh_pi();
        for i in 0..num_patches {
            for k in 0..num_atoms {
                let z = state.rng.random::<f64>() < state.hyper.pi[i * num_atoms + k];
                let sd = state.hyper.gamma_s[k].recip().sqrt();
                let s = sd * state.rng.sample::<f64, _>(StandardNormal);
                state.codes.set(i, k, z, s);
            }
        }
        state
    }
}

/// Offset used when the η prior is degenerate at an endpoint.
pub const ETA_EDGE: f64 = 1e-6;

fn initial_eta(params: &HyperParams, rng: &mut impl Rng) -> f64 {
    let a = params.c0 * params.eta0;
    let b = params.c0 * (1.0 - params.eta0);
    if b <= 0.0 {
        1.0 - ETA_EDGE
    } else if a <= 0.0 {
        ETA_EDGE
    } else {
        draw::beta(rng, a, b).clamp(ETA_EDGE, 1.0 - ETA_EDGE)
    }
}

/// Sampler state of every group plus the patch bookkeeping that maps
/// group-local indices back to image patches.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub(crate) groups: Vec<GroupState>,
    pub(crate) members: Vec<Vec<usize>>,
    /// Group-local index of every image patch.
    pub(crate) local_index: Vec<u32>,
    pub(crate) assignment: Vec<u32>,
    pub(crate) image_side: usize,
    pub(crate) patch_side: usize,
    pub(crate) atom_len: usize,
    pub(crate) sweeps: u64,
    pub(crate) seed: u64,
}

impl GibbsState {
    /// Prior draw of every group's dictionary, codes and hyperparameters.
    /// `patch_side² × 2` is the atom length when `stacked` (complex data),
    /// `patch_side²` otherwise.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        grouping: &PatchGrouping,
        patch_side: usize,
        stacked: bool,
        dependence: &DependenceMatrix,
        neighbors: NeighborSystem<'_>,
        num_atoms: usize,
        params: HyperParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if num_atoms == 0 {
            return Err(Error::param("initial dictionary size must be at least 1"));
        }
        if patch_side == 0 || patch_side > grouping.image_side() {
            return Err(Error::param(format!(
                "patch side {patch_side} invalid for image side {}",
                grouping.image_side()
            )));
        }
        let area = patch_side * patch_side;
        let atom_len = if stacked { 2 * area } else { area };
        let members = grouping.members();
        let mut local_index = vec![0u32; grouping.num_patches()];
        for group in &members {
            for (li, &gi) in group.iter().enumerate() {
                local_index[gi] = li as u32;
            }
        }
        let mut state = GibbsState {
            groups: Vec::with_capacity(members.len()),
            members,
            local_index,
            assignment: grouping.assignment().to_vec(),
            image_side: grouping.image_side(),
            patch_side,
            atom_len,
            sweeps: 0,
            seed,
        };
        let local_neighbors = state.localize_neighbors(neighbors)?;
        let local_dep = state.localize_dependence(dependence)?;
        for (j, (nb, dep)) in local_neighbors.into_iter().zip(local_dep).enumerate() {
            let rng = crate::rng::stream(seed, &[crate::rng::TAG_INIT, j as u64]);
            state.groups.push(GroupState::from_prior(
                atom_len,
                num_atoms,
                state.members[j].len(),
                params,
                nb,
                dep,
                rng,
            ));
        }
        for (j, g) in state.groups.iter_mut().enumerate() {
            g.rng = crate::rng::stream(seed, &[crate::rng::TAG_GROUP, j as u64]);
        }
        Ok(state)
    }

    pub(crate) fn from_parts(
        groups: Vec<GroupState>,
        assignment: Vec<u32>,
        image_side: usize,
        patch_side: usize,
        sweeps: u64,
        seed: u64,
    ) -> Result<Self> {
        let n = image_side * image_side;
        if assignment.len() != n {
            return Err(Error::dim("assignment does not cover the image"));
        }
        let mut members = vec![Vec::new(); groups.len()];
        for (i, &g) in assignment.iter().enumerate() {
            members
                .get_mut(g as usize)
                .ok_or_else(|| Error::format(format!("group id {g} out of range")))?
                .push(i);
        }
        let atom_len = groups.first().map(|g| g.dictionary.atom_len).unwrap_or(0);
        let area = patch_side * patch_side;
        if atom_len != area && atom_len != 2 * area {
            return Err(Error::dim("atom length does not match the patch size"));
        }
        for (g, m) in groups.iter().zip(&members) {
            if g.num_patches() != m.len() || g.dictionary.atom_len != atom_len {
                return Err(Error::dim("group state does not match its member count"));
            }
        }
        let mut local_index = vec![0u32; n];
        for group in &members {
            for (li, &gi) in group.iter().enumerate() {
                local_index[gi] = li as u32;
            }
        }
        Ok(GibbsState {
            groups,
            members,
            local_index,
            assignment,
            image_side,
            patch_side,
            atom_len,
            sweeps,
            seed,
        })
    }

    fn localize_neighbors(&self, system: NeighborSystem<'_>) -> Result<Vec<LocalNeighbors>> {
        match system {
            NeighborSystem::Global => Ok(vec![LocalNeighbors::Global; self.members.len()]),
            NeighborSystem::Spatial(nb) => {
                if nb.num_rows() != self.assignment.len() {
                    return Err(Error::dim("neighborhoods do not match the patch count"));
                }
                let mut out = Vec::with_capacity(self.members.len());
                for (j, group) in self.members.iter().enumerate() {
                    let mut rows = Vec::with_capacity(group.len());
                    for &gi in group {
                        let mut row = Vec::with_capacity(nb.row(gi).len());
                        for &l in nb.row(gi) {
                            if self.assignment[l as usize] as usize != j {
                                return Err(Error::param("neighborhood crosses groups"));
                            }
                            row.push(self.local_index[l as usize]);
                        }
                        rows.push(row);
                    }
                    out.push(LocalNeighbors::Spatial(LocalRows::from_rows(rows)));
                }
                Ok(out)
            }
        }
    }

    fn localize_dependence(&self, a: &DependenceMatrix) -> Result<Vec<LocalRows<(u32, f64)>>> {
        if a.num_rows() != self.assignment.len() {
            return Err(Error::dim("dependence matrix does not match the patch count"));
        }
        let mut out = Vec::with_capacity(self.members.len());
        for (j, group) in self.members.iter().enumerate() {
            let mut offsets = Vec::with_capacity(group.len() + 1);
            let mut entries = Vec::new();
            offsets.push(0);
            for &gi in group {
                let (cols, weights) = a.row(gi);
                for (&l, &w) in cols.iter().zip(weights) {
                    if self.assignment[l as usize] as usize != j {
                        return Err(Error::param("dependence matrix couples different groups"));
                    }
                    entries.push((self.local_index[l as usize], w));
                }
                offsets.push(entries.len());
            }
            out.push(LocalRows { offsets, entries });
        }
        Ok(out)
    }

    /// Swaps in a new dependence matrix and recomputes `π = A π*`.
    pub fn set_dependence(&mut self, a: &DependenceMatrix) -> Result<()> {
        let local = self.localize_dependence(a)?;
        for (g, dep) in self.groups.iter_mut().zip(local) {
            g.dependence = dep;
            g.refresh_pi();
        }
        Ok(())
    }

    /// Restarts every group's random stream from `(seed, frame, group)`, so
    /// a frame's draws depend only on the state it starts from.
    pub fn reseed_for_frame(&mut self, frame: usize) {
        for (j, g) in self.groups.iter_mut().enumerate() {
            g.rng = crate::rng::stream(self.seed, &[crate::rng::TAG_FRAME, frame as u64, j as u64]);
        }
    }

    pub fn groups(&self) -> &[GroupState] {
        &self.groups
    }

    pub fn groups_mut(&mut self) -> &mut [GroupState] {
        &mut self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn image_side(&self) -> usize {
        self.image_side
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn atom_len(&self) -> usize {
        self.atom_len
    }

    pub fn is_stacked(&self) -> bool {
        self.atom_len == 2 * self.patch_side * self.patch_side
    }

    pub fn num_atoms(&self) -> usize {
        self.groups.first().map_or(0, GroupState::num_atoms)
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Patch-count-weighted mean of the group noise precisions.
    pub fn mean_noise_precision(&self) -> f64 {
        let total: usize = self.members.iter().map(Vec::len).sum();
        self.groups
            .iter()
            .zip(&self.members)
            .map(|(g, m)| g.hyper.gamma_eps * m.len() as f64)
            .sum::<f64>()
            / total as f64
    }

    pub fn active_atoms(&self) -> Vec<usize> {
        self.groups.iter().map(GroupState::active_atoms).collect()
    }

    pub fn eta_failures(&self) -> u64 {
        self.groups.iter().map(|g| g.eta_failures).sum()
    }

    /// Sparse code `α` of an image patch.
    pub fn alpha(&self, patch: usize) -> Vec<f64> {
        let g = &self.groups[self.assignment[patch] as usize];
        g.codes.alpha_column(self.local_index[patch] as usize)
    }

    /// Number of `f64` values held by the state; used to check memory bounds.
    pub fn footprint(&self) -> usize {
        self.groups
            .iter()
            .map(|g| {
                g.dictionary.atoms.len()
                    + 2 * g.codes.s.len()
                    + 2 * g.hyper.pi.len()
                    + g.dependence.entries.len() * 2
            })
            .sum()
    }
}
