use nalgebra::DMatrix;
use rand::Rng;

use super::draw::{self, clip_prob};
use super::eta;
use super::state::{GroupState, LocalNeighbors};
use crate::linops::PatchMatrix;
use crate::{Error, Result};

/// The patches of one group, gathered into contiguous columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPatches {
    atom_len: usize,
    data: Vec<f64>,
}

impl GroupPatches {
    pub fn from_columns(atom_len: usize, data: Vec<f64>) -> Result<Self> {
        if atom_len == 0 || data.len() % atom_len != 0 {
            return Err(Error::dim("patch storage is not a whole number of columns"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("patches contain non-finite values"));
        }
        Ok(GroupPatches { atom_len, data })
    }

    pub fn gather(patches: &PatchMatrix, members: &[usize]) -> Self {
        let atom_len = patches.column_len();
        let mut data = Vec::with_capacity(atom_len * members.len());
        for &i in members {
            data.extend_from_slice(patches.column(i));
        }
        GroupPatches { atom_len, data }
    }

    pub fn atom_len(&self) -> usize {
        self.atom_len
    }

    pub fn num_patches(&self) -> usize {
        self.data.len() / self.atom_len
    }

    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.atom_len..(i + 1) * self.atom_len]
    }

    fn check(&self, state: &GroupState) -> Result<()> {
        if self.atom_len != state.dictionary.atom_len()
            || self.num_patches() != state.num_patches()
        {
            return Err(Error::dim("group patches do not match the group state"));
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Redraws `(z_ik, s_ik)` atom by atom for every patch, keeping the residual
/// `x_i − D α_i` up to date.
pub fn sample_codes(state: &mut GroupState, x: &GroupPatches) -> Result<()> {
    x.check(state)?;
    let k_atoms = state.num_atoms();
    let p_len = x.atom_len();
    let dd: Vec<f64> = (0..k_atoms)
        .map(|k| {
            let d = state.dictionary.atom(k);
            dot(d, d)
        })
        .collect();
    let g_eps = state.hyper.gamma_eps;
    let mut r = vec![0.0; p_len];
    let GroupState {
        dictionary,
        codes,
        hyper,
        rng,
        ..
    } = state;
    for i in 0..x.num_patches() {
        r.copy_from_slice(x.column(i));
        for (k, s) in codes.active(i).collect::<Vec<_>>() {
            axpy(-s, dictionary.atom(k), &mut r);
        }
        let pi_row = &hyper.pi[i * k_atoms..(i + 1) * k_atoms];
        for k in 0..k_atoms {
            let d = dictionary.atom(k);
            if codes.z(i, k) {
                axpy(codes.s(i, k), d, &mut r);
            }
            let g_s = hyper.gamma_s[k];
            let dr = dot(d, &r);
            let prec = g_s + g_eps * dd[k];
            let pi = pi_row[k];
            let log_odds = pi.ln() - (1.0 - pi).ln()
                + 0.5 * (g_s / prec).ln()
                + 0.5 * (g_eps * dr) * (g_eps * dr) / prec;
            let p1 = 1.0 / (1.0 + (-log_odds).exp());
            let z = rng.random::<f64>() < p1;
            let s = if z {
                let s = g_eps * dr / prec + draw::normal(rng) / prec.sqrt();
                axpy(-s, d, &mut r);
                s
            } else {
                draw::normal(rng) / g_s.sqrt()
            };
            codes.set(i, k, z, s);
        }
    }
    Ok(())
}

/// How the dictionary draw treats the Gaussian perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryDraw {
    Posterior,
    /// Conditional mean only; exposes the deterministic part for testing.
    MeanOnly,
}

/// Joint redraw of all atoms. Every row of `D` shares the posterior precision
/// `Λ = γ_ε α αᵀ + P·I` (`P` the atom length) and has mean
/// `γ_ε Λ⁻¹ α x_rowᵀ`.
pub fn sample_dictionary(state: &mut GroupState, x: &GroupPatches) -> Result<()> {
    sample_dictionary_with(state, x, DictionaryDraw::Posterior)
}

pub fn sample_dictionary_with(
    state: &mut GroupState,
    x: &GroupPatches,
    mode: DictionaryDraw,
) -> Result<()> {
    x.check(state)?;
    let k_atoms = state.num_atoms();
    let p_len = x.atom_len();
    let g_eps = state.hyper.gamma_eps;
    // G = Σ α_i α_iᵀ (upper triangle) and B = Σ α_i x_iᵀ, both row-major
    let mut g = vec![0.0; k_atoms * k_atoms];
    let mut b = vec![0.0; k_atoms * p_len];
    let mut act: Vec<(usize, f64)> = Vec::with_capacity(k_atoms);
    for i in 0..x.num_patches() {
        act.clear();
        act.extend(state.codes.active(i));
        let xi = x.column(i);
        for (j, &(k1, a1)) in act.iter().enumerate() {
            let row = &mut g[k1 * k_atoms..(k1 + 1) * k_atoms];
            for &(k2, a2) in &act[j..] {
                row[k2] += a1 * a2;
            }
            axpy(a1, xi, &mut b[k1 * p_len..(k1 + 1) * p_len]);
        }
    }
    let g = DMatrix::from_fn(k_atoms, k_atoms, |r, c| g[r.min(c) * k_atoms + r.max(c)]);
    let b = DMatrix::from_fn(k_atoms, p_len, |k, p| b[k * p_len + p]);
    let mut lambda = g * g_eps;
    for k in 0..k_atoms {
        lambda[(k, k)] += p_len as f64;
    }
    let chol = cholesky_with_jitter(lambda)?;
    let mean = chol.solve(&(b * g_eps)); // K × P, column p = mean of row p of D
    let mut rows = mean;
    if mode == DictionaryDraw::Posterior {
        let xi = DMatrix::from_fn(k_atoms, p_len, |_, _| draw::normal(&mut state.rng));
        let lt = chol.l().transpose();
        let e = lt
            .solve_upper_triangular(&xi)
            .ok_or_else(|| Error::Numerical {
                iteration: 0,
                reason: "singular dictionary posterior factor".into(),
            })?;
        rows += e;
    }
    for k in 0..k_atoms {
        let atom = state.dictionary.atom_mut(k);
        for (p, a) in atom.iter_mut().enumerate() {
            *a = rows[(k, p)];
        }
    }
    Ok(())
}

fn cholesky_with_jitter(mut m: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let mut jitter = 1e-10;
    for _ in 0..12 {
        if let Some(c) = m.clone().cholesky() {
            return Ok(c);
        }
        for k in 0..n {
            m[(k, k)] += jitter;
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical {
        iteration: 0,
        reason: "dictionary posterior precision is not positive definite".into(),
    })
}

/// `Σ_i ‖x_i − D α_i‖²` over the group.
pub fn residual_energy(state: &GroupState, x: &GroupPatches) -> f64 {
    let mut r = vec![0.0; x.atom_len()];
    let mut total = 0.0;
    for i in 0..x.num_patches() {
        r.copy_from_slice(x.column(i));
        for (k, s) in state.codes.active(i) {
            axpy(-s, state.dictionary.atom(k), &mut r);
        }
        total += dot(&r, &r);
    }
    total
}

/// `γ_ε ~ Gamma(g₀ + P·N/2, h₀ + ½ Σ ‖x_i − D α_i‖²)`.
pub fn sample_noise_precision(state: &mut GroupState, x: &GroupPatches) -> Result<f64> {
    x.check(state)?;
    let energy = residual_energy(state, x);
    let shape = state.params.g0 + 0.5 * (x.atom_len() * x.num_patches()) as f64;
    let rate = state.params.h0 + 0.5 * energy;
    let g = draw::gamma(&mut state.rng, shape, rate);
    state.hyper.gamma_eps = g;
    Ok(g)
}

/// `γ_sk ~ Gamma(e₀ + ½ Σ_i z_ik, f₀ + ½ Σ_i z_ik s_ik²)`.
pub fn sample_weight_precisions(state: &mut GroupState) {
    let k_atoms = state.num_atoms();
    let mut count = vec![0.0; k_atoms];
    let mut sq = vec![0.0; k_atoms];
    for i in 0..state.num_patches() {
        for (k, s) in state.codes.active(i) {
            count[k] += 1.0;
            sq[k] += s * s;
        }
    }
    for k in 0..k_atoms {
        let shape = state.params.e0 + 0.5 * count[k];
        let rate = state.params.f0 + 0.5 * sq[k];
        state.hyper.gamma_s[k] = draw::gamma(&mut state.rng, shape, rate);
    }
}

/// `π*_lk ~ Beta(c₁η_k + Σ_{i∈Q_l} z_ik, c₁(1−η_k) + Σ_{i∈Q_l}(1 − z_ik))`,
/// then `π = A π*`.
pub fn sample_pi_star(state: &mut GroupState) {
    let k_atoms = state.num_atoms();
    let n = state.num_patches();
    let c1 = state.params.c1;
    let GroupState {
        codes,
        hyper,
        neighbors,
        rng,
        ..
    } = state;
    let mut counts = vec![0u32; k_atoms];
    let accumulate = |counts: &mut [u32], i: usize| {
        let row = &codes.z[i * k_atoms..(i + 1) * k_atoms];
        for (c, &z) in counts.iter_mut().zip(row) {
            *c += z as u32;
        }
    };
    let global_size = if let LocalNeighbors::Global = neighbors {
        for i in 0..n {
            accumulate(&mut counts, i);
        }
        n
    } else {
        0
    };
    for l in 0..n {
        let size = match neighbors {
            LocalNeighbors::Global => global_size,
            LocalNeighbors::Spatial(rows) => {
                counts.fill(0);
                let row = rows.row(l);
                for &i in row {
                    accumulate(&mut counts, i as usize);
                }
                row.len()
            }
        };
        let out = &mut hyper.pi_star[l * k_atoms..(l + 1) * k_atoms];
        for k in 0..k_atoms {
            let eta = hyper.eta[k];
            let on = counts[k] as f64;
            let off = size as f64 - on;
            let a = c1 * eta + on;
            let b = c1 * (1.0 - eta) + off;
            out[k] = clip_prob(draw::beta(rng, a, b));
        }
    }
    state.refresh_pi();
}

/// Redraws every `η_k` given `π*`.
pub fn sample_eta(state: &mut GroupState) {
    let k_atoms = state.num_atoms();
    let n = state.num_patches();
    let params = state.params;
    let GroupState {
        hyper,
        rng,
        eta_failures,
        ..
    } = state;
    let mut sum_log = vec![0.0; k_atoms];
    let mut sum_log1m = vec![0.0; k_atoms];
    for row in hyper.pi_star.chunks_exact(k_atoms) {
        for k in 0..k_atoms {
            let p = clip_prob(row[k]);
            sum_log[k] += p.ln();
            sum_log1m[k] += (-p).ln_1p();
        }
    }
    for k in 0..k_atoms {
        let stats = eta::EtaStats {
            rows: n,
            sum_log: sum_log[k],
            sum_log1m: sum_log1m[k],
        };
        match eta::sample(rng, hyper.eta[k], &stats, &params) {
            Some(e) => hyper.eta[k] = e,
            None => *eta_failures += 1,
        }
    }
}
