use rayon::prelude::*;

use super::conditionals::{
    residual_energy, sample_codes, sample_dictionary, sample_eta, sample_noise_precision,
    sample_pi_star, sample_weight_precisions, GroupPatches,
};
use super::state::{GibbsState, GroupState};
use crate::linops::{assemble_patches, PatchMatrix};
use crate::{ComplexImage, Error, Result};

/// Per-sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepStats {
    /// `Σ_i ‖P_i x − D α_i‖²` over all patches before the hyperparameter
    /// updates, after codes and dictionary were redrawn.
    pub residual: f64,
    pub active_atoms: Vec<usize>,
}

/// One conditional pass over a single group: codes, dictionary, `γ_ε`,
/// `γ_s`, `π*` (and `π = A π*`), `η`.
pub fn group_sweep(state: &mut GroupState, x: &GroupPatches) -> Result<f64> {
    sample_codes(state, x)?;
    sample_dictionary(state, x)?;
    let residual = residual_energy(state, x);
    sample_noise_precision(state, x)?;
    sample_weight_precisions(state);
    sample_pi_star(state);
    sample_eta(state);
    state.update_idle();
    Ok(residual)
}

/// Sweeps every group once. Groups run in parallel, each on its own random
/// stream, so the result does not depend on scheduling.
pub fn gibbs_sweep(state: &mut GibbsState, patches: &PatchMatrix) -> Result<SweepStats> {
    check_patches(state, patches)?;
    let members = &state.members;
    let residuals: Vec<Result<f64>> = state
        .groups
        .par_iter_mut()
        .zip(members.par_iter())
        .map(|(g, m)| {
            let x = GroupPatches::gather(patches, m);
            group_sweep(g, &x)
        })
        .collect();
    let mut residual = 0.0;
    for r in residuals {
        residual += r?;
    }
    state.sweeps += 1;
    Ok(SweepStats {
        residual,
        active_atoms: state.active_atoms(),
    })
}

fn check_patches(state: &GibbsState, patches: &PatchMatrix) -> Result<()> {
    if patches.image_side() != state.image_side
        || patches.patch_side() != state.patch_side
        || patches.column_len() != state.atom_len
    {
        return Err(Error::dim(format!(
            "patches ({} px, side {}, len {}) do not match the sampler ({} px, side {}, len {})",
            patches.image_side(),
            patches.patch_side(),
            patches.column_len(),
            state.image_side,
            state.patch_side,
            state.atom_len
        )));
    }
    if !patches.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::param("patches contain non-finite values"));
    }
    Ok(())
}

/// `D_{g(i)} α_i` for every patch, as a patch matrix.
pub fn code_patches(state: &GibbsState) -> PatchMatrix {
    let mut out = PatchMatrix::zeros(state.image_side, state.patch_side, state.is_stacked());
    for (g, members) in state.groups.iter().zip(&state.members) {
        for (li, &gi) in members.iter().enumerate() {
            g.dictionary.synthesize(g.codes.active(li), out.column_mut(gi));
        }
    }
    out
}

/// `Σ_i P_iᵀ D_{g(i)} α_i`.
pub fn code_image(state: &GibbsState) -> ComplexImage {
    assemble_patches(&code_patches(state))
}
