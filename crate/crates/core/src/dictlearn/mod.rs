//! Group-wise dictionary learning under a dependent hierarchical beta-process
//! prior, inferred by Gibbs sampling.
//!
//! Each group owns a real dictionary `D` (`P × K`), binary usage `z`,
//! Gaussian weights `s` and hyperparameters. The usage probability of atom
//! `k` in patch `i` is `π_ik = Σ_l a_il π*_lk`, a convex combination of
//! beta-process draws of similar nearby patches.

mod conditionals;
mod draw;
pub mod eta;
pub(crate) mod state;
mod sweep;

pub use conditionals::{
    residual_energy, sample_codes, sample_dictionary, sample_dictionary_with, sample_eta,
    sample_noise_precision, sample_pi_star, sample_weight_precisions, DictionaryDraw,
    GroupPatches,
};
pub use draw::PROB_FLOOR;
pub use state::{
    Dictionary, GibbsState, GroupState, HyperParams, HyperState, NeighborSystem, SparseCode,
    ETA_EDGE,
};
pub use sweep::{code_image, code_patches, gibbs_sweep, group_sweep, SweepStats};

/// Sweeps after which an unused atom counts as pruned. The dictionary
/// conditional already redraws such atoms from the prior, because an atom
/// with no usage decouples from the data.
pub const PRUNE_AFTER: u32 = 10;

#[cfg(test)]
mod tests;
