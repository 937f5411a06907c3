//! Causal sequence reconstruction. Frame 1 is reconstructed with global
//! wavelet sparsity and a single patch group, its result drives the patch
//! grouping, and every later frame warm-starts from the sampler state and
//! reconstruction of the frames before it. Frame `t` never sees data from a
//! later frame.

use std::time::Instant;

use crate::admm::{patches_for as patches_of_state, reconstruct_frame, DependenceRefresh, FrameSetup, IterationRecord, ReconContext};
use crate::config::{KernelWidth, ReferenceMode, RunConfig};
use crate::dictlearn::{gibbs_sweep, GibbsState, NeighborSystem};
use crate::grouping::{build_dependence, kmeans_group, median_kernel_width, DependenceMatrix, Neighborhoods, PatchGrouping};
use crate::linops::{
    apply_fu_adjoint, default_levels, estimate_support, extract_patches, extract_real_patches,
    PatchMatrix, SupportSet,
};
use crate::metrics::psnr;
use crate::rng;
use crate::sampling::KSpaceFrame;
use crate::{ComplexImage, Error, Result};

/// Model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Grouped patches with kernel-dependent usage probabilities.
    Dnbg,
    /// One group, self-only dependence and group-wide usage counts.
    Ablation,
}

/// Everything reported for one reconstructed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    /// One-based frame number.
    pub index: usize,
    pub image: ComplexImage,
    pub diagnostics: Vec<IterationRecord>,
    pub converged: bool,
    pub psnr: Option<f64>,
    pub seconds: f64,
    /// Elements held by the sampler plus live images when the frame ended.
    pub footprint: usize,
}

/// State handed from frame 1 to the rest of the sequence.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    pub frame: FrameResult,
    pub grouping: PatchGrouping,
    pub neighborhoods: Neighborhoods,
    pub sigma: f64,
    pub state: GibbsState,
}

fn frame_seed(config: &RunConfig, t: usize) -> u64 {
    rng::derive_seed(config.seed, &[rng::TAG_FRAME, t as u64])
}

fn check_frame(y: &KSpaceFrame, t: usize, side: Option<usize>) -> Result<()> {
    if y.frame_index() != t {
        return Err(Error::param(format!(
            "frame {t} carries index {}; frames must be numbered 1, 2, ... in order",
            y.frame_index()
        )));
    }
    if let Some(s) = side {
        if y.side() != s {
            return Err(Error::dim(format!("frame {t} is {0}x{0}, expected {s}x{s}", y.side())));
        }
    }
    Ok(())
}

fn kernel_width(config: &RunConfig, patches: &PatchMatrix, nb: &Neighborhoods, tag: u64) -> f64 {
    match config.sigma {
        KernelWidth::Fixed(s) => s,
        KernelWidth::Median => median_kernel_width(patches, nb, rng::derive_seed(config.seed, &[tag])),
    }
}

fn new_state(
    config: &RunConfig,
    variant: Variant,
    grouping: &PatchGrouping,
    nb: &Neighborhoods,
    dependence: &DependenceMatrix,
    seed: u64,
) -> Result<GibbsState> {
    let system = match variant {
        Variant::Dnbg => NeighborSystem::Spatial(nb),
        Variant::Ablation => NeighborSystem::Global,
    };
    GibbsState::init(
        grouping,
        config.patch_side(),
        config.complex_patches,
        dependence,
        system,
        config.num_atoms,
        config.hyper,
        seed,
    )
}

fn dependence_for(
    variant: Variant,
    current: &PatchMatrix,
    reference: &PatchMatrix,
    nb: &Neighborhoods,
    sigma: f64,
) -> Result<DependenceMatrix> {
    match variant {
        Variant::Dnbg => build_dependence(current, reference, nb, sigma),
        Variant::Ablation => Ok(DependenceMatrix::identity(current.num_patches())),
    }
}

fn refresh<'a>(variant: Variant, nb: &'a Neighborhoods, sigma: f64) -> DependenceRefresh<'a> {
    match variant {
        Variant::Dnbg => DependenceRefresh::Current {
            neighborhoods: nb,
            sigma,
        },
        Variant::Ablation => DependenceRefresh::Frozen,
    }
}

fn patches_of(config: &RunConfig, image: &ComplexImage) -> Result<PatchMatrix> {
    if config.complex_patches {
        extract_patches(image, config.patch_area)
    } else {
        extract_real_patches(image, config.patch_area)
    }
}

fn burn_in(state: &mut GibbsState, image: &ComplexImage, sweeps: usize) -> Result<()> {
    let patches = patches_of_state(state, image)?;
    for _ in 0..sweeps {
        gibbs_sweep(state, &patches)?;
    }
    Ok(())
}

fn context(config: &RunConfig, support: SupportSet) -> Result<ReconContext> {
    let levels = default_levels(support.side());
    ReconContext::new(support, levels, config.weights(), config.max_iters, config.tolerance)
}

fn tag_frame(err: Error, t: usize) -> Error {
    match err {
        Error::Numerical { iteration, reason } => Error::Numerical {
            iteration,
            reason: format!("frame {t}: {reason}"),
        },
        other => other,
    }
}

/// Reconstructs frame 1 (or adopts a supplied fully sampled `guide`), groups
/// its patches and draws a fresh grouped sampler state burnt in on it.
pub fn bootstrap_first_frame(
    y1: &KSpaceFrame,
    config: &RunConfig,
    variant: Variant,
    guide: Option<&ComplexImage>,
    truth: Option<&ComplexImage>,
) -> Result<Bootstrap> {
    config.validate()?;
    check_frame(y1, 1, guide.map(ComplexImage::side))?;
    let side = y1.side();
    let start = Instant::now();
    let seed = frame_seed(config, 1);
    let patch_len = if config.complex_patches { 2 } else { 1 } * config.patch_area;

    let (image, diagnostics, converged, footprint) = match guide {
        Some(g) => (g.clone(), Vec::new(), true, 0),
        None => {
            let single = PatchGrouping::single(side, patch_len, 1);
            let nb = Neighborhoods::build(&single, config.radius)?;
            let x0 = apply_fu_adjoint(y1);
            let p0 = patches_of(config, &x0)?;
            let sigma = kernel_width(config, &p0, &nb, 1);
            let a = dependence_for(variant, &p0, &p0, &nb, sigma)?;
            let mut state = new_state(config, variant, &single, &nb, &a, seed)?;
            burn_in(&mut state, &x0, config.burn_in)?;
            let mut ctx = context(config, SupportSet::empty(side))?;
            let setup = FrameSetup {
                dependence: refresh(variant, &nb, sigma),
                truth,
            };
            let out = reconstruct_frame(y1, &mut state, &mut ctx, &setup).map_err(|e| tag_frame(e, 1))?;
            let fp = state.footprint() + 2 * side * side;
            (out.image, out.diagnostics, out.converged, fp)
        }
    };

    let grouping = match variant {
        Variant::Dnbg => {
            let patches = patches_of(config, &image)?;
            let mut g = kmeans_group(&patches, config.num_groups, rng::derive_seed(config.seed, &[rng::TAG_KMEANS]), config.kmeans_iters)?;
            g.guide_frame = 1;
            g
        }
        Variant::Ablation => PatchGrouping::single(side, patch_len, 1),
    };
    let neighborhoods = Neighborhoods::build(&grouping, config.radius)?;
    let init_seed = rng::derive_seed(config.seed, &[rng::TAG_INIT]);
    let guide_patches = patches_of(config, &image)?;
    let sigma = kernel_width(config, &guide_patches, &neighborhoods, 2);
    let a = dependence_for(variant, &guide_patches, &guide_patches, &neighborhoods, sigma)?;
    let mut state = new_state(config, variant, &grouping, &neighborhoods, &a, init_seed)?;
    burn_in(&mut state, &image, config.burn_in)?;

    let psnr = truth.map(|t| psnr(&image, t)).transpose()?;
    let footprint = footprint.max(state.footprint() + 2 * side * side);
    Ok(Bootstrap {
        frame: FrameResult {
            index: 1,
            image,
            diagnostics,
            converged,
            psnr,
            seconds: start.elapsed().as_secs_f64(),
            footprint,
        },
        grouping,
        neighborhoods,
        sigma,
        state,
    })
}

/// Inputs of a sequence run besides the k-space frames themselves.
#[derive(Debug, Clone, Copy)]
pub struct SequenceJob<'a> {
    pub config: &'a RunConfig,
    pub variant: Variant,
    /// Fully sampled frame-1 image; skips the frame-1 reconstruction.
    pub guide: Option<&'a ComplexImage>,
    /// Ground truth by zero-based frame, for PSNR reporting only.
    pub truth: Option<&'a [ComplexImage]>,
}

/// Run-level bookkeeping returned once the sequence ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSummary {
    pub frames: usize,
    /// Largest per-frame footprint, in `f64`-sized elements.
    pub peak_footprint: usize,
}

/// Reconstructs frames in order, handing each finished frame to `sink`
/// before touching the next input. Frames must be numbered 1, 2, ... . On
/// error, every frame already passed to `sink` stays delivered.
pub fn reconstruct_sequence<I, F>(job: SequenceJob<'_>, frames: I, mut sink: F) -> Result<SequenceSummary>
where
    I: IntoIterator<Item = KSpaceFrame>,
    F: FnMut(FrameResult) -> Result<()>,
{
    let config = job.config;
    config.validate()?;
    let truth_of = |t: usize| job.truth.and_then(|tr| tr.get(t - 1));
    let mut frames = frames.into_iter();
    let Some(y1) = frames.next() else {
        return Err(Error::param("sequence has no frames"));
    };
    let boot = bootstrap_first_frame(&y1, config, job.variant, job.guide, truth_of(1))?;
    drop(y1);
    let Bootstrap {
        frame,
        neighborhoods,
        sigma,
        mut state,
        ..
    } = boot;
    let side = frame.image.side();
    let first = match config.reference {
        ReferenceMode::First => Some(frame.image.clone()),
        ReferenceMode::Prev => None,
    };
    let mut previous = frame.image.clone();
    let mut peak = frame.footprint;
    let levels = default_levels(side);
    sink(frame)?;
    let mut count = 1;

    for y in frames {
        let t = count + 1;
        check_frame(&y, t, Some(side))?;
        let start = Instant::now();
        let reference = first.as_ref().unwrap_or(&previous);
        let support = estimate_support(reference, config.support_threshold, levels)?;
        let ref_patches = patches_of(config, reference)?;
        let a = dependence_for(job.variant, &ref_patches, &ref_patches, &neighborhoods, sigma)?;
        drop(ref_patches);
        state.set_dependence(&a)?;
        state.reseed_for_frame(t);
        let mut ctx = context(config, support)?;
        let setup = FrameSetup {
            dependence: refresh(job.variant, &neighborhoods, sigma),
            truth: truth_of(t),
        };
        let out = reconstruct_frame(&y, &mut state, &mut ctx, &setup).map_err(|e| tag_frame(e, t))?;
        let images_live = 2 + usize::from(first.is_some()) + 1;
        let footprint = state.footprint() + a.nnz() * 2 + images_live * 2 * side * side;
        peak = peak.max(footprint);
        previous = out.image.clone();
        let psnr = truth_of(t).map(|tr| psnr(&out.image, tr)).transpose()?;
        sink(FrameResult {
            index: t,
            image: out.image,
            diagnostics: out.diagnostics,
            converged: out.converged,
            psnr,
            seconds: start.elapsed().as_secs_f64(),
            footprint,
        })?;
        count = t;
    }
    Ok(SequenceSummary {
        frames: count,
        peak_footprint: peak,
    })
}

/// Runs [`reconstruct_sequence`] and collects every frame.
pub fn reconstruct_all(job: SequenceJob<'_>, frames: Vec<KSpaceFrame>) -> Result<Vec<FrameResult>> {
    let mut out = Vec::with_capacity(frames.len());
    reconstruct_sequence(job, frames, |f| {
        out.push(f);
        Ok(())
    })?;
    Ok(out)
}
