//! Reference reconstructors.

use crate::linops::apply_fu_adjoint;
use crate::pipeline::{reconstruct_all, FrameResult, SequenceJob, Variant};
use crate::sampling::KSpaceFrame;
use crate::{ComplexImage, Result};

/// Inverse DFT with unmeasured k-space set to zero.
pub fn zero_filled(y: &KSpaceFrame) -> ComplexImage {
    apply_fu_adjoint(y)
}

/// The full pipeline with one patch group, self-only dependence and
/// group-wide usage counts: a plain beta-process factor model.
pub fn ablation(job: SequenceJob<'_>, frames: Vec<KSpaceFrame>) -> Result<Vec<FrameResult>> {
    reconstruct_all(
        SequenceJob {
            variant: Variant::Ablation,
            ..job
        },
        frames,
    )
}
