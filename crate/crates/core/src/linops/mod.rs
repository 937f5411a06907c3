//! Linear operators of the observation and regularisation model.

mod fourier;
mod patches;
mod support;
mod wavelet;

pub use fourier::{apply_fu, apply_fu_adjoint, fft2c, ifft2c, kspace_embed};
pub use patches::{assemble_patches, extract_patches, extract_real_patches, PatchMatrix};
pub use support::{estimate_support, restrict_complement, SupportSet, DEFAULT_SUPPORT_THRESHOLD};
pub use wavelet::{default_levels, dwt2, idwt2, WaveletCoeffs};
