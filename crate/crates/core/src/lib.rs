//! Causal reconstruction of dynamic MR image sequences from undersampled
//! k-space.
//!
//! Each frame is recovered by an ADMM loop that alternates a wavelet
//! shrinkage step (penalising coefficients outside the support of a
//! reference frame), a Gibbs sweep of a grouped, dependent beta-process
//! dictionary model over overlapping image patches, and an exact
//! Fourier-domain least-squares solve. Frames are processed strictly in
//! order; the dictionary state of frame `t - 1` warm-starts frame `t`.
//!
//! Module map:
//!
//! * [`linops`]: Fourier sampling operator, patch extraction/assembly,
//!   Daubechies wavelets, support estimation.
//! * [`sampling`]: radial masks and measured k-space frames.
//! * [`grouping`]: k-means patch grouping and the patch dependence matrix.
//! * [`dictlearn`]: the Gibbs sampler.
//! * [`admm`]: the per-frame solver.
//! * [`pipeline`]: sequence orchestration.
//! * [`metrics`]: PSNR and Gini index.
//! * [`io`], [`phantom`], [`config`], [`baseline`]: file formats, synthetic
//!   data, run configuration and reference reconstructors.

pub mod admm;
pub mod baseline;
pub mod config;
pub mod dictlearn;
pub mod error;
pub mod grouping;
pub mod image;
pub mod io;
pub mod linops;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use image::ComplexImage;
pub use num_complex::Complex64;
