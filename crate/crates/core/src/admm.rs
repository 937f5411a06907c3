//! Outer ADMM loop for one frame: wavelet shrinkage off the reference
//! support, one Gibbs sweep of the patch model, an exact Fourier-domain
//! least-squares solve and a scaled dual ascent step.
//!
//! The support restriction lives in the shrinkage threshold instead of the
//! operator: `v` spans the full coefficient grid, coefficients on the support
//! pass through untouched, so `WᵀW = I` and the x-solve stays diagonal in
//! k-space.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dictlearn::{code_image, gibbs_sweep, GibbsState};
use crate::grouping::{build_dependence, Neighborhoods};
use crate::linops::{
    apply_fu, extract_patches, extract_real_patches, fft2c, idwt2, ifft2c, kspace_embed, dwt2,
    PatchMatrix, SupportSet, WaveletCoeffs,
};
use crate::metrics::{mean_gini, psnr};
use crate::sampling::KSpaceFrame;
use crate::{Complex64, ComplexImage, Error, Result};

/// Weight of the k-space data term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataWeight {
    Finite(f64),
    /// Sampled k-space entries are replaced by the measurements exactly.
    Noiseless,
}

/// Penalty weights of the augmented Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub lambda_g: f64,
    pub rho: f64,
    pub data: DataWeight,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            lambda_g: 10.0,
            rho: 1000.0,
            data: DataWeight::Finite(1e10),
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_g >= 0.0 && self.lambda_g.is_finite()) {
            return Err(Error::param(format!("lambda_g = {} must be ≥ 0", self.lambda_g)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::param(format!("rho = {} must be > 0", self.rho)));
        }
        if let DataWeight::Finite(l) = self.data {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::param(format!("lambda = {l} must be ≥ 0")));
            }
        }
        Ok(())
    }
}

/// Per-frame solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconContext {
    support: SupportSet,
    levels: usize,
    v: WaveletCoeffs,
    u: WaveletCoeffs,
    pub weights: Weights,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl ReconContext {
    pub fn new(
        support: SupportSet,
        levels: usize,
        weights: Weights,
        max_iters: usize,
        tolerance: f64,
    ) -> Result<Self> {
        weights.validate()?;
        let side = support.side();
        if side >> levels == 0 || side % (1 << levels) != 0 {
            return Err(Error::param(format!(
                "{levels} wavelet levels do not fit a {side}x{side} grid"
            )));
        }
        if !(tolerance >= 0.0) {
            return Err(Error::param(format!("tolerance {tolerance} must be ≥ 0")));
        }
        Ok(ReconContext {
            support,
            levels,
            v: WaveletCoeffs::zeros(side, levels),
            u: WaveletCoeffs::zeros(side, levels),
            weights,
            max_iters,
            tolerance,
        })
    }

    pub fn side(&self) -> usize {
        self.support.side()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn v(&self) -> &WaveletCoeffs {
        &self.v
    }

    pub fn u(&self) -> &WaveletCoeffs {
        &self.u
    }

    /// Overwrites the auxiliary and dual variables, e.g. for tests.
    pub fn set_variables(&mut self, v: WaveletCoeffs, u: WaveletCoeffs) -> Result<()> {
        for c in [&v, &u] {
            if c.side() != self.side() || c.levels() != self.levels {
                return Err(Error::dim("coefficients do not match the context grid"));
            }
        }
        self.v = v;
        self.u = u;
        Ok(())
    }

    /// Zeroes `v` and `u`.
    pub fn reset(&mut self) {
        self.v = WaveletCoeffs::zeros(self.side(), self.levels);
        self.u = WaveletCoeffs::zeros(self.side(), self.levels);
    }

    fn check_image(&self, x: &ComplexImage) -> Result<()> {
        if x.side() != self.side() {
            return Err(Error::dim(format!(
                "image is {0}x{0}, context is {1}x{1}",
                x.side(),
                self.side()
            )));
        }
        Ok(())
    }
}

/// Proximal map of `κ·|·|` on a complex scalar: `c·max(1 − κ/|c|, 0)`.
#[inline]
pub fn soft_threshold(c: Complex64, kappa: f64) -> Complex64 {
    let mag = c.norm();
    if mag <= kappa || mag == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        c * (1.0 - kappa / mag)
    }
}

/// `v = soft(W x + u, λ_g/ρ)` off the support and `v = W x + u` on it.
pub fn v_update(ctx: &mut ReconContext, x: &ComplexImage) -> Result<()> {
    ctx.check_image(x)?;
    let wx = dwt2(x, ctx.levels)?;
    let kappa = ctx.weights.lambda_g / ctx.weights.rho;
    let support = ctx.support.mask();
    for (idx, ((v, &w), &u)) in ctx
        .v
        .as_mut_slice()
        .iter_mut()
        .zip(wx.as_slice())
        .zip(ctx.u.as_slice())
        .enumerate()
    {
        let c = w + u;
        *v = if support[idx] { c } else { soft_threshold(c, kappa) };
    }
    Ok(())
}

/// Exact minimizer of
/// `γ_ε/2 Σ‖P_i x − D α_i‖² + λ/2 ‖F_u x − y‖² + ρ/2 ‖W x − v + u‖²`,
/// i.e. the solution of
/// `(γ_ε L + λ F_uᵀF_u + ρ) x = γ_ε Σ P_iᵀ D α_i + λ F_uᵀ y + ρ Wᵀ(v − u)`,
/// which is diagonal in k-space.
pub fn x_update(
    ctx: &ReconContext,
    code_img: &ComplexImage,
    gamma_eps: f64,
    patch_area: usize,
    y: &KSpaceFrame,
) -> Result<ComplexImage> {
    ctx.check_image(code_img)?;
    if y.side() != ctx.side() {
        return Err(Error::dim("k-space frame does not match the context grid"));
    }
    if !(gamma_eps >= 0.0 && gamma_eps.is_finite()) {
        return Err(Error::param(format!("noise precision {gamma_eps} must be ≥ 0")));
    }
    let mut target = ctx.v.clone();
    for (t, u) in target.as_mut_slice().iter_mut().zip(ctx.u.as_slice()) {
        *t -= u;
    }
    let w_hat = fft2c(&idwt2(&target));
    let c_hat = fft2c(code_img);
    let y_full = kspace_embed(y);
    let mask = y.mask();
    let rho = ctx.weights.rho;
    let gl = gamma_eps * patch_area as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); w_hat.len()];
    for (f, o) in out.iter_mut().enumerate() {
        let sampled = mask.is_sampled(f);
        *o = match (sampled, ctx.weights.data) {
            (true, DataWeight::Noiseless) => y_full[f],
            (true, DataWeight::Finite(lambda)) => {
                (gamma_eps * c_hat[f] + lambda * y_full[f] + rho * w_hat[f]) / (gl + lambda + rho)
            }
            (false, _) => (gamma_eps * c_hat[f] + rho * w_hat[f]) / (gl + rho),
        };
    }
    Ok(ifft2c(&out, ctx.side()))
}

/// `u ← u + W x − v`; returns `‖W x − v‖₂`.
pub fn dual_update(ctx: &mut ReconContext, x: &ComplexImage) -> Result<f64> {
    ctx.check_image(x)?;
    let wx = dwt2(x, ctx.levels)?;
    let mut gap = 0.0;
    for ((u, &w), &v) in ctx
        .u
        .as_mut_slice()
        .iter_mut()
        .zip(wx.as_slice())
        .zip(ctx.v.as_slice())
    {
        let r = w - v;
        gap += r.norm_sqr();
        *u += r;
    }
    Ok(gap.sqrt())
}

/// How the dependence matrix evolves inside a frame.
#[derive(Debug, Clone, Copy)]
pub enum DependenceRefresh<'a> {
    /// Keep whatever the sampler holds.
    Frozen,
    /// From the second iteration on, rebuild `A` from the current patches.
    Current {
        neighborhoods: &'a Neighborhoods,
        sigma: f64,
    },
}

/// Per-frame options of [`reconstruct_frame`].
#[derive(Debug, Clone, Copy)]
pub struct FrameSetup<'a> {
    pub dependence: DependenceRefresh<'a>,
    /// Enables the PSNR column of the diagnostics.
    pub truth: Option<&'a ComplexImage>,
}

impl Default for FrameSetup<'_> {
    fn default() -> Self {
        FrameSetup {
            dependence: DependenceRefresh::Frozen,
            truth: None,
        }
    }
}

/// One row of the per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖x_k − x_{k−1}‖ / ‖x_{k−1}‖`.
    pub relative_change: f64,
    /// `‖F_u x − y‖ / ‖y‖`.
    pub data_error: f64,
    /// `‖W x − v‖₂` after the dual step.
    pub dual_gap: f64,
    pub psnr: Option<f64>,
    pub active_atoms: usize,
    pub gini: f64,
    pub gamma_eps: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub image: ComplexImage,
    pub diagnostics: Vec<IterationRecord>,
    pub converged: bool,
}

pub(crate) fn patches_for(state: &GibbsState, x: &ComplexImage) -> Result<PatchMatrix> {
    let area = state.patch_side() * state.patch_side();
    if state.is_stacked() {
        extract_patches(x, area)
    } else {
        extract_real_patches(x, area)
    }
}

fn data_error(x: &ComplexImage, y: &KSpaceFrame) -> Result<f64> {
    let fx = apply_fu(x, y.mask())?;
    let num: f64 = fx
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let den: f64 = y.values().iter().map(|v| v.norm_sqr()).sum();
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

/// Runs the ADMM loop on one frame starting from the zero-filled image. The
/// sampler state is advanced in place; `v` and `u` start at zero.
pub fn reconstruct_frame(
    y: &KSpaceFrame,
    gibbs: &mut GibbsState,
    ctx: &mut ReconContext,
    setup: &FrameSetup<'_>,
) -> Result<FrameOutput> {
    if gibbs.image_side() != ctx.side() || y.side() != ctx.side() {
        return Err(Error::dim("frame, sampler and context disagree on image size"));
    }
    let patch_area = gibbs.patch_side() * gibbs.patch_side();
    ctx.reset();
    let mut x = crate::linops::apply_fu_adjoint(y);
    let mut diagnostics = Vec::with_capacity(ctx.max_iters);
    let mut converged = false;
    for iteration in 1..=ctx.max_iters {
        let start = Instant::now();
        v_update(ctx, &x)?;
        let patches = patches_for(gibbs, &x)?;
        if iteration > 1 {
            if let DependenceRefresh::Current {
                neighborhoods,
                sigma,
            } = setup.dependence
            {
                let a = build_dependence(&patches, &patches, neighborhoods, sigma)?;
                gibbs.set_dependence(&a)?;
            }
        }
        let stats = gibbs_sweep(gibbs, &patches)?;
        let gamma_eps = gibbs.mean_noise_precision();
        let code = code_image(gibbs);
        let x_new = x_update(ctx, &code, gamma_eps, patch_area, y)?;
        if !x_new.is_finite() {
            return Err(Error::Numerical {
                iteration,
                reason: format!(
                    "non-finite iterate (γ_ε = {gamma_eps:.3e}, active atoms {:?}, last record {:?})",
                    stats.active_atoms,
                    diagnostics.last()
                ),
            });
        }
        let dual_gap = dual_update(ctx, &x_new)?;
        let prev_norm = x.norm();
        let relative_change = if prev_norm > 0.0 {
            x_new.distance(&x) / prev_norm
        } else {
            x_new.norm()
        };
        x = x_new;
        let seconds = start.elapsed().as_secs_f64();
        let alphas: Vec<Vec<f64>> = (0..x.len()).map(|i| gibbs.alpha(i)).collect();
        diagnostics.push(IterationRecord {
            iteration,
            relative_change,
            data_error: data_error(&x, y)?,
            dual_gap,
            psnr: setup.truth.map(|t| psnr(&x, t)).transpose()?,
            active_atoms: stats.active_atoms.iter().sum(),
            gini: mean_gini(alphas.iter().map(Vec::as_slice)),
            gamma_eps,
            seconds,
        });
        if relative_change < ctx.tolerance {
            converged = true;
            break;
        }
    }
    Ok(FrameOutput {
        image: x,
        diagnostics,
        converged,
    })
}
