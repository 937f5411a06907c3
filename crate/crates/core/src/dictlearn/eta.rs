//! Draws of the atom-level beta-process mean `η_k` given its `π*` column.
//!
//! With `c₁ = 1` the beta normalizer `Γ(η)Γ(1−η)` equals `π / sin(πη)`, so
//! after introducing uniform slice variables for the prior factors and for
//! `sinᴺ(πη)` the remaining conditional is an exponential density truncated
//! to an interval. Other `c₁` use a univariate stepping-out slice sampler on
//! the exact log density.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::draw::{self, PROB_FLOOR};
use super::state::HyperParams;

/// Sufficient statistics of one `π*` column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaStats {
    pub rows: usize,
    pub sum_log: f64,
    pub sum_log1m: f64,
}

impl EtaStats {
    pub fn from_column(pi_star: &[f64]) -> Self {
        let mut stats = EtaStats {
            rows: pi_star.len(),
            sum_log: 0.0,
            sum_log1m: 0.0,
        };
        for &p in pi_star {
            let p = draw::clip_prob(p);
            stats.sum_log += p.ln();
            stats.sum_log1m += (-p).ln_1p();
        }
        stats
    }
}

/// Unnormalized log posterior of `η` (exact for any `c₁`).
pub fn log_density(eta: f64, stats: &EtaStats, params: &HyperParams) -> f64 {
    if !(eta > 0.0 && eta < 1.0) {
        return f64::NEG_INFINITY;
    }
    let a = params.c0 * params.eta0;
    let b = params.c0 * (1.0 - params.eta0);
    let c1 = params.c1;
    let n = stats.rows as f64;
    (a - 1.0) * eta.ln() + (b - 1.0) * (-eta).ln_1p()
        - n * (ln_gamma(c1 * eta) + ln_gamma(c1 * (1.0 - eta)))
        + c1 * eta * stats.sum_log
        + c1 * (1.0 - eta) * stats.sum_log1m
}

/// One transition from `current`. `None` when floating-point error leaves
/// the slice interval empty; the caller keeps the previous value.
pub fn sample(
    rng: &mut impl Rng,
    current: f64,
    stats: &EtaStats,
    params: &HyperParams,
) -> Option<f64> {
    if stats.rows == 0 {
        return Some(current);
    }
    let current = current.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    if params.c1 == 1.0 {
        slice_truncated_exp(rng, current, stats, params)
    } else {
        stepping_out(rng, current, stats, params)
    }
}

fn ln_uniform(rng: &mut impl Rng) -> f64 {
    // U in (0, 1]
    (1.0 - rng.random::<f64>()).ln()
}

fn slice_truncated_exp(
    rng: &mut impl Rng,
    eta: f64,
    stats: &EtaStats,
    params: &HyperParams,
) -> Option<f64> {
    let am1 = params.c0 * params.eta0 - 1.0;
    let bm1 = params.c0 * (1.0 - params.eta0) - 1.0;
    let n = stats.rows as f64;
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;

    // u ~ U(0, η^{a−1})
    let ln_u = am1 * eta.ln() + ln_uniform(rng);
    if am1 > 0.0 {
        lo = lo.max((ln_u / am1).exp());
    } else if am1 < 0.0 {
        hi = hi.min((ln_u / am1).exp());
    }
    // v ~ U(0, (1−η)^{b−1})
    let ln_v = bm1 * (-eta).ln_1p() + ln_uniform(rng);
    if bm1 > 0.0 {
        hi = hi.min(1.0 - (ln_v / bm1).exp());
    } else if bm1 < 0.0 {
        lo = lo.max(1.0 - (ln_v / bm1).exp());
    }
    // w ~ U(0, sinᴺ(πη))
    let ln_sin = (std::f64::consts::PI * eta).sin().ln();
    let s_min = ((n * ln_sin + ln_uniform(rng)) / n).exp().min(1.0);
    let edge = s_min.asin() / std::f64::consts::PI;
    lo = lo.max(edge);
    hi = hi.min(1.0 - edge);

    lo = lo.max(PROB_FLOOR);
    hi = hi.min(1.0 - PROB_FLOOR);
    if !(lo < hi) {
        return None;
    }
    let rate = params.c1 * (stats.sum_log - stats.sum_log1m);
    Some(draw::truncated_exp(rng, rate, lo, hi))
}

fn stepping_out(
    rng: &mut impl Rng,
    eta: f64,
    stats: &EtaStats,
    params: &HyperParams,
) -> Option<f64> {
    const WIDTH: f64 = 0.1;
    const MAX_STEPS: usize = 64;
    let f0 = log_density(eta, stats, params);
    if !f0.is_finite() {
        return None;
    }
    let level = f0 + ln_uniform(rng);
    let mut lo = eta - WIDTH * rng.random::<f64>();
    let mut hi = lo + WIDTH;
    let mut steps = 0;
    while lo > 0.0 && steps < MAX_STEPS && log_density(lo, stats, params) > level {
        lo -= WIDTH;
        steps += 1;
    }
    steps = 0;
    while hi < 1.0 && steps < MAX_STEPS && log_density(hi, stats, params) > level {
        hi += WIDTH;
        steps += 1;
    }
    lo = lo.max(0.0);
    hi = hi.min(1.0);
    for _ in 0..200 {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if log_density(x, stats, params) > level {
            return Some(x.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR));
        }
        if x < eta {
            lo = x;
        } else {
            hi = x;
        }
    }
    None
}
