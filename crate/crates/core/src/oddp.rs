//! Stick-breaking weights under an ordering, the tail-moment identities
//! `E(sum_{k>=N} p_k)^r` and `E sum_{k>=N} p_k^r`, and the truncation
//! error bound on the data marginal.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::geometry::Ordering;
use crate::math;

/// Stick-breaking fractions `V_i ~ Beta(1, alpha)`, all strictly in (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct StickState {
    pub v: Vec<f64>,
    pub alpha: f64,
}

impl StickState {
    pub fn new(v: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(CoreError::param("alpha", "must be finite and > 0"));
        }
        if v.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
            return Err(CoreError::param("V", "all fractions must lie strictly in (0,1)"));
        }
        Ok(StickState { v, alpha })
    }
}

/// First `k` ordered weights `p_i = V_{pi_i} prod_{j<i} (1 - V_{pi_j})`.
pub fn weights_for_ordering(stick: &StickState, ordering: &Ordering, k: usize) -> Result<Vec<f64>> {
    if k > ordering.len() {
        return Err(CoreError::OutOfBounds("k exceeds ordering length"));
    }
    if ordering.perm.iter().take(k).any(|&i| i >= stick.v.len()) {
        return Err(CoreError::OutOfBounds("ordering indexes past the stick"));
    }
    let mut weights = Vec::with_capacity(k);
    let mut remaining = 1.0;
    for &idx in ordering.perm.iter().take(k) {
        let v = stick.v[idx];
        weights.push(v * remaining);
        remaining *= 1.0 - v;
    }
    Ok(weights)
}

/// `E (sum_{k>=N} p_k)^r = (alpha/(alpha+r))^{N-1}`.
pub fn tail_moment_t(n_level: usize, r: usize, alpha: f64) -> Result<f64> {
    validate_tail_args(n_level, r, alpha)?;
    Ok(math::powi(alpha / (alpha + r as f64), n_level as i32 - 1))
}

/// `E sum_{k>=N} p_k^r = (alpha/(alpha+r))^{N-1} Gamma(r) Gamma(alpha+1) / Gamma(alpha+r)`.
///
/// The gamma ratio is evaluated in log space.
pub fn tail_moment_u(n_level: usize, r: usize, alpha: f64) -> Result<f64> {
    validate_tail_args(n_level, r, alpha)?;
    let rf = r as f64;
    let log_ratio = math::ln_gamma(rf) + math::ln_gamma(alpha + 1.0) - math::ln_gamma(alpha + rf);
    Ok(math::powi(alpha / (alpha + rf), n_level as i32 - 1) * math::exp(log_ratio))
}

fn validate_tail_args(n_level: usize, r: usize, alpha: f64) -> Result<()> {
    if n_level < 1 {
        return Err(CoreError::param("N", "must be >= 1"));
    }
    if r < 1 {
        return Err(CoreError::param("r", "must be >= 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CoreError::param("alpha", "must be finite and > 0"));
    }
    Ok(())
}

/// Inputs for the truncation error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBoundInput {
    /// Supremum bound on the kernel: `sup_theta K(x_i, theta) <= M`.
    pub kernel_sup_m: f64,
    /// Number of observations.
    pub n_obs: usize,
    pub alpha: f64,
    /// Truncation level (number of retained atoms).
    pub level_n: usize,
}

/// L1 bound on the truncated-vs-full data marginal:
/// `4 M^2 n (alpha/(alpha+2))^N + 2 sqrt(2/pi) M n (alpha/(alpha+1))^N`.
pub fn truncation_bound(input: &TruncationBoundInput) -> Result<f64> {
    let TruncationBoundInput {
        kernel_sup_m: m,
        n_obs,
        alpha,
        level_n,
    } = *input;
    if !(m > 0.0) {
        return Err(CoreError::param("M", "must be > 0"));
    }
    if n_obs < 1 {
        return Err(CoreError::param("n", "must be >= 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CoreError::param("alpha", "must be finite and > 0"));
    }
    if level_n < 1 {
        return Err(CoreError::param("N", "must be >= 1"));
    }
    let nf = n_obs as f64;
    let quad = 4.0 * m * m * nf * math::powi(alpha / (alpha + 2.0), level_n as i32);
    let lin = 2.0
        * math::sqrt(2.0 / core::f64::consts::PI)
        * m
        * nf
        * math::powi(alpha / (alpha + 1.0), level_n as i32);
    Ok(quad + lin)
}

/// Smallest truncation level whose bound is at or below `tolerance`.
pub fn smallest_n_for_bound(
    kernel_sup_m: f64,
    n_obs: usize,
    alpha: f64,
    tolerance: f64,
) -> Result<usize> {
    if !(tolerance > 0.0) {
        return Err(CoreError::param("tolerance", "must be > 0"));
    }
    let mut level_n = 1usize;
    loop {
        let b = truncation_bound(&TruncationBoundInput {
            kernel_sup_m,
            n_obs,
            alpha,
            level_n,
        })?;
        if b <= tolerance {
            return Ok(level_n);
        }
        level_n += 1;
    }
}
