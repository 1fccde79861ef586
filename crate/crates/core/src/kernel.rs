//! The nonstationary space-time kernel
//! `K(s,t,theta,tau) = exp{-1/2 (s-theta)' Sigma(s) (s-theta) - delta(t)|t-tau|}`,
//! the anisotropy construction `Sigma(s)^{1/2}`, and the Gaussian-process
//! bandwidth fields `psi1`, `psi2`, `log delta`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::geometry::SpaceTimePoint;
use crate::linalg::{self, Matrix};
use crate::math;

/// Fixed anisotropy amplitude constant.
pub const DEFAULT_A: f64 = 3.5;

/// Fixed field variances (both pinned to one).
pub const SIGMA2_PSI: f64 = 1.0;
pub const SIGMA2_DELTA: f64 = 1.0;

/// Kernel hyperparameters and field values at the data sites.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFieldParams {
    pub phi: f64,
    /// Anisotropy amplitude `A` (fixed at 3.5 in applications).
    pub a_aniso: f64,
    /// `psi1(s_i)` at the data locations.
    pub psi1: Vec<f64>,
    /// `psi2(s_i)` at the data locations.
    pub psi2: Vec<f64>,
    /// `log delta(t_i)` at the data times; `delta = exp(log_delta) > 0`.
    pub log_delta: Vec<f64>,
    pub tau: f64,
    pub b_psi: f64,
    pub a_delta: f64,
}

impl KernelFieldParams {
    /// Zero fields (the GP prior means) with the given scalars.
    pub fn with_zero_fields(n: usize, phi: f64, tau: f64, b_psi: f64, a_delta: f64) -> Self {
        KernelFieldParams {
            phi,
            a_aniso: DEFAULT_A,
            psi1: vec![0.0; n],
            psi2: vec![0.0; n],
            log_delta: vec![0.0; n],
            tau,
            b_psi,
            a_delta,
        }
    }

    pub fn delta_at(&self, i: usize) -> f64 {
        math::exp(self.log_delta[i])
    }
}

/// The 2x2 factor `Sigma(s)^{1/2}`; `Sigma(s) = m' m` is symmetric PSD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyMatrix {
    pub m: [[f64; 2]; 2],
}

impl AnisotropyMatrix {
    /// `Sigma(s) = m' m`.
    pub fn sigma(&self) -> [[f64; 2]; 2] {
        let m = &self.m;
        let s00 = m[0][0] * m[0][0] + m[1][0] * m[1][0];
        let s01 = m[0][0] * m[0][1] + m[1][0] * m[1][1];
        let s11 = m[0][1] * m[0][1] + m[1][1] * m[1][1];
        [[s00, s01], [s01, s11]]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Quadratic form `d' Sigma(s) d`.
    pub fn quad_form(&self, d: [f64; 2]) -> f64 {
        let s = self.sigma();
        d[0] * d[0] * s[0][0] + 2.0 * d[0] * d[1] * s[0][1] + d[1] * d[1] * s[1][1]
    }
}

/// Higdon-style anisotropy factor: principal bandwidths from `|psi(s)|^2`
/// rotated by `alpha(s) = atan2(psi2, psi1)` and scaled by `phi`.
///
/// At `psi1 = psi2 = 0` the rotation is the identity (`atan2(0,0) = 0`).
pub fn sigma_half(psi1_s: f64, psi2_s: f64, phi: f64, a_aniso: f64) -> AnisotropyMatrix {
    let norm2 = psi1_s * psi1_s + psi2_s * psi2_s;
    let pi = core::f64::consts::PI;
    let disc = math::sqrt(4.0 * a_aniso * a_aniso + norm2 * norm2 * pi * pi) / (2.0 * pi);
    let b1 = math::sqrt(disc + norm2 / 2.0);
    let b2 = math::sqrt(disc - norm2 / 2.0);
    let ang = math::atan2(psi2_s, psi1_s);
    let (sin_a, cos_a) = (libm::sin(ang), libm::cos(ang));
    AnisotropyMatrix {
        m: [
            [phi * b1 * cos_a, phi * b1 * sin_a],
            [-phi * b2 * sin_a, phi * b2 * cos_a],
        ],
    }
}

/// Kernel value in `(0, 1]`; equals one iff `s = theta` and `t = tau`.
pub fn kernel_eval(
    x: &SpaceTimePoint,
    theta: [f64; 2],
    tau: f64,
    sigma_half: &AnisotropyMatrix,
    delta_t: f64,
) -> f64 {
    let d = [x.s1 - theta[0], x.s2 - theta[1]];
    let quad = sigma_half.quad_form(d);
    math::exp(-0.5 * quad - delta_t * (x.t - tau).abs())
}

/// Squared-exponential GP covariance for the `psi` fields:
/// `c(s1,s2) = exp(-|s1-s2|^2 / b_psi)` with unit variance.
pub fn gp_covariance_psi(locations: &[[f64; 2]], b_psi: f64) -> Result<Matrix> {
    if !(b_psi > 0.0) {
        return Err(CoreError::param("b_psi", "must be > 0"));
    }
    let n = locations.len();
    Ok(Matrix::from_fn(n, n, |i, j| {
        let dx = locations[i][0] - locations[j][0];
        let dy = locations[i][1] - locations[j][1];
        SIGMA2_PSI * math::exp(-(dx * dx + dy * dy) / b_psi)
    }))
}

/// Squared-exponential GP covariance for `log delta`:
/// `c(t1,t2) = exp(-(t1-t2)^2 / a_delta)` with unit variance.
///
/// The exponent is negated relative to the growing form; a growing
/// exponential is not a valid covariance.
pub fn gp_covariance_delta(times: &[f64], a_delta: f64) -> Result<Matrix> {
    if !(a_delta > 0.0) {
        return Err(CoreError::param("a_delta", "must be > 0"));
    }
    let n = times.len();
    Ok(Matrix::from_fn(n, n, |i, j| {
        let dt = times[i] - times[j];
        SIGMA2_DELTA * math::exp(-dt * dt / a_delta)
    }))
}

/// Draw the three independent zero-mean field vectors at the data sites.
pub fn sample_fields<R: Rng + ?Sized>(
    locations: &[[f64; 2]],
    times: &[f64],
    b_psi: f64,
    a_delta: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let c_psi = linalg::cholesky(&gp_covariance_psi(locations, b_psi)?)?;
    let c_delta = linalg::cholesky(&gp_covariance_delta(times, a_delta)?)?;
    let draw = |chol: &linalg::Cholesky, rng: &mut R| -> Vec<f64> {
        let z: Vec<f64> = (0..chol.dim()).map(|_| rng.sample(StandardNormal)).collect();
        chol.lower_times(&z)
    };
    let psi1 = draw(&c_psi, rng);
    let psi2 = draw(&c_psi, rng);
    let log_delta = draw(&c_delta, rng);
    Ok((psi1, psi2, log_delta))
}
