//! The random function `f_k(x) = sum_i K(x, theta_{pi_i(x)}) p_i(x)`, the
//! Gaussian likelihood, all prior densities, and the joint log-posterior.
//!
//! Out-of-support parameter values are encoded as `-inf` log-density so a
//! Metropolis chain auto-rejects them.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{CoreError, Result};
use crate::geometry::{ordering_of_points, ComputationalBox, RelevantSet, SpaceTimePoint};
use crate::kernel::{self, KernelFieldParams};
use crate::linalg;
use crate::math;

const LN_2PI: f64 = 1.8378770664093453;

/// Lower and upper bound of the uniform prior on `phi`, `a_delta`, `b_psi`.
pub const UNIFORM_LO: f64 = 3.0;
pub const UNIFORM_HI: f64 = 200.0;

/// Variance of the vague normal prior on the regression coefficients.
pub const REGRESSION_PRIOR_VAR: f64 = 1e4;

/// Constant nugget added to the field-prior covariances before
/// factorization. It bounds the prior precision of the nearly-singular
/// smooth kernels and keeps the density continuous in the bandwidths.
pub const FIELD_PRIOR_NUGGET: f64 = 1e-8;

/// The transdimensional block: `k` atoms with stick fractions, point-process
/// locations, and kernel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableState {
    pub v: Vec<f64>,
    pub z: Vec<SpaceTimePoint>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
}

impl VariableState {
    pub fn k(&self) -> usize {
        self.v.len()
    }

    pub fn lengths_consistent(&self) -> bool {
        let k = self.v.len();
        self.z.len() == k && self.theta1.len() == k && self.theta2.len() == k
    }
}

/// Regression intercept and slope for the covariate mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionCoeffs {
    pub alpha0: f64,
    pub alpha1: f64,
}

/// The fixed-dimension block: kernel hyperparameters and fields plus the
/// ODDP concentration, intensity, and noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedState {
    pub kernel: KernelFieldParams,
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub regression: Option<RegressionCoeffs>,
}

/// Observed points, responses, and the optional covariate column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<SpaceTimePoint>,
    pub y: Vec<f64>,
    pub covariate: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        points: Vec<SpaceTimePoint>,
        y: Vec<f64>,
        covariate: Option<Vec<f64>>,
    ) -> Result<Self> {
        if points.len() != y.len() {
            return Err(CoreError::LengthMismatch("points/y"));
        }
        if let Some(c) = &covariate {
            if c.len() != y.len() {
                return Err(CoreError::LengthMismatch("covariate/y"));
            }
        }
        if points.iter().any(|p| !p.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::param("dataset", "non-finite entries"));
        }
        Ok(Dataset {
            points,
            y,
            covariate,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn locations(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.s1, p.s2]).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }
}

/// Everything the priors need beyond the parameter values themselves.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    pub k_max: usize,
    /// Prior median of `alpha`.
    pub n0: f64,
    /// Shape of the inverted-beta prior on `alpha`.
    pub eta: f64,
    /// Log-variance of the log-normal prior on `lambda`.
    pub b_lambda: f64,
    /// Correlation of the bivariate-normal centering distribution.
    pub rho: f64,
    /// Support of the point-process locations.
    pub region: ComputationalBox,
    /// Data locations (the `psi` field prior lives here).
    pub locations: Vec<[f64; 2]>,
    /// Data times (the `log delta` field prior lives here).
    pub times: Vec<f64>,
}

/// Evaluate `f_k` at `x` given explicit field values at `x`.
///
/// Atoms whose point-process location falls outside the space-time relevant
/// set of `x` receive no weight; with no eligible atom the value is zero.
pub fn f_eval_with_fields(
    x: &SpaceTimePoint,
    var: &VariableState,
    phi: f64,
    a_aniso: f64,
    tau: f64,
    psi1_x: f64,
    psi2_x: f64,
    delta_x: f64,
) -> f64 {
    let ordering = ordering_of_points(x, &var.z, RelevantSet::SpaceTime);
    if ordering.is_empty() {
        return 0.0;
    }
    let sh = kernel::sigma_half(psi1_x, psi2_x, phi, a_aniso);
    // the temporal kernel factor is atom-independent and factors out
    let temporal = math::exp(-delta_x * (x.t - tau).abs());
    let mut total = 0.0;
    let mut remaining = 1.0;
    for &idx in &ordering.perm {
        let quad = sh.quad_form([x.s1 - var.theta1[idx], x.s2 - var.theta2[idx]]);
        let w = var.v[idx] * remaining;
        total += w * math::exp(-0.5 * quad);
        remaining *= 1.0 - var.v[idx];
    }
    total * temporal
}

/// Evaluate `f_k` at data site `i`, reading the field values stored in the
/// fixed block.
pub fn f_eval_at_site(
    site: usize,
    data: &Dataset,
    var: &VariableState,
    fixed: &FixedState,
) -> f64 {
    let kp = &fixed.kernel;
    f_eval_with_fields(
        &data.points[site],
        var,
        kp.phi,
        kp.a_aniso,
        kp.tau,
        kp.psi1[site],
        kp.psi2[site],
        kp.delta_at(site),
    )
}

/// Gaussian log-likelihood given precomputed `f` values.
///
/// In regression mode the mean is `alpha0 + alpha1 x_i + f_i`, with `y` and
/// the covariate already on the log scale.
pub fn log_likelihood(
    data: &Dataset,
    f_values: &[f64],
    sigma: f64,
    regression: Option<RegressionCoeffs>,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(CoreError::param("sigma", "must be > 0"));
    }
    if f_values.len() != data.len() {
        return Err(CoreError::LengthMismatch("f_values/data"));
    }
    if regression.is_some() && data.covariate.is_none() {
        return Err(CoreError::param("regression", "dataset has no covariate"));
    }
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let log_norm = -0.5 * LN_2PI - math::ln(sigma);
    let mut total = 0.0;
    for i in 0..data.len() {
        let mut mean = f_values[i];
        if let Some(r) = regression {
            mean += r.alpha0 + r.alpha1 * data.covariate.as_ref().unwrap()[i];
        }
        let resid = data.y[i] - mean;
        total += log_norm - resid * resid * inv2s2;
    }
    Ok(total)
}

/// Log-density of the inverted-beta prior on `alpha`:
/// `n0^eta Gamma(2 eta) alpha^{eta-1} / (Gamma(eta)^2 (alpha+n0)^{2 eta})`.
pub fn log_prior_alpha(alpha: f64, n0: f64, eta: f64) -> f64 {
    if !(alpha > 0.0) {
        return f64::NEG_INFINITY;
    }
    eta * math::ln(n0) + math::ln_gamma(2.0 * eta) - 2.0 * math::ln_gamma(eta)
        + (eta - 1.0) * math::ln(alpha)
        - 2.0 * eta * math::ln(alpha + n0)
}

/// Log-normal prior on `lambda` with location `log(alpha)` and variance
/// `b_lambda`.
pub fn log_prior_lambda(lambda: f64, alpha: f64, b_lambda: f64) -> f64 {
    if !(lambda > 0.0 && alpha > 0.0) {
        return f64::NEG_INFINITY;
    }
    let d = math::ln(lambda) - math::ln(alpha);
    -math::ln(lambda) - 0.5 * math::ln(2.0 * core::f64::consts::PI * b_lambda)
        - d * d / (2.0 * b_lambda)
}

fn log_std_normal(x: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * x * x
}

fn log_lognormal_standard(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    let lx = math::ln(x);
    -lx - 0.5 * LN_2PI - 0.5 * lx * lx
}

fn log_bvn(theta1: f64, theta2: f64, rho: f64) -> f64 {
    let om = 1.0 - rho * rho;
    -LN_2PI - 0.5 * math::ln(om)
        - (theta1 * theta1 - 2.0 * rho * theta1 * theta2 + theta2 * theta2) / (2.0 * om)
}

/// Sum of every component log-prior; `-inf` whenever any parameter leaves
/// its support.
pub fn log_prior_all(var: &VariableState, fixed: &FixedState, spec: &PriorSpec) -> f64 {
    let k = var.k();
    if k < 1 || k > spec.k_max || !var.lengths_consistent() {
        return f64::NEG_INFINITY;
    }
    let alpha = fixed.alpha;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let kp = &fixed.kernel;
    for u in [kp.phi, kp.a_delta, kp.b_psi] {
        if !(u > UNIFORM_LO && u < UNIFORM_HI) {
            return f64::NEG_INFINITY;
        }
    }
    if !(fixed.sigma > 0.0) || !(fixed.lambda > 0.0) {
        return f64::NEG_INFINITY;
    }

    let mut total = 0.0;

    // discrete uniform prior on k
    total -= math::ln(spec.k_max as f64);

    // stick fractions: Beta(1, alpha)
    let ln_alpha = math::ln(alpha);
    for &v in &var.v {
        if !(v > 0.0 && v < 1.0) {
            return f64::NEG_INFINITY;
        }
        total += ln_alpha + (alpha - 1.0) * math::ln(1.0 - v);
    }

    // point-process locations: independent uniform over the region
    let mut log_box = 0.0;
    for d in 0..spec.region.dim() {
        log_box += math::ln(spec.region.width(d));
    }
    for z in &var.z {
        if !spec.region.contains(z) {
            return f64::NEG_INFINITY;
        }
        total -= log_box;
    }

    // kernel centers: bivariate normal with correlation rho
    for i in 0..k {
        total += log_bvn(var.theta1[i], var.theta2[i], spec.rho);
    }

    // uniform(3,200) on phi, a_delta, b_psi
    total -= 3.0 * math::ln(UNIFORM_HI - UNIFORM_LO);

    // tau, sigma, alpha, lambda
    total += log_std_normal(kp.tau);
    total += log_lognormal_standard(fixed.sigma);
    total += log_prior_alpha(alpha, spec.n0, spec.eta);
    total += log_prior_lambda(fixed.lambda, alpha, spec.b_lambda);

    // bandwidth fields: zero-mean GPs at the data sites
    let nugget = |mut m: linalg::Matrix| {
        for i in 0..m.rows {
            m[(i, i)] += FIELD_PRIOR_NUGGET;
        }
        m
    };
    let c_psi = match kernel::gp_covariance_psi(&spec.locations, kp.b_psi)
        .map(nugget)
        .and_then(|m| linalg::cholesky_pd(&m))
    {
        Ok(c) => c,
        Err(_) => return f64::NEG_INFINITY,
    };
    let c_delta = match kernel::gp_covariance_delta(&spec.times, kp.a_delta)
        .map(nugget)
        .and_then(|m| linalg::cholesky_pd(&m))
    {
        Ok(c) => c,
        Err(_) => return f64::NEG_INFINITY,
    };
    total += linalg::mvn_logpdf_centered(&c_psi, &kp.psi1);
    total += linalg::mvn_logpdf_centered(&c_psi, &kp.psi2);
    total += linalg::mvn_logpdf_centered(&c_delta, &kp.log_delta);

    if let Some(r) = fixed.regression {
        total += -0.5 * math::ln(2.0 * core::f64::consts::PI * REGRESSION_PRIOR_VAR)
            - r.alpha0 * r.alpha0 / (2.0 * REGRESSION_PRIOR_VAR);
        total += -0.5 * math::ln(2.0 * core::f64::consts::PI * REGRESSION_PRIOR_VAR)
            - r.alpha1 * r.alpha1 / (2.0 * REGRESSION_PRIOR_VAR);
    }

    if !total.is_finite() {
        return f64::NEG_INFINITY;
    }
    total
}

/// Joint log-posterior: prior plus likelihood with `f_k` evaluated at every
/// data site. Propagates `-inf`.
pub fn log_posterior(
    var: &VariableState,
    fixed: &FixedState,
    data: &Dataset,
    spec: &PriorSpec,
) -> f64 {
    let prior = log_prior_all(var, fixed, spec);
    if prior == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let f_values: Vec<f64> = (0..data.len())
        .map(|i| f_eval_at_site(i, data, var, fixed))
        .collect();
    match log_likelihood(data, &f_values, fixed.sigma, fixed.regression) {
        Ok(ll) => {
            let lp = prior + ll;
            if lp.is_finite() {
                lp
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Draw `(alpha, lambda)` then a full in-support state from the prior.
pub fn sample_prior_state<R: Rng + ?Sized>(
    spec: &PriorSpec,
    data: &Dataset,
    k: usize,
    rng: &mut R,
) -> Result<(VariableState, FixedState)> {
    let eta_beta = Beta::new(spec.eta, spec.eta)
        .map_err(|_| CoreError::param("eta", "not a valid Beta shape"))?;
    let u: f64 = eta_beta.sample(rng);
    // alpha/(alpha+n0) ~ Beta(eta, eta), clamped away from the endpoints
    let u = u.clamp(1e-12, 1.0 - 1e-12);
    let alpha = spec.n0 * u / (1.0 - u);
    let z_norm: f64 = rng.sample(StandardNormal);
    let lambda = math::exp(math::ln(alpha) + math::sqrt(spec.b_lambda) * z_norm);

    let phi = rng.gen_range(UNIFORM_LO..UNIFORM_HI);
    let a_delta = rng.gen_range(UNIFORM_LO..UNIFORM_HI);
    let b_psi = rng.gen_range(UNIFORM_LO..UNIFORM_HI);
    let tau: f64 = rng.sample(StandardNormal);
    let sig_z: f64 = rng.sample(StandardNormal);
    let sigma = math::exp(sig_z);

    let (psi1, psi2, log_delta) =
        kernel::sample_fields(&spec.locations, &spec.times, b_psi, a_delta, rng)?;

    let beta_v = Beta::new(1.0, alpha)
        .map_err(|_| CoreError::param("alpha", "not a valid Beta shape"))?;
    let mut v = Vec::with_capacity(k);
    for _ in 0..k {
        let x: f64 = beta_v.sample(rng);
        v.push(x.clamp(1e-12, 1.0 - 1e-12));
    }

    let dim = spec.region.dim();
    let z: Vec<SpaceTimePoint> = (0..k)
        .map(|_| {
            let mut c = [0.0f64; 3];
            for d in 0..dim {
                c[d] = rng.gen_range(spec.region.lower[d]..spec.region.upper[d]);
            }
            SpaceTimePoint::new(c[0], c[1], c[2])
        })
        .collect();

    // bivariate normal with correlation rho
    let mut theta1 = Vec::with_capacity(k);
    let mut theta2 = Vec::with_capacity(k);
    let rho_c = math::sqrt(1.0 - spec.rho * spec.rho);
    for _ in 0..k {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        theta1.push(z1);
        theta2.push(spec.rho * z1 + rho_c * z2);
    }

    let regression = data.covariate.as_ref().map(|_| RegressionCoeffs {
        alpha0: math::sqrt(REGRESSION_PRIOR_VAR) * rng.sample::<f64, _>(StandardNormal),
        alpha1: math::sqrt(REGRESSION_PRIOR_VAR) * rng.sample::<f64, _>(StandardNormal),
    });

    let var = VariableState {
        v,
        z,
        theta1,
        theta2,
    };
    let fixed = FixedState {
        kernel: KernelFieldParams {
            phi,
            a_aniso: kernel::DEFAULT_A,
            psi1,
            psi2,
            log_delta,
            tau,
            b_psi,
            a_delta,
        },
        alpha,
        lambda,
        sigma,
        regression,
    };
    Ok((var, fixed))
}

/// Empirical correlation between the two scaled spatial coordinate columns,
/// used to pin the centering distribution's `rho`.
pub fn empirical_rho(points: &[SpaceTimePoint]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let m1 = points.iter().map(|p| p.s1).sum::<f64>() / nf;
    let m2 = points.iter().map(|p| p.s2).sum::<f64>() / nf;
    let mut c11 = 0.0;
    let mut c22 = 0.0;
    let mut c12 = 0.0;
    for p in points {
        c11 += (p.s1 - m1) * (p.s1 - m1);
        c22 += (p.s2 - m2) * (p.s2 - m2);
        c12 += (p.s1 - m1) * (p.s2 - m2);
    }
    if c11 <= 0.0 || c22 <= 0.0 {
        return 0.0;
    }
    let rho = c12 / math::sqrt(c11 * c22);
    rho.clamp(-0.999, 0.999)
}
