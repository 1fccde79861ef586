//! Shared fitting plumbing: prior specification from a loaded dataset,
//! chain initialization, multi-chain runs, and posterior predictive draws
//! at new sites (with Gaussian conditioning of the bandwidth fields).

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use kcoddp_core::geometry::{computational_region, SpaceTimePoint};
use kcoddp_core::kernel::{gp_covariance_delta, gp_covariance_psi};
use kcoddp_core::model::{
    empirical_rho, f_eval_with_fields, sample_prior_state, Dataset, FixedState, PriorSpec,
    RegressionCoeffs, VariableState,
};
use kcoddp_core::rng::{derive_stream, Stream};
use kcoddp_core::synthgen::{gp_conditional, GaussianSpec};
use kcoddp_core::ttmcmc::{model_state_from_row, run_model_chain, ArchiveRow, SampleArchive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::RunConfig;
use crate::dataset::LoadedDataset;

/// Stream-id blocks so concurrent work never shares an RNG stream.
pub const STREAM_CHAIN_BASE: u64 = 100;
pub const STREAM_LOO_BASE: u64 = 1_000;
pub const STREAM_PREDICT: u64 = 5_000;
pub const STREAM_CORR: u64 = 6_000;

/// Prior specification for a fit on `data` (which may be a fold subset),
/// with the region and centering correlation pinned from the full dataset.
pub fn build_prior_spec(full: &LoadedDataset, data: &Dataset, cfg: &RunConfig) -> Result<PriorSpec> {
    let pts = &full.dataset.points;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        let c = p.coords();
        for d in 0..3 {
            lo[d] = lo[d].min(c[d]);
            hi[d] = hi[d].max(c[d]);
        }
    }
    let region = computational_region(&lo, &hi, cfg.region_alpha, cfg.region_lambda, cfg.epsilon)?;
    Ok(PriorSpec {
        k_max: cfg.k_max,
        n0: cfg.n0,
        eta: cfg.eta,
        b_lambda: cfg.b_lambda,
        rho: empirical_rho(pts),
        region,
        locations: data.locations(),
        times: data.times(),
    })
}

/// Initial chain state: atoms, centers, and fields drawn from the prior;
/// the heavy-tailed scalars pinned at moderate values so the chain starts
/// from a numerically benign in-support point. The stick fractions are
/// redrawn under the pinned concentration and kept off the `V = 1`
/// boundary, where additive moves on `log V` would be stuck rejecting.
pub fn initial_state(
    spec: &PriorSpec,
    data: &Dataset,
    cfg: &RunConfig,
    rng: &mut Stream,
) -> Result<(VariableState, FixedState)> {
    let (mut var, mut fixed) = sample_prior_state(spec, data, cfg.k_init, rng)?;
    fixed.alpha = cfg.n0;
    fixed.lambda = cfg.region_lambda;
    fixed.sigma = 1.0;
    fixed.kernel.phi = 5.0;
    fixed.kernel.b_psi = 20.0;
    fixed.kernel.a_delta = 20.0;
    fixed.kernel.tau = 0.0;
    if fixed.regression.is_some() {
        fixed.regression = Some(RegressionCoeffs {
            alpha0: 0.0,
            alpha1: 0.0,
        });
    }
    let beta = rand_distr::Beta::new(1.0, fixed.alpha)
        .map_err(|_| anyhow!("invalid concentration for the initial stick"))?;
    for v in &mut var.v {
        let draw: f64 = beta.sample(rng);
        *v = draw.clamp(1e-6, 0.99);
    }
    Ok((var, fixed))
}

/// Run `cfg.chains` independent chains on `data`, one derived stream each.
pub fn fit_chains(
    full: &LoadedDataset,
    data: &Dataset,
    cfg: &RunConfig,
) -> Result<Vec<SampleArchive>> {
    let spec = build_prior_spec(full, data, cfg)?;
    (0..cfg.chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = derive_stream(cfg.seed, STREAM_CHAIN_BASE + chain as u64);
            let (var, fixed) = initial_state(&spec, data, cfg, &mut rng)?;
            run_model_chain(
                data,
                &spec,
                &cfg.scales,
                cfg.weights,
                &var,
                &fixed,
                cfg.n_iter,
                cfg.burn_in,
                cfg.thin,
                &mut rng,
            )
            .with_context(|| format!("chain {chain}"))
        })
        .collect()
}

/// Condition a unit-variance squared-exponential field at one new site
/// given its values at the training sites, and draw from the conditional.
fn draw_conditioned_scalar(
    joint: &GaussianSpec,
    observed: &[f64],
    rng: &mut Stream,
) -> Result<f64> {
    let cond = gp_conditional(joint, observed)?;
    let sd = cond.cov[(0, 0)].max(0.0).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    Ok(cond.mean[0] + sd * z)
}

/// One posterior predictive draw of `y(x0)` from one archived state.
///
/// The bandwidth fields are GP-conditioned from the training sites to the
/// new site, the convolution is evaluated there, and Gaussian noise is
/// added.
pub fn predictive_draw(
    row: &ArchiveRow,
    train: &Dataset,
    x0: &SpaceTimePoint,
    covariate0: Option<f64>,
    rng: &mut Stream,
) -> Result<f64> {
    let n = train.len();
    let regression = train.covariate.is_some();
    let (var, fixed) = model_state_from_row(row, n, regression);
    let kp = &fixed.kernel;

    // psi1/psi2 share the spatial covariance with the new site first
    let mut locs = Vec::with_capacity(n + 1);
    locs.push([x0.s1, x0.s2]);
    locs.extend(train.locations());
    let cov_psi = gp_covariance_psi(&locs, kp.b_psi)?;
    let joint_psi = GaussianSpec::new(vec![0.0; n + 1], cov_psi)?;
    let psi1_0 = draw_conditioned_scalar(&joint_psi, &kp.psi1, rng)?;
    let psi2_0 = draw_conditioned_scalar(&joint_psi, &kp.psi2, rng)?;

    let mut times = Vec::with_capacity(n + 1);
    times.push(x0.t);
    times.extend(train.times());
    let cov_delta = gp_covariance_delta(&times, kp.a_delta)?;
    let joint_delta = GaussianSpec::new(vec![0.0; n + 1], cov_delta)?;
    let log_delta_0 = draw_conditioned_scalar(&joint_delta, &kp.log_delta, rng)?;

    let f = f_eval_with_fields(
        x0,
        &var,
        kp.phi,
        kp.a_aniso,
        kp.tau,
        psi1_0,
        psi2_0,
        log_delta_0.exp(),
    );
    let mut mean = f;
    if let Some(r) = fixed.regression {
        let c0 = covariate0
            .ok_or_else(|| anyhow!("regression mode needs the covariate at the new site"))?;
        mean += r.alpha0 + r.alpha1 * c0;
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + fixed.sigma * z)
}

/// Predictive draws at `x0` across all archived rows.
pub fn predictive_draws(
    rows: &[ArchiveRow],
    train: &Dataset,
    x0: &SpaceTimePoint,
    covariate0: Option<f64>,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    rows.iter()
        .map(|row| predictive_draw(row, train, x0, covariate0, rng))
        .collect()
}
