//! Multivariate-normal utilities (sampling, conditioning) and the
//! nonstationary non-Gaussian synthetic data generator: a stationary
//! Gaussian process is conditioned on a handful of held-out draws to make
//! it nonstationary, then fed through an exponential-of-absolute-difference
//! covariance to break Gaussianity.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::geometry::SpaceTimePoint;
use crate::linalg::{self, Matrix};
use crate::math;
use crate::model::Dataset;
use crate::rng::derive_stream;

/// Mean vector plus symmetric positive-semidefinite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if cov.rows != mean.len() || !cov.is_square() {
            return Err(CoreError::LengthMismatch("mean/cov dimensions"));
        }
        if cov.asymmetry() > 1e-12 {
            return Err(CoreError::param("cov", "must be symmetric to 1e-12"));
        }
        Ok(GaussianSpec { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// One draw with the specified first two moments (Cholesky factor times a
/// standard-normal vector; zero covariance returns the mean exactly).
pub fn mvn_sample<R: Rng + ?Sized>(spec: &GaussianSpec, rng: &mut R) -> Result<Vec<f64>> {
    let chol = linalg::cholesky(&spec.cov)?;
    let z: Vec<f64> = (0..spec.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let lz = chol.lower_times(&z);
    Ok(spec.mean.iter().zip(lz).map(|(m, v)| m + v).collect())
}

/// Condition a partitioned Gaussian on its trailing block.
///
/// The joint is ordered `[target block, observed block]`; `observed` holds
/// the realized values of the trailing block. Returns the conditional of
/// the leading block: mean `mu_1 + A_12 A_22^{-1} (x - mu_2)`, covariance
/// `A_11 - A_12 A_22^{-1} A_21`.
pub fn gp_conditional(joint: &GaussianSpec, observed: &[f64]) -> Result<GaussianSpec> {
    let n = joint.dim();
    let m = observed.len();
    if m > n {
        return Err(CoreError::LengthMismatch("observed block larger than joint"));
    }
    let p = n - m;
    let target_idx: Vec<usize> = (0..p).collect();
    let obs_idx: Vec<usize> = (p..n).collect();
    let a11 = joint.cov.submatrix(&target_idx, &target_idx);
    let a12 = joint.cov.submatrix(&target_idx, &obs_idx);
    let a22 = joint.cov.submatrix(&obs_idx, &obs_idx);
    let chol22 = linalg::cholesky_pd(&a22)?;

    let resid: Vec<f64> = (0..m).map(|j| observed[j] - joint.mean[p + j]).collect();
    let w = chol22.solve(&resid);
    let mut mean = vec![0.0; p];
    for i in 0..p {
        let mut s = joint.mean[i];
        for j in 0..m {
            s += a12[(i, j)] * w[j];
        }
        mean[i] = s;
    }
    // subtract A_12 A_22^{-1} A_21 column by column
    let mut cov = a11;
    for i in 0..p {
        let row_i: Vec<f64> = (0..m).map(|j| a12[(i, j)]).collect();
        let x = chol22.solve(&row_i);
        for l in 0..p {
            let mut s = 0.0;
            for j in 0..m {
                s += a12[(l, j)] * x[j];
            }
            cov[(l, i)] -= s;
        }
    }
    // symmetrize away the solve round-off
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = avg;
            cov[(j, i)] = avg;
        }
    }
    GaussianSpec::new(mean, cov)
}

/// Baseline covariance of the generating process:
/// `exp(-0.5 sqrt(dt^2 + ds1^2 + ds2^2))`, unit diagonal.
fn base_cov(times: &[f64], locs: &[[f64; 2]]) -> Matrix {
    let n = times.len();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let d = math::hypot3(
                times[i] - times[j],
                locs[i][0] - locs[j][0],
                locs[i][1] - locs[j][1],
            );
            math::exp(-0.5 * d)
        }
    })
}

fn design_mean(times: &[f64], locs: &[[f64; 2]], beta: [f64; 3]) -> Vec<f64> {
    times
        .iter()
        .zip(locs)
        .map(|(t, s)| beta[0] * t + beta[1] * s[0] + beta[2] * s[1])
        .collect()
}

/// Generate the synthetic nonstationary non-Gaussian dataset.
///
/// Pipeline: stratified times (one per unit interval), uniform locations
/// on a square, hold out `n_holdout` design points, draw the held-out
/// block from its marginal, draw the kept block conditionally, then draw
/// the response with mean `0.01 x` and covariance
/// `exp(-0.5 |x_i - x_j|)` off the unit diagonal.
pub fn generate_synthetic(
    seed: u64,
    n_grid: usize,
    n_holdout: usize,
    box_side: f64,
    beta: [f64; 3],
) -> Result<Dataset> {
    if n_holdout >= n_grid {
        return Err(CoreError::param("n_holdout", "must be < n_grid"));
    }
    if !(box_side > 0.0) {
        return Err(CoreError::param("box_side", "must be > 0"));
    }
    let mut rng = derive_stream(seed, 0);

    // one time point per unit interval (i-1, i]
    let times: Vec<f64> = (0..n_grid)
        .map(|i| i as f64 + rng.gen_range(0.0..1.0f64))
        .collect();
    let locs: Vec<[f64; 2]> = (0..n_grid)
        .map(|_| [rng.gen_range(0.0..box_side), rng.gen_range(0.0..box_side)])
        .collect();

    let held: Vec<usize> = {
        let mut idx = sample_indices(&mut rng, n_grid, n_holdout).into_vec();
        idx.sort_unstable();
        idx
    };
    let kept: Vec<usize> = (0..n_grid).filter(|i| !held.contains(i)).collect();

    // joint ordered [kept block, held-out block] for conditioning
    let order: Vec<usize> = kept.iter().chain(held.iter()).copied().collect();
    let times_ord: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let locs_ord: Vec<[f64; 2]> = order.iter().map(|&i| locs[i]).collect();

    let cov = base_cov(&times_ord, &locs_ord);
    let mean = design_mean(&times_ord, &locs_ord, beta);
    let n_kept = kept.len();

    let held_idx: Vec<usize> = (n_kept..n_grid).collect();
    let held_spec = GaussianSpec::new(
        mean[n_kept..].to_vec(),
        cov.submatrix(&held_idx, &held_idx),
    )?;
    let x_held = mvn_sample(&held_spec, &mut rng)?;

    let joint = GaussianSpec::new(mean, cov)?;
    let cond = gp_conditional(&joint, &x_held)?;
    let x_kept = mvn_sample(&cond, &mut rng)?;

    // response layer: mean 0.01 x, exp-abs-difference covariance
    let y_mean: Vec<f64> = x_kept.iter().map(|x| 0.01 * x).collect();
    let y_cov = Matrix::from_fn(n_kept, n_kept, |i, j| {
        if i == j {
            1.0
        } else {
            math::exp(-0.5 * (x_kept[i] - x_kept[j]).abs())
        }
    });
    let y = mvn_sample(&GaussianSpec::new(y_mean, y_cov)?, &mut rng)?;

    let points: Vec<SpaceTimePoint> = kept
        .iter()
        .map(|&i| SpaceTimePoint::new(locs[i][0], locs[i][1], times[i]))
        .collect();
    Dataset::new(points, y, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mvn_identity_moments() {
        let spec = GaussianSpec::new(vec![0.0; 3], Matrix::identity(3)).unwrap();
        let mut rng = derive_stream(31, 0);
        let n_rep = 10_000usize;
        let mut mean = [0.0f64; 3];
        let mut var = [0.0f64; 3];
        for _ in 0..n_rep {
            let x = mvn_sample(&spec, &mut rng).unwrap();
            for i in 0..3 {
                mean[i] += x[i];
                var[i] += x[i] * x[i];
            }
        }
        let nf = n_rep as f64;
        for i in 0..3 {
            assert!((mean[i] / nf).abs() < 3.0 / nf.sqrt());
            assert!((var[i] / nf - 1.0).abs() < 3.0 * (2.0f64 / nf).sqrt());
        }
    }

    #[test]
    fn mvn_zero_cov_returns_mean_exactly() {
        let spec = GaussianSpec::new(vec![1.5, -2.0], Matrix::zeros(2, 2)).unwrap();
        let mut rng = derive_stream(32, 0);
        assert_eq!(mvn_sample(&spec, &mut rng).unwrap(), vec![1.5, -2.0]);
    }

    fn random_spd(n: usize, rng: &mut impl Rng) -> Matrix {
        let b = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut a = b.matmul(&b.transpose());
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    #[test]
    fn mvn_covariance_matches_spec() {
        let mut rng = derive_stream(33, 0);
        let cov = random_spd(5, &mut rng);
        let spec = GaussianSpec::new(vec![0.0; 5], cov.clone()).unwrap();
        let n_rep = 100_000usize;
        let mut acc = Matrix::zeros(5, 5);
        for _ in 0..n_rep {
            let x = mvn_sample(&spec, &mut rng).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    acc[(i, j)] += x[i] * x[j];
                }
            }
        }
        let nf = n_rep as f64;
        for i in 0..5 {
            for j in 0..5 {
                let est = acc[(i, j)] / nf;
                let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)] * cov[(i, j)]) / nf).sqrt();
                assert!(
                    (est - cov[(i, j)]).abs() < 3.5 * se,
                    "cov[{i}{j}]: {est} vs {}",
                    cov[(i, j)]
                );
            }
        }
    }

    /// Independent oracle: dense Gauss-Jordan inverse.
    fn invert(a: &Matrix) -> Matrix {
        let n = a.rows;
        let mut aug = Matrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = a[(i, j)];
            }
            aug[(i, n + i)] = 1.0;
        }
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if aug[(r, col)].abs() > aug[(piv, col)].abs() {
                    piv = r;
                }
            }
            for j in 0..2 * n {
                let tmp = aug[(col, j)];
                aug[(col, j)] = aug[(piv, j)];
                aug[(piv, j)] = tmp;
            }
            let d = aug[(col, col)];
            for j in 0..2 * n {
                aug[(col, j)] /= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = aug[(r, col)];
                for j in 0..2 * n {
                    aug[(r, j)] -= f * aug[(col, j)];
                }
            }
        }
        Matrix::from_fn(n, n, |i, j| aug[(i, n + j)])
    }

    #[test]
    fn conditional_matches_gauss_jordan_oracle() {
        let mut rng = derive_stream(34, 0);
        let n = 6;
        let p = 4;
        let cov = random_spd(n, &mut rng);
        let mean: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let obs: Vec<f64> = (0..n - p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let joint = GaussianSpec::new(mean.clone(), cov.clone()).unwrap();
        let got = gp_conditional(&joint, &obs).unwrap();

        let ti: Vec<usize> = (0..p).collect();
        let oi: Vec<usize> = (p..n).collect();
        let a11 = cov.submatrix(&ti, &ti);
        let a12 = cov.submatrix(&ti, &oi);
        let a21 = cov.submatrix(&oi, &ti);
        let a22inv = invert(&cov.submatrix(&oi, &oi));
        let resid: Vec<f64> = (0..n - p).map(|j| obs[j] - mean[p + j]).collect();
        let w = a22inv.matvec(&resid);
        let gain = a12.matmul(&a22inv);
        let reduction = gain.matmul(&a21);
        for i in 0..p {
            let mi = mean[i] + (0..n - p).map(|j| a12[(i, j)] * w[j]).sum::<f64>();
            assert!((got.mean[i] - mi).abs() < 1e-10, "mean[{i}]");
            for j in 0..p {
                let cij = a11[(i, j)] - reduction[(i, j)];
                assert!((got.cov[(i, j)] - cij).abs() < 1e-10, "cov[{i}{j}]");
            }
        }
    }

    #[test]
    fn conditional_trivial_cases() {
        // block-independent joint: conditional equals the marginal
        let mut cov = Matrix::identity(3);
        cov[(0, 1)] = 0.3;
        cov[(1, 0)] = 0.3;
        let joint = GaussianSpec::new(vec![1.0, 2.0, 3.0], cov).unwrap();
        let cond = gp_conditional(&joint, &[9.0]).unwrap();
        assert!((cond.mean[0] - 1.0).abs() < 1e-14);
        assert!((cond.mean[1] - 2.0).abs() < 1e-14);
        assert!((cond.cov[(0, 1)] - 0.3).abs() < 1e-12);

        // observing a fully-correlated copy pins the target
        let mut cov = Matrix::zeros(2, 2);
        cov[(0, 0)] = 1.0;
        cov[(0, 1)] = 1.0;
        cov[(1, 0)] = 1.0;
        cov[(1, 1)] = 1.0;
        let joint = GaussianSpec::new(vec![0.0, 0.0], cov).unwrap();
        let cond = gp_conditional(&joint, &[0.7]).unwrap();
        assert!((cond.mean[0] - 0.7).abs() < 1e-6);
        assert!(cond.cov[(0, 0)].abs() < 1e-6);
    }

    #[test]
    fn sample_then_condition_composes() {
        // empirical conditional moments from joint draws (accepted within a
        // narrow window around the conditioning values) match gp_conditional
        let mut rng = derive_stream(35, 0);
        let cov = random_spd(6, &mut rng);
        let mean: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let joint = GaussianSpec::new(mean, cov).unwrap();
        let obs = [0.4, -0.2];
        let cond = gp_conditional(&joint, &obs).unwrap();

        let mut kept: Vec<f64> = Vec::new();
        let mut tries = 0usize;
        while kept.len() < 4000 && tries < 6_000_000 {
            tries += 1;
            let x = mvn_sample(&joint, &mut rng).unwrap();
            if (x[4] - obs[0]).abs() < 0.12 && (x[5] - obs[1]).abs() < 0.12 {
                kept.push(x[0]);
            }
        }
        assert!(kept.len() >= 2000, "not enough accepted draws: {}", kept.len());
        let nf = kept.len() as f64;
        let m = kept.iter().sum::<f64>() / nf;
        let v = kept.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nf - 1.0);
        let se_m = (cond.cov[(0, 0)] / nf).sqrt();
        // window acceptance slightly inflates the spread; allow wide bands
        assert!((m - cond.mean[0]).abs() < 5.0 * se_m + 0.05, "{m} vs {}", cond.mean[0]);
        assert!((v - cond.cov[(0, 0)]).abs() < 0.1 + 5.0 * cond.cov[(0, 0)] / nf.sqrt());
    }

    #[test]
    fn synthetic_shape_and_stratification() {
        let data = generate_synthetic(7, 100, 5, 50.0, [0.1, 0.01, 0.02]).unwrap();
        assert_eq!(data.len(), 95);
        for p in &data.points {
            assert!(p.s1 >= 0.0 && p.s1 <= 50.0);
            assert!(p.s2 >= 0.0 && p.s2 <= 50.0);
            // each kept time point lies inside its own unit stratum
            let i = p.t.floor() as usize;
            assert!(p.t > i as f64 && p.t <= i as f64 + 1.0);
        }
    }

    #[test]
    fn synthetic_bit_reproducible() {
        let a = generate_synthetic(123, 40, 5, 50.0, [0.1, 0.01, 0.02]).unwrap();
        let b = generate_synthetic(123, 40, 5, 50.0, [0.1, 0.01, 0.02]).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.points, b.points);
        let c = generate_synthetic(124, 40, 5, 50.0, [0.1, 0.01, 0.02]).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn synthetic_rejects_bad_holdout() {
        assert!(generate_synthetic(1, 5, 5, 50.0, [0.1, 0.01, 0.02]).is_err());
    }

    #[test]
    fn distant_pairs_less_correlated_than_near_pairs() {
        // ordering check on the correlation proxy across 50 seeds
        let mut near_acc = 0.0;
        let mut far_acc = 0.0;
        for seed in 0..50u64 {
            let data = generate_synthetic(seed, 60, 5, 50.0, [0.1, 0.01, 0.02]).unwrap();
            let n = data.len();
            let ybar = data.y.iter().sum::<f64>() / n as f64;
            let s2 = data
                .y
                .iter()
                .map(|y| (y - ybar) * (y - ybar))
                .sum::<f64>()
                / (n as f64 - 1.0);
            let mut pairs: Vec<(f64, f64)> = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let a = &data.points[i];
                    let b = &data.points[j];
                    let d = ((a.s1 - b.s1).powi(2)
                        + (a.s2 - b.s2).powi(2)
                        + (a.t - b.t).powi(2))
                    .sqrt();
                    let proxy = (data.y[i] - ybar) * (data.y[j] - ybar) / s2;
                    pairs.push((d, proxy));
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let dec = pairs.len() / 10;
            near_acc += pairs[..dec].iter().map(|p| p.1).sum::<f64>() / dec as f64;
            far_acc += pairs[pairs.len() - dec..].iter().map(|p| p.1).sum::<f64>() / dec as f64;
        }
        assert!(
            far_acc / 50.0 < near_acc / 50.0,
            "far {} !< near {}",
            far_acc / 50.0,
            near_acc / 50.0
        );
    }
}
