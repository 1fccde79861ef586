//! Space-time coordinates, the padded computational region, homogeneous
//! Poisson point-process simulation, and the distance-based atom orderings
//! over the relevant sets `U(x)`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{CoreError, Result};
use crate::math;

/// A location-time coordinate `x = (s1, s2, t)`.
///
/// Purely spatial or purely temporal problems embed into this type by
/// zeroing the unused components and choosing the matching
/// [`RelevantSet`] mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    pub s1: f64,
    pub s2: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(s1: f64, s2: f64, t: f64) -> Self {
        SpaceTimePoint { s1, s2, t }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.s1, self.s2, self.t]
    }

    pub fn is_finite(&self) -> bool {
        self.s1.is_finite() && self.s2.is_finite() && self.t.is_finite()
    }
}

/// Which coordinates define eligibility and distance for orderings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelevantSet {
    /// `U(x) = D`: every point is eligible; distance over `(s1, s2)`.
    Spatial,
    /// `U(x) = (-inf, t]`: eligibility and distance over `t` only.
    Temporal,
    /// `U(x) = D x (-inf, t]`: past-or-present points; distance over all
    /// three coordinates.
    SpaceTime,
}

impl RelevantSet {
    fn distance(&self, x: &SpaceTimePoint, z: &SpaceTimePoint) -> f64 {
        match self {
            RelevantSet::Spatial => math::hypot3(x.s1 - z.s1, x.s2 - z.s2, 0.0),
            RelevantSet::Temporal => (x.t - z.t).abs(),
            RelevantSet::SpaceTime => math::hypot3(x.s1 - z.s1, x.s2 - z.s2, x.t - z.t),
        }
    }
}

/// Eligibility of `z` for the ordering at `x` under the given mode.
pub fn relevant_set_contains(x: &SpaceTimePoint, z: &SpaceTimePoint, mode: RelevantSet) -> bool {
    match mode {
        RelevantSet::Spatial => true,
        RelevantSet::Temporal | RelevantSet::SpaceTime => z.t <= x.t,
    }
}

/// Axis-aligned bounding box over the first `d` coordinates, padded by the
/// margin `r` derived from the intensity and concentration parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputationalBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub margin_r: f64,
    pub epsilon: f64,
}

impl ComputationalBox {
    /// Build a box directly from bounds (margin recorded as given).
    pub fn from_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(CoreError::LengthMismatch("box lower/upper"));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(CoreError::param("box", "lower must be < upper per dimension"));
        }
        Ok(ComputationalBox {
            lower,
            upper,
            margin_r: 0.0,
            epsilon: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        let c = p.coords();
        (0..self.dim()).all(|d| c[d] >= self.lower[d] && c[d] <= self.upper[d])
    }
}

/// Margin radius `r = 2 (Gamma(d/2) d / (2 pi^{d/2}) * (alpha+1)/lambda * log(1/eps))^{1/d}`.
pub fn margin_radius(alpha: f64, lambda: f64, epsilon: f64, d: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(CoreError::param("alpha", "must be > 0"));
    }
    if !(lambda > 0.0) {
        return Err(CoreError::param("lambda", "must be > 0"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CoreError::param("epsilon", "must lie in (0,1)"));
    }
    if d == 0 {
        return Err(CoreError::param("d", "must be >= 1"));
    }
    let df = d as f64;
    let pi = core::f64::consts::PI;
    let shape = math::exp(math::ln_gamma(df / 2.0)) * df / (2.0 * math::powf(pi, df / 2.0));
    let inner = shape * (alpha + 1.0) / lambda * math::ln(1.0 / epsilon);
    Ok(2.0 * math::powf(inner, 1.0 / df))
}

/// The computational region: the data range padded by [`margin_radius`]
/// in every dimension.
pub fn computational_region(
    data_min: &[f64],
    data_max: &[f64],
    alpha: f64,
    lambda: f64,
    epsilon: f64,
) -> Result<ComputationalBox> {
    if data_min.len() != data_max.len() {
        return Err(CoreError::LengthMismatch("data_min/data_max"));
    }
    if data_min.iter().zip(data_max).any(|(a, b)| a > b) {
        return Err(CoreError::param("data range", "min must be <= max"));
    }
    let d = data_min.len();
    let r = margin_radius(alpha, lambda, epsilon, d)?;
    let lower: Vec<f64> = data_min.iter().map(|v| v - r).collect();
    let upper: Vec<f64> = data_max.iter().map(|v| v + r).collect();
    Ok(ComputationalBox {
        lower,
        upper,
        margin_r: r,
        epsilon,
    })
}

/// A realization of the homogeneous Poisson point process on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    pub points: Vec<SpaceTimePoint>,
    pub intensity_lambda: f64,
}

impl PointConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draw a Poisson(lambda * volume) number of points, each uniform in the box.
pub fn sample_poisson_configuration<R: Rng + ?Sized>(
    boxr: &ComputationalBox,
    lambda: f64,
    rng: &mut R,
) -> Result<PointConfiguration> {
    if !(lambda > 0.0) {
        return Err(CoreError::param("lambda", "must be > 0"));
    }
    let mean = lambda * boxr.volume();
    let count = if mean <= 0.0 {
        0
    } else {
        let pois = Poisson::new(mean)
            .map_err(|_| CoreError::param("lambda*volume", "not a valid Poisson mean"))?;
        pois.sample(rng) as usize
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut c = [0.0f64; 3];
        for d in 0..boxr.dim() {
            c[d] = rng.gen_range(boxr.lower[d]..boxr.upper[d]);
        }
        points.push(SpaceTimePoint::new(c[0], c[1], c[2]));
    }
    Ok(PointConfiguration {
        points,
        intensity_lambda: lambda,
    })
}

/// Distance ordering of eligible configuration points at `x`.
///
/// `perm[i]` is the index (into the configuration) of the `(i+1)`-th
/// nearest eligible point. Ties break by ascending index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    pub perm: Vec<usize>,
}

impl Ordering {
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

pub fn compute_ordering(
    x: &SpaceTimePoint,
    config: &PointConfiguration,
    mode: RelevantSet,
) -> Ordering {
    ordering_of_points(x, &config.points, mode)
}

/// Same ordering over a bare point slice (the `z` block of a model state).
pub fn ordering_of_points(
    x: &SpaceTimePoint,
    points: &[SpaceTimePoint],
    mode: RelevantSet,
) -> Ordering {
    let mut eligible: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(_, z)| relevant_set_contains(x, z, mode))
        .map(|(i, z)| (mode.distance(x, z), i))
        .collect();
    eligible.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ordering {
        perm: eligible.into_iter().map(|(_, i)| i).collect(),
    }
}
