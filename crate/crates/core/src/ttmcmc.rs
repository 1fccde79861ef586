//! Transdimensional transformation-based MCMC.
//!
//! The engine updates `m` related variable-dimension blocks (each holding
//! `k` atoms of a fixed per-atom dimension) plus a fixed-dimension
//! parameter vector, in a single Metropolis step built from a handful of
//! shared positive innovations:
//!
//! - birth: pick atom `j`, split it into `x_j + a e` and `x_j - a e` in
//!   every block (one shared `e` per block), move every other scalar by
//!   `zeta a e`, and move the fixed block with one extra innovation. The
//!   Jacobian is `prod_l 2 a_l`.
//! - death: pick the adjacent pair `(j, j+1)`, replace it by its average
//!   (the innovations cancel), move the rest additively by the solved
//!   reverse innovation so the move is the exact inverse of a birth. The
//!   Jacobian is `prod_l 1/(2 a_l)`.
//! - no-change: move every scalar additively; Jacobian one.
//!
//! Move weights and the per-scalar sign probabilities are symmetric by
//! default, so the acceptance probability carries the posterior ratio, the
//! Jacobian, and the innovation-density correction of the dimension moves
//! (see [`innovation_correction`]). Boundary moves (birth at `k_max`,
//! death at `k_min`) are proposed and auto-rejected, which keeps the
//! weight ratio of the remaining moves exactly one.
//!
//! The spatio-temporal model target lives here too: it runs the chain in
//! reparameterized coordinates (`V* = log V`, and a per-coordinate logit
//! map for the point-process locations) and adds the log-Jacobian of that
//! transformation to the posterior so the chain targets the correct law.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::geometry::SpaceTimePoint;
use crate::kernel::KernelFieldParams;
use crate::math;
use crate::model::{
    log_posterior, Dataset, FixedState, PriorSpec, RegressionCoeffs, VariableState,
};

/// Per-block geometry: how many scalars one atom holds and the additive
/// move scale for the block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub atom_dim: usize,
    pub scale: f64,
}

/// Move-type probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveWeights {
    pub birth: f64,
    pub death: f64,
    pub no_change: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        MoveWeights {
            birth: 1.0 / 3.0,
            death: 1.0 / 3.0,
            no_change: 1.0 / 3.0,
        }
    }
}

impl MoveWeights {
    fn validate(&self) -> Result<()> {
        if self.birth <= 0.0 || self.death <= 0.0 || self.no_change <= 0.0 {
            return Err(CoreError::param("move weights", "must all be > 0"));
        }
        Ok(())
    }

    fn total(&self) -> f64 {
        self.birth + self.death + self.no_change
    }
}

/// Engine-side description of the state layout.
#[derive(Debug, Clone)]
pub struct EngineSpec {
    pub blocks: Vec<BlockSpec>,
    /// Additive scale per fixed-block scalar.
    pub fixed_scales: Vec<f64>,
    pub weights: MoveWeights,
}

/// The additive move scales of the model specialization, one per
/// parameter group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveScales {
    pub a: [f64; 14],
}

impl Default for MoveScales {
    fn default() -> Self {
        MoveScales { a: [0.1; 14] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveType {
    Birth,
    Death,
    NoChange,
}

/// Everything random a single proposal consumes, drawn up front so the
/// transformation itself is deterministic and testable.
#[derive(Debug, Clone)]
pub struct MoveDraw {
    pub move_type: MoveType,
    /// Birth: split atom index in `0..k`. Death: merge pair `(j, j+1)`,
    /// `j` in `0..k-1`. Unused for no-change.
    pub j: usize,
    /// One positive innovation per block plus one shared by the fixed
    /// block (last entry).
    pub eps: Vec<f64>,
    /// Signs for the additive part, one per block scalar; the entries of
    /// the split/merged atoms are ignored.
    pub zeta_blocks: Vec<Vec<f64>>,
    /// Signs for the fixed-block scalars.
    pub zeta_fixed: Vec<f64>,
}

/// Chain state in the engine's (possibly reparameterized) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub k: usize,
    pub blocks: Vec<Vec<f64>>,
    pub fixed: Vec<f64>,
    pub log_post: f64,
}

/// A state proposal before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposedState {
    pub k: usize,
    pub blocks: Vec<Vec<f64>>,
    pub fixed: Vec<f64>,
}

/// A target density over variable-dimension states, in the coordinates the
/// engine moves (any change-of-variables correction is the target's job).
pub trait TransdimensionalTarget {
    fn log_density(&self, k: usize, blocks: &[Vec<f64>], fixed: &[f64]) -> f64;

    /// Map engine coordinates to the natural parameterization for
    /// archiving. Defaults to the identity.
    fn to_natural(&self, k: usize, blocks: &[Vec<f64>], fixed: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let _ = k;
        (blocks.to_vec(), fixed.to_vec())
    }
}

/// Draw the move type, coordinate index, innovations, and signs.
pub fn sample_move_draw<R: Rng + ?Sized>(
    spec: &EngineSpec,
    k: usize,
    rng: &mut R,
) -> MoveDraw {
    let u: f64 = rng.gen::<f64>() * spec.weights.total();
    let move_type = if u < spec.weights.birth {
        MoveType::Birth
    } else if u < spec.weights.birth + spec.weights.death {
        MoveType::Death
    } else {
        MoveType::NoChange
    };
    let j = match move_type {
        MoveType::Birth => rng.gen_range(0..k),
        MoveType::Death if k >= 2 => rng.gen_range(0..k - 1),
        _ => 0,
    };
    let m = spec.blocks.len();
    let eps: Vec<f64> = (0..m + 1)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    let zeta_blocks: Vec<Vec<f64>> = spec
        .blocks
        .iter()
        .map(|b| {
            (0..k * b.atom_dim)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect()
        })
        .collect();
    let zeta_fixed: Vec<f64> = (0..spec.fixed_scales.len())
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    MoveDraw {
        move_type,
        j,
        eps,
        zeta_blocks,
        zeta_fixed,
    }
}

fn moved_fixed(state: &ChainState, spec: &EngineSpec, draw: &MoveDraw) -> Vec<f64> {
    let e = draw.eps[spec.blocks.len()];
    state
        .fixed
        .iter()
        .zip(&spec.fixed_scales)
        .zip(&draw.zeta_fixed)
        .map(|((x, a), z)| x + z * a * e)
        .collect()
}

/// Split atom `j` of every block, shifting everything else additively.
/// Returns the proposal and `log prod_l (2 a_l)`.
pub fn propose_birth(
    state: &ChainState,
    spec: &EngineSpec,
    draw: &MoveDraw,
) -> (ProposedState, f64) {
    let k = state.k;
    debug_assert!(draw.j < k);
    let mut log_jacobian = 0.0;
    let mut blocks = Vec::with_capacity(spec.blocks.len());
    for (l, bs) in spec.blocks.iter().enumerate() {
        let d = bs.atom_dim;
        let a = bs.scale;
        let e = draw.eps[l];
        let old = &state.blocks[l];
        let zeta = &draw.zeta_blocks[l];
        let mut new = Vec::with_capacity((k + 1) * d);
        for i in 0..k {
            if i == draw.j {
                for s in 0..d {
                    new.push(old[i * d + s] + a * e);
                }
                for s in 0..d {
                    new.push(old[i * d + s] - a * e);
                }
            } else {
                for s in 0..d {
                    new.push(old[i * d + s] + zeta[i * d + s] * a * e);
                }
            }
        }
        log_jacobian += math::ln(2.0 * a);
        blocks.push(new);
    }
    (
        ProposedState {
            k: k + 1,
            blocks,
            fixed: moved_fixed(state, spec, draw),
        },
        log_jacobian,
    )
}

/// Merge the adjacent pair `(j, j+1)` of every block by averaging (the
/// innovations cancel in the average), shifting everything else additively
/// by the block's *solved* reverse innovation `eps*` (so the move is the
/// exact inverse of the birth with `eps = eps*`). Returns the proposal,
/// the solved `eps*` per block, and `log prod_l 1/(2 a_l)`.
///
/// A birth emits its children in descending order, so the merge reverses a
/// birth only when every solved `eps*` is positive; [`step`] rejects the
/// move otherwise via the innovation-density correction.
pub fn propose_death(
    state: &ChainState,
    spec: &EngineSpec,
    draw: &MoveDraw,
) -> (ProposedState, Vec<f64>, f64) {
    let k = state.k;
    debug_assert!(k >= 2 && draw.j + 1 < k);
    let mut log_jacobian = 0.0;
    let mut eps_star = Vec::with_capacity(spec.blocks.len());
    let mut blocks = Vec::with_capacity(spec.blocks.len());
    for (l, bs) in spec.blocks.iter().enumerate() {
        let d = bs.atom_dim;
        let a = bs.scale;
        let old = &state.blocks[l];
        let zeta = &draw.zeta_blocks[l];
        let e_star = (old[draw.j * d] - old[(draw.j + 1) * d]) / (2.0 * a);
        eps_star.push(e_star);
        let mut new = Vec::with_capacity((k - 1) * d);
        for i in 0..k {
            if i == draw.j + 1 {
                continue;
            }
            if i == draw.j {
                for s in 0..d {
                    new.push((old[i * d + s] + old[(i + 1) * d + s]) / 2.0);
                }
            } else {
                for s in 0..d {
                    new.push(old[i * d + s] + zeta[i * d + s] * a * e_star);
                }
            }
        }
        log_jacobian -= math::ln(2.0 * a);
        blocks.push(new);
    }
    (
        ProposedState {
            k: k - 1,
            blocks,
            fixed: moved_fixed(state, spec, draw),
        },
        eps_star,
        log_jacobian,
    )
}

/// Log-density of the positive half-normal innovation; `-inf` off the
/// support.
pub fn ln_half_normal(eps: f64) -> f64 {
    if !(eps > 0.0) {
        return f64::NEG_INFINITY;
    }
    0.5 * math::ln(2.0 / core::f64::consts::PI) - 0.5 * eps * eps
}

/// Innovation-density correction for the dimension moves.
///
/// A birth consumes one drawn innovation per block that the matching death
/// reconstructs deterministically, so exact reversibility requires the
/// half-normal density of those innovations in the acceptance ratio:
/// divide by `prod_l g(eps_l)` on a birth and multiply by
/// `prod_l g(eps*_l)` on a death (which also rejects merges whose solved
/// innovation is negative).
pub fn innovation_correction(move_type: MoveType, n_blocks: usize, eps: &[f64]) -> f64 {
    match move_type {
        MoveType::Birth => -eps[..n_blocks].iter().map(|e| ln_half_normal(*e)).sum::<f64>(),
        MoveType::Death => eps[..n_blocks].iter().map(|e| ln_half_normal(*e)).sum::<f64>(),
        MoveType::NoChange => 0.0,
    }
}

/// Move every scalar additively; the Jacobian is one.
pub fn propose_no_change(
    state: &ChainState,
    spec: &EngineSpec,
    draw: &MoveDraw,
) -> (ProposedState, f64) {
    let k = state.k;
    let mut blocks = Vec::with_capacity(spec.blocks.len());
    for (l, bs) in spec.blocks.iter().enumerate() {
        let a = bs.scale;
        let e = draw.eps[l];
        let old = &state.blocks[l];
        let zeta = &draw.zeta_blocks[l];
        let new: Vec<f64> = (0..k * bs.atom_dim)
            .map(|i| old[i] + zeta[i] * a * e)
            .collect();
        blocks.push(new);
    }
    (
        ProposedState {
            k,
            blocks,
            fixed: moved_fixed(state, spec, draw),
        },
        0.0,
    )
}

/// Unclamped log acceptance ratio: posterior difference plus Jacobian plus
/// the reverse/forward move-weight ratio (zero under symmetric weights;
/// the sign probabilities are symmetric by construction and contribute
/// nothing).
pub fn log_acceptance_ratio(
    move_type: MoveType,
    old_log_post: f64,
    new_log_post: f64,
    log_jacobian: f64,
    weights: &MoveWeights,
) -> f64 {
    let weight_term = match move_type {
        MoveType::Birth => math::ln(weights.death / weights.birth),
        MoveType::Death => math::ln(weights.birth / weights.death),
        MoveType::NoChange => 0.0,
    };
    new_log_post - old_log_post + log_jacobian + weight_term
}

/// `min(0, log ratio)`; `-inf` posterior proposals stay `-inf`.
pub fn acceptance_log_prob(
    move_type: MoveType,
    old_log_post: f64,
    new_log_post: f64,
    log_jacobian: f64,
    weights: &MoveWeights,
) -> f64 {
    if new_log_post == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let ratio = log_acceptance_ratio(move_type, old_log_post, new_log_post, log_jacobian, weights);
    if ratio < 0.0 {
        ratio
    } else {
        0.0
    }
}

/// Outcome bookkeeping of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub move_type: MoveType,
    pub accepted: bool,
}

/// One Metropolis-Hastings transition.
pub fn step<T: TransdimensionalTarget, R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &T,
    spec: &EngineSpec,
    rng: &mut R,
) -> StepOutcome {
    debug_assert!(state.log_post.is_finite());
    let draw = sample_move_draw(spec, state.k, rng);

    // a death with a single atom cannot form a pair: auto-reject
    if draw.move_type == MoveType::Death && state.k < 2 {
        return StepOutcome {
            move_type: MoveType::Death,
            accepted: false,
        };
    }

    let m = spec.blocks.len();
    let (proposal, log_jacobian, correction) = match draw.move_type {
        MoveType::Birth => {
            let (p, j) = propose_birth(state, spec, &draw);
            let c = innovation_correction(MoveType::Birth, m, &draw.eps);
            (p, j, c)
        }
        MoveType::Death => {
            let (p, eps_star, j) = propose_death(state, spec, &draw);
            let c = innovation_correction(MoveType::Death, m, &eps_star);
            // no reverse birth exists unless every solved innovation is
            // positive (births emit descending pairs)
            if c == f64::NEG_INFINITY {
                return StepOutcome {
                    move_type: MoveType::Death,
                    accepted: false,
                };
            }
            (p, j, c)
        }
        MoveType::NoChange => {
            let (p, j) = propose_no_change(state, spec, &draw);
            (p, j, 0.0)
        }
    };
    let new_log_post = target.log_density(proposal.k, &proposal.blocks, &proposal.fixed);
    let acc = acceptance_log_prob(
        draw.move_type,
        state.log_post,
        new_log_post,
        log_jacobian + correction,
        &spec.weights,
    );
    let u: f64 = rng.gen();
    let accepted = math::ln(u) < acc;
    if accepted {
        state.k = proposal.k;
        state.blocks = proposal.blocks;
        state.fixed = proposal.fixed;
        state.log_post = new_log_post;
    }
    StepOutcome {
        move_type: draw.move_type,
        accepted,
    }
}

/// Proposed/accepted counts per move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: [usize; 3],
    pub accepted: [usize; 3],
}

impl MoveStats {
    fn slot(move_type: MoveType) -> usize {
        match move_type {
            MoveType::Birth => 0,
            MoveType::Death => 1,
            MoveType::NoChange => 2,
        }
    }

    fn record(&mut self, outcome: StepOutcome) {
        let s = Self::slot(outcome.move_type);
        self.proposed[s] += 1;
        if outcome.accepted {
            self.accepted[s] += 1;
        }
    }

    pub fn rate(&self, move_type: MoveType) -> f64 {
        let s = Self::slot(move_type);
        if self.proposed[s] == 0 {
            0.0
        } else {
            self.accepted[s] as f64 / self.proposed[s] as f64
        }
    }
}

/// One retained iteration, in natural coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveRow {
    pub iter: usize,
    pub k: usize,
    pub blocks: Vec<Vec<f64>>,
    pub fixed: Vec<f64>,
    pub log_post: f64,
}

/// Post-burn-in thinned states plus acceptance statistics and the k-trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleArchive {
    pub rows: Vec<ArchiveRow>,
    pub stats: MoveStats,
    pub k_trace: Vec<usize>,
}

/// Run a chain: `n_iter` steps, archive every `thin`-th state after
/// `burn_in`.
pub fn run_chain<T: TransdimensionalTarget, R: Rng + ?Sized>(
    target: &T,
    spec: &EngineSpec,
    init: ProposedState,
    n_iter: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<SampleArchive> {
    if n_iter <= burn_in {
        return Err(CoreError::param("n_iter", "must exceed burn_in"));
    }
    if thin == 0 {
        return Err(CoreError::param("thin", "must be >= 1"));
    }
    spec.weights.validate()?;
    let log_post = target.log_density(init.k, &init.blocks, &init.fixed);
    if !log_post.is_finite() {
        return Err(CoreError::param("init", "initial state has non-finite density"));
    }
    let mut state = ChainState {
        k: init.k,
        blocks: init.blocks,
        fixed: init.fixed,
        log_post,
    };
    let mut stats = MoveStats::default();
    let mut rows = Vec::new();
    let mut k_trace = Vec::with_capacity(n_iter);
    for t in 0..n_iter {
        let outcome = step(&mut state, target, spec, rng);
        stats.record(outcome);
        k_trace.push(state.k);
        if t >= burn_in && (t - burn_in) % thin == 0 {
            let (blocks, fixed) = target.to_natural(state.k, &state.blocks, &state.fixed);
            rows.push(ArchiveRow {
                iter: t,
                k: state.k,
                blocks,
                fixed,
                log_post: state.log_post,
            });
        }
    }
    Ok(SampleArchive {
        rows,
        stats,
        k_trace,
    })
}

// ---------------------------------------------------------------------------
// Spatio-temporal model specialization
// ---------------------------------------------------------------------------

/// Block order of the model state: stick fractions, point-process
/// locations, and the two kernel-center coordinates.
pub const MODEL_BLOCKS: usize = 4;

/// The spatio-temporal posterior as a transdimensional target.
///
/// Engine coordinates: `V* = log V` (supported on the negative half-line;
/// proposals crossing zero auto-reject) and the per-dimension logit map
/// `z* = log((z - lower)/(upper - lower - (z - lower)))`, which bijects
/// the region onto all of `R` so additive moves never leave the support.
/// `theta` and the fixed block move raw. The density adds the
/// log-Jacobians `sum log V` and `sum log dz/dz*` so the chain targets
/// the posterior of the natural parameters.
pub struct SpatioTemporalTarget<'a> {
    pub data: &'a Dataset,
    pub spec: &'a PriorSpec,
}

/// `log dz/dz*` for the logit map over an interval of width `w`:
/// `log w + log sigma(z*) + log(1 - sigma(z*)) = log w - |z*| - 2 log(1 + e^{-|z*|})`.
fn logit_jacobian_ln(z_star: f64, width: f64) -> f64 {
    math::ln(width) - z_star.abs() - 2.0 * math::ln_1p(math::exp(-z_star.abs()))
}

fn sigmoid(z_star: f64) -> f64 {
    if z_star >= 0.0 {
        1.0 / (1.0 + math::exp(-z_star))
    } else {
        let e = math::exp(z_star);
        e / (1.0 + e)
    }
}

impl<'a> SpatioTemporalTarget<'a> {
    pub fn new(data: &'a Dataset, spec: &'a PriorSpec) -> Self {
        SpatioTemporalTarget { data, spec }
    }

    fn n_sites(&self) -> usize {
        self.data.len()
    }

    fn regression_mode(&self) -> bool {
        self.data.covariate.is_some()
    }

    /// Fixed-block scalar count: 7 scalars, three site-indexed fields, and
    /// optionally the two regression coefficients.
    pub fn fixed_len(&self) -> usize {
        7 + 3 * self.n_sites() + if self.regression_mode() { 2 } else { 0 }
    }

    /// Engine layout for this target. The regression coefficients reuse
    /// the `tau` scale slot.
    pub fn engine_spec(&self, scales: &MoveScales, weights: MoveWeights) -> EngineSpec {
        let a = &scales.a;
        let n = self.n_sites();
        let mut fixed_scales = vec![a[4], a[5], a[6], a[7], a[8], a[9], a[10]];
        fixed_scales.extend(core::iter::repeat(a[11]).take(n));
        fixed_scales.extend(core::iter::repeat(a[12]).take(n));
        fixed_scales.extend(core::iter::repeat(a[13]).take(n));
        if self.regression_mode() {
            fixed_scales.push(a[9]);
            fixed_scales.push(a[9]);
        }
        EngineSpec {
            blocks: vec![
                BlockSpec {
                    atom_dim: 1,
                    scale: a[0],
                },
                BlockSpec {
                    atom_dim: 3,
                    scale: a[1],
                },
                BlockSpec {
                    atom_dim: 1,
                    scale: a[2],
                },
                BlockSpec {
                    atom_dim: 1,
                    scale: a[3],
                },
            ],
            fixed_scales,
            weights,
        }
    }

    /// Encode a natural state into engine coordinates.
    pub fn encode(&self, var: &VariableState, fixed: &FixedState) -> ProposedState {
        let region = &self.spec.region;
        let k = var.k();
        let v_star: Vec<f64> = var.v.iter().map(|v| math::ln(*v)).collect();
        let mut z_star = Vec::with_capacity(3 * k);
        for z in &var.z {
            let c = z.coords();
            for d in 0..3 {
                let ratio = ((c[d] - region.lower[d]) / region.width(d))
                    .clamp(1e-12, 1.0 - 1e-12);
                z_star.push(math::ln(ratio) - math::ln_1p(-ratio));
            }
        }
        let kp = &fixed.kernel;
        let mut f = vec![
            kp.phi,
            kp.a_delta,
            kp.b_psi,
            fixed.alpha,
            fixed.lambda,
            kp.tau,
            fixed.sigma,
        ];
        f.extend_from_slice(&kp.psi1);
        f.extend_from_slice(&kp.psi2);
        f.extend_from_slice(&kp.log_delta);
        if let Some(r) = fixed.regression {
            f.push(r.alpha0);
            f.push(r.alpha1);
        }
        ProposedState {
            k,
            blocks: vec![v_star, z_star, var.theta1.clone(), var.theta2.clone()],
            fixed: f,
        }
    }

    /// Decode engine coordinates back to the natural state. Values outside
    /// the reparameterization's support still decode (to out-of-support
    /// natural values) and are rejected by the priors.
    pub fn decode(&self, k: usize, blocks: &[Vec<f64>], fixed: &[f64]) -> (VariableState, FixedState) {
        let region = &self.spec.region;
        let v: Vec<f64> = blocks[0].iter().map(|s| math::exp(*s)).collect();
        let z: Vec<SpaceTimePoint> = (0..k)
            .map(|i| {
                let mut c = [0.0f64; 3];
                for d in 0..3 {
                    c[d] = region.lower[d] + region.width(d) * sigmoid(blocks[1][3 * i + d]);
                }
                SpaceTimePoint::new(c[0], c[1], c[2])
            })
            .collect();
        let n = self.n_sites();
        let var = VariableState {
            v,
            z,
            theta1: blocks[2].clone(),
            theta2: blocks[3].clone(),
        };
        let regression = if self.regression_mode() {
            Some(RegressionCoeffs {
                alpha0: fixed[7 + 3 * n],
                alpha1: fixed[7 + 3 * n + 1],
            })
        } else {
            None
        };
        let fixed_state = FixedState {
            kernel: KernelFieldParams {
                phi: fixed[0],
                a_aniso: crate::kernel::DEFAULT_A,
                psi1: fixed[7..7 + n].to_vec(),
                psi2: fixed[7 + n..7 + 2 * n].to_vec(),
                log_delta: fixed[7 + 2 * n..7 + 3 * n].to_vec(),
                tau: fixed[5],
                b_psi: fixed[2],
                a_delta: fixed[1],
            },
            alpha: fixed[3],
            lambda: fixed[4],
            sigma: fixed[6],
            regression,
        };
        (var, fixed_state)
    }
}

impl TransdimensionalTarget for SpatioTemporalTarget<'_> {
    fn log_density(&self, k: usize, blocks: &[Vec<f64>], fixed: &[f64]) -> f64 {
        if k < 1 || k > self.spec.k_max {
            return f64::NEG_INFINITY;
        }
        // the stick reparameterization lives on the negative half-line
        if blocks[0].iter().any(|s| !(*s < 0.0)) {
            return f64::NEG_INFINITY;
        }
        if blocks[1].iter().any(|s| !s.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let (var, fixed_state) = self.decode(k, blocks, fixed);
        let base = log_posterior(&var, &fixed_state, self.data, self.spec);
        if base == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        // change of variables: dV/dV* = V, plus the per-coordinate logit
        // Jacobian of the z map
        let mut correction: f64 = blocks[0].iter().sum();
        let region = &self.spec.region;
        for i in 0..k {
            for d in 0..3 {
                correction += logit_jacobian_ln(blocks[1][3 * i + d], region.width(d));
            }
        }
        base + correction
    }

    fn to_natural(&self, k: usize, blocks: &[Vec<f64>], fixed: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (var, _) = self.decode(k, blocks, fixed);
        let mut z_flat = Vec::with_capacity(3 * k);
        for z in &var.z {
            z_flat.extend_from_slice(&z.coords());
        }
        (
            vec![var.v, z_flat, var.theta1, var.theta2],
            fixed.to_vec(),
        )
    }
}

/// Rebuild a natural-coordinates model state from an archived row.
///
/// Row layout: blocks `[V, z-flat, theta1, theta2]` and the fixed vector
/// `[phi, a_delta, b_psi, alpha, lambda, tau, sigma, psi1.., psi2..,
/// log_delta.., (alpha0, alpha1)]`.
pub fn model_state_from_row(
    row: &ArchiveRow,
    n_sites: usize,
    regression: bool,
) -> (VariableState, FixedState) {
    let k = row.k;
    let z: Vec<SpaceTimePoint> = (0..k)
        .map(|i| {
            SpaceTimePoint::new(
                row.blocks[1][3 * i],
                row.blocks[1][3 * i + 1],
                row.blocks[1][3 * i + 2],
            )
        })
        .collect();
    let var = VariableState {
        v: row.blocks[0].clone(),
        z,
        theta1: row.blocks[2].clone(),
        theta2: row.blocks[3].clone(),
    };
    let f = &row.fixed;
    let regression = if regression {
        Some(RegressionCoeffs {
            alpha0: f[7 + 3 * n_sites],
            alpha1: f[7 + 3 * n_sites + 1],
        })
    } else {
        None
    };
    let fixed = FixedState {
        kernel: KernelFieldParams {
            phi: f[0],
            a_aniso: crate::kernel::DEFAULT_A,
            psi1: f[7..7 + n_sites].to_vec(),
            psi2: f[7 + n_sites..7 + 2 * n_sites].to_vec(),
            log_delta: f[7 + 2 * n_sites..7 + 3 * n_sites].to_vec(),
            tau: f[5],
            b_psi: f[2],
            a_delta: f[1],
        },
        alpha: f[3],
        lambda: f[4],
        sigma: f[6],
        regression,
    };
    (var, fixed)
}

/// Convenience runner for the model target.
#[allow(clippy::too_many_arguments)]
pub fn run_model_chain<R: Rng + ?Sized>(
    data: &Dataset,
    spec: &PriorSpec,
    scales: &MoveScales,
    weights: MoveWeights,
    init_var: &VariableState,
    init_fixed: &FixedState,
    n_iter: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<SampleArchive> {
    let target = SpatioTemporalTarget::new(data, spec);
    let engine = target.engine_spec(scales, weights);
    let init = target.encode(init_var, init_fixed);
    run_chain(&target, &engine, init, n_iter, burn_in, thin, rng)
}
