//! End-to-end fitting: spectral denoising, half-sphere initialization from
//! the two leading principal components, then Adam on the subsampled angle
//! loss with a multiplicative step-size schedule.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::angles::sample_angle_batch;
use crate::data::DataMatrix;
use crate::error::{MercatError, Result};
use crate::geometry::{SphereEmbedding, SpherePoint};
use crate::objective::{loss_gradient, LossSpace, LossValue};
use crate::rng;
use crate::spectral::{hard_threshold_rank, pca};

/// Upper bound on the default denoising rank.
pub const DEFAULT_MAX_RANK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Each leading PC mapped affinely onto `[0.2 pi, 0.8 pi]`.
    #[default]
    HalfSphere,
    /// Both PCs shifted by their joint minimum and scaled so the joint
    /// maximum lands at `0.7 pi`.
    JointScale,
}

/// Which coordinates receive Adam moment updates each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMode {
    /// Only coordinates touched by the batch.
    #[default]
    Sparse,
    /// Every coordinate; untouched ones see a zero gradient.
    Dense,
}

/// What one training iteration covers. Step-size milestones and the
/// iteration count are in these units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationUnit {
    /// A full pass: `ceil(n / batch_size)` Adam steps, one per anchor batch.
    #[default]
    Epoch,
    /// A single Adam step on one anchor batch.
    Batch,
}

/// How the denoising rank is chosen when none is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankRule {
    /// `min(50, n, d)`.
    #[default]
    Cap,
    /// Singular values above the optimal hard threshold, at least 2.
    Threshold,
}

/// Iteration/milestone presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Synthetic and toy data: 1000 iterations, step drop at 350.
    Synthetic,
    /// 250 iterations, drop at 100.
    Mnist,
    /// 50 iterations, drops at 10 and 30.
    LargeAtlas,
    /// 200 iterations, drops at 50 and 150.
    MediumAtlas,
}

impl Preset {
    pub fn schedule(self) -> (usize, Vec<usize>) {
        match self {
            Preset::Synthetic => (1000, vec![350]),
            Preset::Mnist => (250, vec![100]),
            Preset::LargeAtlas => (50, vec![10, 30]),
            Preset::MediumAtlas => (200, vec![50, 150]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Denoising rank; `min(50, n, d)` when unset.
    pub rank: Option<usize>,
    pub rank_rule: RankRule,
    pub iterations: usize,
    pub learning_rate: f64,
    pub schedule_milestones: Vec<usize>,
    pub schedule_factor: f64,
    pub batch_size: usize,
    pub subsample_m: usize,
    pub seed: u64,
    pub loss_space: LossSpace,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub init: InitMode,
    pub moments: MomentMode,
    pub iteration_unit: IterationUnit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rank: None,
            rank_rule: RankRule::Cap,
            iterations: 1000,
            learning_rate: 0.01,
            schedule_milestones: vec![350],
            schedule_factor: 0.1,
            batch_size: 64,
            subsample_m: 64,
            seed: 0,
            loss_space: LossSpace::Cosine,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init: InitMode::HalfSphere,
            moments: MomentMode::Sparse,
            iteration_unit: IterationUnit::Epoch,
        }
    }
}

impl TrainConfig {
    pub fn with_preset(mut self, preset: Preset) -> Self {
        let (iterations, milestones) = preset.schedule();
        self.iterations = iterations;
        self.schedule_milestones = milestones;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MercatError::BadConfig(msg));
        if self.rank == Some(0) {
            return bad("rank must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.schedule_factor > 0.0 && self.schedule_factor.is_finite()) {
            return bad(format!(
                "schedule factor {} must be positive",
                self.schedule_factor
            ));
        }
        if self.batch_size == 0 || self.subsample_m < 2 {
            return bad("batch size must be positive and subsample size at least 2".into());
        }
        if self.schedule_milestones.windows(2).any(|w| w[0] >= w[1]) {
            return bad("milestones must be strictly increasing".into());
        }
        if self.iterations > 0
            && self
                .schedule_milestones
                .iter()
                .any(|&m| m >= self.iterations)
        {
            return bad(format!(
                "milestones {:?} must be below the iteration count {}",
                self.schedule_milestones, self.iterations
            ));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !self.epsilon.is_finite()
            || self.epsilon <= 0.0
        {
            return bad("adam constants out of range".into());
        }
        Ok(())
    }

    /// Step size in effect at (0-based) iteration `t`.
    pub fn learning_rate_at(&self, t: usize) -> f64 {
        let passed = self.schedule_milestones.iter().filter(|&&m| m <= t).count();
        self.learning_rate * self.schedule_factor.powi(passed as i32)
    }

    /// Denoising rank for `x`: the explicit rank if set, else the rank rule.
    pub fn resolved_rank(&self, x: &DataMatrix) -> Result<usize> {
        let (n, d) = (x.n(), x.d());
        if let Some(r) = self.rank {
            return Ok(r);
        }
        let cap = DEFAULT_MAX_RANK.min(n).min(d);
        match self.rank_rule {
            RankRule::Cap => Ok(cap),
            RankRule::Threshold => {
                let sv = pca(x, 1)?.singular_values;
                Ok(hard_threshold_rank(&sv, n, d)?.clamp(2.min(cap), cap))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub learning_rate: f64,
    pub loss: LossValue,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub loss_trace: Vec<IterationRecord>,
    pub initial_embedding: SphereEmbedding,
    pub final_embedding: SphereEmbedding,
    pub rank: usize,
    pub dropped_triples_total: usize,
    pub wall_time: f64,
    pub warnings: Vec<String>,
}

/// Progress notification sent after each iteration.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub iteration: usize,
    pub iterations: usize,
    pub loss: f64,
    pub learning_rate: f64,
}

/// First- and second-moment estimates plus the global step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// One bias-corrected Adam step on every coordinate.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, hp: AdamParams) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let (c1, c2) = bias_corrections(state.t, hp);
    for i in 0..params.len() {
        update_coordinate(params, grads, state, i, hp, c1, c2);
    }
}

/// Adam step restricted to `indices`: only those coordinates have their
/// moments decayed and updated, while the step counter is global.
pub fn adam_step_sparse(
    params: &mut [f64],
    grads: &[f64],
    indices: &[usize],
    state: &mut AdamState,
    hp: AdamParams,
) {
    state.t += 1;
    let (c1, c2) = bias_corrections(state.t, hp);
    for &i in indices {
        update_coordinate(params, grads, state, i, hp, c1, c2);
    }
}

fn bias_corrections(t: u64, hp: AdamParams) -> (f64, f64) {
    let t = t.min(i32::MAX as u64) as i32;
    (1.0 - hp.beta1.powi(t), 1.0 - hp.beta2.powi(t))
}

#[inline]
fn update_coordinate(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    i: usize,
    hp: AdamParams,
    c1: f64,
    c2: f64,
) {
    let g = grads[i];
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    let m_hat = state.m[i] / c1;
    let v_hat = state.v[i] / c2;
    params[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.epsilon);
}

fn spread_map(col: &[f64], index: usize) -> Result<(f64, f64)> {
    let (lo, hi) = col
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    let spread = hi - lo;
    if spread.is_nan() || spread <= 1e-12 * (1.0 + hi.abs().max(lo.abs())) {
        return Err(MercatError::DegenerateSpread(index));
    }
    Ok((lo, hi))
}

/// Places points on the sphere from their first two principal-component
/// coordinates (columns of `scores`); PC1 sets colatitude, PC2 azimuth.
pub fn initialize_from_scores(scores: &DMatrix<f64>, mode: InitMode) -> Result<SphereEmbedding> {
    if scores.ncols() < 2 {
        return Err(MercatError::DegenerateSpread(scores.ncols() + 1));
    }
    let pc1: Vec<f64> = scores.column(0).iter().copied().collect();
    let pc2: Vec<f64> = scores.column(1).iter().copied().collect();
    let (lo1, hi1) = spread_map(&pc1, 1)?;
    let (lo2, hi2) = spread_map(&pc2, 2)?;
    let points = match mode {
        InitMode::HalfSphere => {
            let wrap = |v: f64, lo: f64, hi: f64| 0.6 * PI * (v - lo) / (hi - lo) + 0.2 * PI;
            pc1.iter()
                .zip(&pc2)
                .map(|(&a, &b)| SpherePoint::new(wrap(a, lo1, hi1), wrap(b, lo2, hi2)))
                .collect()
        }
        InitMode::JointScale => {
            let lo = lo1.min(lo2);
            let hi = (hi1 - lo).max(hi2 - lo);
            pc1.iter()
                .zip(&pc2)
                .map(|(&a, &b)| {
                    SpherePoint::new((a - lo) / hi * 0.7 * PI, (b - lo) / hi * 0.7 * PI)
                })
                .collect()
        }
    };
    SphereEmbedding::new(points)
}

pub fn initialize_embedding(x: &DataMatrix, mode: InitMode) -> Result<SphereEmbedding> {
    let k = 2.min(x.n()).min(x.d());
    let dec = pca(x, k)?;
    initialize_from_scores(&dec.scores, mode)
}

/// Uniform placement in the `[0.2 pi, 0.8 pi]` band, used when the leading
/// components carry no spread.
pub fn jitter_embedding(n: usize, seed: u64) -> Result<SphereEmbedding> {
    let mut rng = rng::stream(seed, &[rng::DOMAIN_JITTER]);
    SphereEmbedding::new(
        (0..n)
            .map(|_| {
                SpherePoint::new(
                    rng.random_range(0.2 * PI..=0.8 * PI),
                    rng.random_range(0.2 * PI..=0.8 * PI),
                )
            })
            .collect(),
    )
}

/// Anchor batches drawn from a reshuffled permutation per epoch. A batch
/// never crosses an epoch boundary, so every epoch spans exactly
/// `ceil(n / batch_size)` iterations and visits each index once.
#[derive(Debug, Clone)]
pub struct AnchorSchedule {
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    cursor: usize,
    order: Vec<usize>,
}

impl AnchorSchedule {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        let mut s = Self {
            n,
            batch_size: batch_size.clamp(1, n.max(1)),
            seed,
            epoch: 0,
            cursor: 0,
            order: Vec::new(),
        };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        let mut rng = rng::stream(self.seed, &[rng::DOMAIN_EPOCH, self.epoch]);
        self.order = (0..self.n).collect();
        self.order.shuffle(&mut rng);
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor >= self.n {
            self.epoch += 1;
            self.cursor = 0;
            self.shuffle();
        }
        let end = (self.cursor + self.batch_size).min(self.n);
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }
}

pub fn fit(x: &DataMatrix, cfg: &TrainConfig) -> Result<TrainReport> {
    fit_with_progress(x, cfg, |_| {})
}

pub fn fit_with_progress(
    x: &DataMatrix,
    cfg: &TrainConfig,
    mut progress: impl FnMut(Progress),
) -> Result<TrainReport> {
    let start = Instant::now();
    cfg.validate()?;
    let (n, d) = (x.n(), x.d());
    let rank = cfg.resolved_rank(x)?;
    let max = n.min(d);
    if rank > max {
        return Err(MercatError::RankTooLarge { k: rank, max });
    }
    let mut warnings = Vec::new();

    let dec = pca(x, rank)?;
    let x_hat = dec.scores_matrix()?;
    let init_scores = if rank >= 2 {
        dec.scores.clone()
    } else {
        pca(x, 2.min(max))?.scores
    };
    let initial = match initialize_from_scores(&init_scores, cfg.init) {
        Ok(e) => e,
        Err(MercatError::DegenerateSpread(pc)) => {
            let msg =
                format!("principal component {pc} has no spread; using random initialization");
            log::warn!("{msg}");
            warnings.push(msg);
            jitter_embedding(n, cfg.seed)?
        }
        Err(e) => return Err(e),
    };

    let m = cfg.subsample_m.min(n - 1);
    if m < cfg.subsample_m {
        warnings.push(format!("subsample size reduced to {m} (n = {n})"));
    }
    let mut schedule = AnchorSchedule::new(n, cfg.batch_size, cfg.seed);

    // phi in [0, n), theta in [n, 2n)
    let mut params: Vec<f64> = initial
        .points
        .iter()
        .map(|p| p.phi)
        .chain(initial.points.iter().map(|p| p.theta))
        .collect();
    let mut state = AdamState::new(2 * n);
    let mut grads = vec![0.0; 2 * n];
    let mut current = initial.clone();
    let mut loss_trace = Vec::with_capacity(cfg.iterations);
    let mut dropped_total = 0;

    let steps_per_iteration = match cfg.iteration_unit {
        IterationUnit::Epoch => n.div_ceil(schedule.batch_size),
        IterationUnit::Batch => 1,
    };
    let mut step = 0u64;
    for it in 0..cfg.iterations {
        let lr = cfg.learning_rate_at(it);
        let hp = AdamParams {
            lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        };
        let mut square_sum = 0.0;
        let mut triple_count = 0;
        let mut dropped = 0;
        for _ in 0..steps_per_iteration {
            let anchors = schedule.next_batch();
            let batch = sample_angle_batch(&x_hat, &anchors, m, cfg.seed, step)?;
            step += 1;
            let (loss, g) = match loss_gradient(&batch, &current, cfg.loss_space) {
                Ok(v) => v,
                // all triples degenerate this round; nothing to learn from
                Err(MercatError::EmptyBatch) => {
                    dropped += batch.triple_count() + batch.dropped();
                    continue;
                }
                Err(e) => return Err(e),
            };
            let finite = loss.value.is_finite()
                && g.touched
                    .iter()
                    .all(|&i| g.d_phi[i].is_finite() && g.d_theta[i].is_finite());
            if !finite {
                return Err(MercatError::NonFiniteLoss { iteration: it });
            }
            square_sum += loss.mean_square * loss.triple_count as f64;
            triple_count += loss.triple_count;
            dropped += loss.dropped;

            match cfg.moments {
                MomentMode::Sparse => {
                    let mut indices = Vec::with_capacity(2 * g.touched.len());
                    for &i in &g.touched {
                        grads[i] = g.d_phi[i];
                        grads[n + i] = g.d_theta[i];
                        indices.push(i);
                    }
                    indices.extend(g.touched.iter().map(|&i| n + i));
                    adam_step_sparse(&mut params, &grads, &indices, &mut state, hp);
                    for &i in &g.touched {
                        let p = SpherePoint::new(params[i], params[n + i]).wrapped();
                        params[i] = p.phi;
                        params[n + i] = p.theta;
                        current.points[i] = p;
                    }
                }
                MomentMode::Dense => {
                    grads[..n].copy_from_slice(&g.d_phi);
                    grads[n..].copy_from_slice(&g.d_theta);
                    adam_step(&mut params, &grads, &mut state, hp);
                    for i in 0..n {
                        let p = SpherePoint::new(params[i], params[n + i]).wrapped();
                        params[i] = p.phi;
                        params[n + i] = p.theta;
                        current.points[i] = p;
                    }
                }
            }
        }
        dropped_total += dropped;

        // pooled over every triple seen in this iteration
        let mean_square = if triple_count > 0 {
            square_sum / triple_count as f64
        } else {
            0.0
        };
        let loss = LossValue {
            value: mean_square.sqrt(),
            mean_square,
            triple_count,
            dropped,
        };
        loss_trace.push(IterationRecord {
            iteration: it,
            learning_rate: lr,
            loss,
        });
        progress(Progress {
            iteration: it,
            iterations: cfg.iterations,
            loss: loss.value,
            learning_rate: lr,
        });
    }

    Ok(TrainReport {
        loss_trace,
        initial_embedding: initial,
        final_embedding: current,
        rank,
        dropped_triples_total: dropped_total,
        wall_time: start.elapsed().as_secs_f64(),
        warnings,
    })
}
