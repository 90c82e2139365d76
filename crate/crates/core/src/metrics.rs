//! Embedding quality: how well angles, distances, neighbourhoods and local
//! densities of the source data survive on the sphere.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::{draw_context, for_each_pair, unit_direction};
use crate::data::{squared_distance, DataMatrix};
use crate::error::{MercatError, Result};
use crate::geometry::{arc_between, geodesic_angle_vec, SphereEmbedding};
use crate::rng;
use crate::spectral::pca;

/// Fractional ranks starting at 1, ties sharing their average rank.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(MercatError::InvalidInput(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 2 {
        return Err(MercatError::InvalidInput(
            "need at least two observations".into(),
        ));
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu <= 0.0 || svv <= 0.0 {
        return Err(MercatError::ConstantVector);
    }
    Ok((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

pub fn spearman(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(MercatError::InvalidInput(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    pearson(&fractional_ranks(u), &fractional_ranks(v))
}

fn check_rows(x: &DataMatrix, y: &SphereEmbedding) -> Result<()> {
    if x.n() != y.len() {
        return Err(MercatError::RowMismatch {
            data: x.n(),
            embedding: y.len(),
        });
    }
    Ok(())
}

/// Spearman correlation between all pairwise Euclidean distances in `x` and
/// great-circle distances in `y`.
pub fn distance_preservation(x: &DataMatrix, y: &SphereEmbedding) -> Result<f64> {
    check_rows(x, y)?;
    let n = x.n();
    let vecs = y.unit_vectors();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let hi = (i + 1..n)
                .map(|j| squared_distance(x.row(i), x.row(j)).sqrt())
                .collect();
            let lo = (i + 1..n)
                .map(|j| arc_between(&vecs[i], &vecs[j]))
                .collect();
            (hi, lo)
        })
        .collect();
    let (hi, lo): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().unzip();
    spearman(&hi.concat(), &lo.concat())
}

/// Indices of the `k` nearest points to `i` under `dist`, ties broken by
/// the smaller index.
fn knn(n: usize, i: usize, k: usize, dist: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(j), j)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    let mut idx: Vec<usize> = cand.into_iter().map(|(_, j)| j).collect();
    idx.sort_unstable();
    idx
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    // both sorted
    let (mut i, mut j, mut inter) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Mean Jaccard index between the `k`-nearest-neighbour sets of every point
/// in the rank-`rank` denoised data and on the sphere.
pub fn neighborhood_preservation(
    x: &DataMatrix,
    y: &SphereEmbedding,
    k: usize,
    rank: usize,
) -> Result<f64> {
    check_rows(x, y)?;
    let n = x.n();
    if k == 0 || k >= n {
        return Err(MercatError::KTooLarge { k, n });
    }
    let denoised = pca(x, rank)?.scores_matrix()?;
    neighborhood_jaccard(&denoised, y, k)
}

/// Neighbourhood score against the given high-dimensional coordinates
/// without further denoising.
pub fn neighborhood_jaccard(x: &DataMatrix, y: &SphereEmbedding, k: usize) -> Result<f64> {
    check_rows(x, y)?;
    let n = x.n();
    if k == 0 || k >= n {
        return Err(MercatError::KTooLarge { k, n });
    }
    let vecs = y.unit_vectors();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let hi = knn(n, i, k, |j| squared_distance(x.row(i), x.row(j)));
            let lo = knn(n, i, k, |j| arc_between(&vecs[i], &vecs[j]));
            jaccard(&hi, &lo)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / n as f64)
}

/// Per-point counts of other points within the mean `nn`-th neighbour
/// distance (boundary inclusive).
fn density_counts(n: usize, nn: usize, dist: impl Fn(usize, usize) -> f64 + Sync) -> Vec<f64> {
    let kth: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(i, j)).collect();
            let (_, v, _) = d.select_nth_unstable_by(nn - 1, f64::total_cmp);
            *v
        })
        .collect();
    let radius = kth.iter().sum::<f64>() / n as f64;
    (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| j != i && dist(i, j) <= radius).count() as f64)
        .collect()
}

/// Pearson correlation of fixed-radius neighbour counts in `x` (Euclidean)
/// and on the sphere (arc length).
pub fn density_preservation(x: &DataMatrix, y: &SphereEmbedding, nn: usize) -> Result<f64> {
    check_rows(x, y)?;
    let n = x.n();
    if nn == 0 || nn >= n {
        return Err(MercatError::KTooLarge { k: nn, n });
    }
    let vecs = y.unit_vectors();
    let hi = density_counts(n, nn, |i, j| squared_distance(x.row(i), x.row(j)).sqrt());
    let lo = density_counts(n, nn, |i, j| arc_between(&vecs[i], &vecs[j]));
    pearson(&hi, &lo)
}

/// Pearson correlation between data angles and sphere angles over `m`
/// random contexts per anchor and all their pairs.
pub fn angle_preservation(x: &DataMatrix, y: &SphereEmbedding, m: usize, seed: u64) -> Result<f64> {
    check_rows(x, y)?;
    let n = x.n();
    if m > n - 1 {
        return Err(MercatError::SubsampleTooLarge {
            m,
            available: n - 1,
        });
    }
    let vecs = y.unit_vectors();
    let per_anchor: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ctx = draw_context(n, i, m, seed, rng::DOMAIN_METRIC_ANGLE, 0);
            let dirs: Vec<Option<Vec<f64>>> = ctx
                .iter()
                .map(|&j| unit_direction(x.row(i), x.row(j)))
                .collect();
            let mut hi = Vec::new();
            let mut lo = Vec::new();
            for_each_pair(ctx.len(), |a, b| {
                let (Some(da), Some(db)) = (&dirs[a], &dirs[b]) else {
                    return;
                };
                let Ok(sphere) = geodesic_angle_vec(&vecs[i], &vecs[ctx[a]], &vecs[ctx[b]]) else {
                    return;
                };
                let c: f64 = da.iter().zip(db).map(|(p, q)| p * q).sum();
                hi.push(c.clamp(-1.0, 1.0).acos());
                lo.push(sphere);
            });
            (hi, lo)
        })
        .collect();
    let (hi, lo): (Vec<Vec<f64>>, Vec<Vec<f64>>) = per_anchor.into_iter().unzip();
    let (hi, lo) = (hi.concat(), lo.concat());
    if hi.len() < 2 {
        return Err(MercatError::EmptyCollection);
    }
    pearson(&hi, &lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub k_nn: usize,
    pub density_nn: usize,
    pub angle_subsample: usize,
    pub seed: u64,
    /// Denoising rank for the neighbourhood score; `min(50, n, d)` if unset.
    pub rank: Option<usize>,
    /// Measure data angles on the denoised scores instead of raw rows.
    pub angle_on_denoised: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            k_nn: 50,
            density_nn: 25,
            angle_subsample: 64,
            seed: 0,
            rank: None,
            angle_on_denoised: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub angle_preservation: f64,
    pub distance_preservation: f64,
    /// Raw mean Jaccard index, in `[0, 1]`.
    pub neighborhood_preservation: f64,
    pub density_preservation: f64,
    pub k_nn: usize,
    pub density_nn: usize,
    pub angle_subsample: usize,
    pub rank: usize,
    pub seed: u64,
}

impl MetricsReport {
    pub fn scores(&self) -> [(&'static str, f64); 4] {
        [
            ("angle_preservation", self.angle_preservation),
            ("distance_preservation", self.distance_preservation),
            ("neighborhood_preservation", self.neighborhood_preservation),
            ("density_preservation", self.density_preservation),
        ]
    }

    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.scores() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!(
            "k_nn={}\ndensity_nn={}\nangle_subsample={}\nrank={}\nseed={}\n",
            self.k_nn, self.density_nn, self.angle_subsample, self.rank, self.seed
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in self.scores() {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

pub fn evaluate(x: &DataMatrix, y: &SphereEmbedding, cfg: &MetricsConfig) -> Result<MetricsReport> {
    check_rows(x, y)?;
    let rank = cfg.rank.unwrap_or_else(|| 50.min(x.n()).min(x.d()));
    let denoised = pca(x, rank)?.scores_matrix()?;
    let angle_source = if cfg.angle_on_denoised { &denoised } else { x };
    let m = cfg.angle_subsample.min(x.n() - 1);
    Ok(MetricsReport {
        angle_preservation: angle_preservation(angle_source, y, m, cfg.seed)?,
        distance_preservation: distance_preservation(x, y)?,
        neighborhood_preservation: neighborhood_jaccard(&denoised, y, cfg.k_nn).map_err(
            |e| match e {
                MercatError::KTooLarge { .. } => MercatError::KTooLarge {
                    k: cfg.k_nn,
                    n: x.n(),
                },
                e => e,
            },
        )?,
        density_preservation: density_preservation(x, y, cfg.density_nn)?,
        k_nn: cfg.k_nn,
        density_nn: cfg.density_nn,
        angle_subsample: m,
        rank,
        seed: cfg.seed,
    })
}

/// Lifts planar points onto a small cap around the equator point `(1,0,0)`
/// so that arc length matches planar distance up to `scale`.
#[doc(hidden)]
pub fn cap_embedding(points: &[(f64, f64)], scale: f64) -> Result<SphereEmbedding> {
    let vecs: Vec<Vector3<f64>> = points
        .iter()
        .map(|&(a, b)| {
            let (u, v) = (a * scale, b * scale);
            let r = (u * u + v * v).sqrt();
            if r == 0.0 {
                Vector3::new(1.0, 0.0, 0.0)
            } else {
                // exponential map: arc distance from the centre equals r
                Vector3::new(r.cos(), r.sin() * u / r, r.sin() * v / r)
            }
        })
        .collect();
    SphereEmbedding::from_vectors(&vecs)
}
