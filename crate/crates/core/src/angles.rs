//! Cosines of Euclidean angles among data points, and the per-anchor random
//! context sampling that feeds the training objective.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{MercatError, Result};
use crate::rng;

/// Minimum separation for a neighbour to define a direction at the anchor.
pub const COINCIDENT_EPS: f64 = 1e-12;

/// Cosine of the angle at `xi` between `xj` and `xk`.
pub fn euclidean_cos_angle(xi: &[f64], xj: &[f64], xk: &[f64]) -> Result<f64> {
    let mut dot = 0.0;
    let mut nj = 0.0;
    let mut nk = 0.0;
    for ((a, b), c) in xi.iter().zip(xj).zip(xk) {
        let u = b - a;
        let v = c - a;
        dot += u * v;
        nj += u * u;
        nk += v * v;
    }
    let (nj, nk) = (nj.sqrt(), nk.sqrt());
    if nj <= COINCIDENT_EPS || nk <= COINCIDENT_EPS {
        return Err(MercatError::DegenerateTriple(None));
    }
    Ok((dot / (nj * nk)).clamp(-1.0, 1.0))
}

/// Unit direction from `anchor` to `other`, or `None` when they coincide.
pub(crate) fn unit_direction(anchor: &[f64], other: &[f64]) -> Option<Vec<f64>> {
    let diff: Vec<f64> = other.iter().zip(anchor).map(|(b, a)| b - a).collect();
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > COINCIDENT_EPS).then(|| diff.into_iter().map(|v| v / norm).collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Number of unordered pairs among `m` items.
pub fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Calls `f(a, b)` for every context position pair `a < b`, in pair order.
pub fn for_each_pair(m: usize, mut f: impl FnMut(usize, usize)) {
    for a in 0..m {
        for b in a + 1..m {
            f(a, b);
        }
    }
}

/// Contexts drawn for one anchor and the high-dimensional cosines of all
/// context pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSample {
    pub anchor: usize,
    /// Context indices that do not coincide with the anchor.
    pub context: Vec<usize>,
    /// `C(context.len(), 2)` cosines in pair order.
    pub target_cos: Vec<f64>,
    /// Triples lost to contexts coinciding with the anchor.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AngleBatch {
    pub samples: Vec<AnchorSample>,
}

impl AngleBatch {
    pub fn triple_count(&self) -> usize {
        self.samples.iter().map(|s| s.target_cos.len()).sum()
    }

    pub fn dropped(&self) -> usize {
        self.samples.iter().map(|s| s.dropped).sum()
    }

    pub fn anchors(&self) -> impl Iterator<Item = usize> + '_ {
        self.samples.iter().map(|s| s.anchor)
    }
}

/// Draws `m` distinct contexts uniformly from `[n] \ {anchor}`.
pub fn draw_context(
    n: usize,
    anchor: usize,
    m: usize,
    seed: u64,
    domain: u64,
    iteration: u64,
) -> Vec<usize> {
    let mut rng = rng::stream(seed, &[domain, iteration, anchor as u64]);
    rand::seq::index::sample(&mut rng, n - 1, m)
        .into_iter()
        .map(|j| if j >= anchor { j + 1 } else { j })
        .collect()
}

fn anchor_sample(x_hat: &DataMatrix, anchor: usize, drawn: Vec<usize>) -> AnchorSample {
    let m = drawn.len();
    let origin = x_hat.row(anchor);
    let mut context = Vec::with_capacity(m);
    let mut dirs = Vec::with_capacity(m);
    for j in drawn {
        if let Some(u) = unit_direction(origin, x_hat.row(j)) {
            context.push(j);
            dirs.push(u);
        }
    }
    let mut target_cos = Vec::with_capacity(pair_count(dirs.len()));
    for_each_pair(dirs.len(), |a, b| {
        target_cos.push(dot(&dirs[a], &dirs[b]).clamp(-1.0, 1.0));
    });
    AnchorSample {
        anchor,
        dropped: pair_count(m) - target_cos.len(),
        context,
        target_cos,
    }
}

/// Builds the angle batch for `anchors` at training step `iteration`.
///
/// Each anchor gets its own random stream derived from
/// `(seed, iteration, anchor)`, so the batch does not depend on how the
/// anchors are scheduled across threads.
pub fn sample_angle_batch(
    x_hat: &DataMatrix,
    anchors: &[usize],
    m: usize,
    seed: u64,
    iteration: u64,
) -> Result<AngleBatch> {
    let n = x_hat.n();
    if m > n - 1 {
        return Err(MercatError::SubsampleTooLarge {
            m,
            available: n - 1,
        });
    }
    if let Some(&bad) = anchors.iter().find(|&&a| a >= n) {
        return Err(MercatError::InvalidInput(format!(
            "anchor {bad} out of range for n = {n}"
        )));
    }
    let samples = anchors
        .par_iter()
        .map(|&anchor| {
            let drawn = draw_context(n, anchor, m, seed, rng::DOMAIN_CONTEXT, iteration);
            anchor_sample(x_hat, anchor, drawn)
        })
        .collect();
    Ok(AngleBatch { samples })
}

/// All cosines at one anchor, `Theta_i[j, k] = cos(angle x_j x_i x_k)` over
/// the other `n - 1` points.
#[derive(Debug, Clone)]
pub struct AngleMatrix {
    pub anchor: usize,
    /// Data index of each row/column.
    pub others: Vec<usize>,
    pub cosines: DMatrix<f64>,
    /// Indices (into `others`) of points coinciding with the anchor; their
    /// off-diagonal entries hold `0.0`.
    pub degenerate: Vec<usize>,
}

pub fn full_angle_matrix(x_hat: &DataMatrix, anchor: usize) -> Result<AngleMatrix> {
    let n = x_hat.n();
    if anchor >= n {
        return Err(MercatError::InvalidInput(format!(
            "anchor {anchor} out of range"
        )));
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != anchor).collect();
    let origin = x_hat.row(anchor);
    let dirs: Vec<Option<Vec<f64>>> = others
        .iter()
        .map(|&j| unit_direction(origin, x_hat.row(j)))
        .collect();
    let size = others.len();
    let mut cosines = DMatrix::identity(size, size);
    for a in 0..size {
        for b in a + 1..size {
            let c = match (&dirs[a], &dirs[b]) {
                (Some(u), Some(v)) => dot(u, v).clamp(-1.0, 1.0),
                _ => 0.0,
            };
            cosines[(a, b)] = c;
            cosines[(b, a)] = c;
        }
    }
    let degenerate = dirs
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_none())
        .map(|(i, _)| i)
        .collect();
    Ok(AngleMatrix {
        anchor,
        others,
        cosines,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(
            (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect(),
            n,
            d,
        )
        .unwrap()
    }

    #[test]
    fn cos_angle_references() {
        assert_abs_diff_eq!(
            euclidean_cos_angle(&[0., 0.], &[1., 0.], &[0., 1.]).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            euclidean_cos_angle(&[0., 0.], &[1., 1.], &[3., 3.]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            euclidean_cos_angle(&[0., 0.], &[1., 0.], &[1., 1.]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert!(matches!(
            euclidean_cos_angle(&[1., 1.], &[1., 1.], &[0., 1.]),
            Err(MercatError::DegenerateTriple(None))
        ));
    }

    #[test]
    fn exhaustive_batch_reproduces_full_matrix() {
        let x = random_data(9, 3, 2);
        let batch = sample_angle_batch(&x, &[4], 8, 7, 0).unwrap();
        let s = &batch.samples[0];
        let full = full_angle_matrix(&x, 4).unwrap();
        let pos = |j: usize| full.others.iter().position(|&o| o == j).unwrap();
        let mut sorted = s.context.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, full.others);
        let mut t = 0;
        for_each_pair(s.context.len(), |a, b| {
            assert_eq!(
                s.target_cos[t],
                full.cosines[(pos(s.context[a]), pos(s.context[b]))]
            );
            t += 1;
        });
        assert_eq!(t, 28);
    }

    #[test]
    fn batch_is_deterministic_and_excludes_anchor() {
        let x = random_data(30, 4, 1);
        let anchors: Vec<usize> = (0..30).collect();
        let a = sample_angle_batch(&x, &anchors, 10, 5, 3).unwrap();
        let b = sample_angle_batch(&x, &anchors, 10, 5, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_angle_batch(&x, &anchors, 10, 5, 4).unwrap();
        assert_ne!(a, c);
        for s in &a.samples {
            assert!(!s.context.contains(&s.anchor));
            let mut ctx = s.context.clone();
            ctx.sort_unstable();
            ctx.dedup();
            assert_eq!(ctx.len(), 10);
            assert_eq!(s.target_cos.len(), 45);
        }
    }

    #[test]
    fn context_draws_are_uniform() {
        // n = 10, m = 4: each non-anchor index appears with probability 4/9.
        let mut counts = [0usize; 10];
        let draws = 10_000;
        for it in 0..draws {
            for j in draw_context(10, 3, 4, 12, rng::DOMAIN_CONTEXT, it) {
                counts[j] += 1;
            }
        }
        assert_eq!(counts[3], 0);
        for (j, &c) in counts.iter().enumerate().filter(|(j, _)| *j != 3) {
            let freq = c as f64 / draws as f64;
            assert!((freq - 4.0 / 9.0).abs() < 0.02, "index {j}: {freq}");
        }
    }

    #[test]
    fn oversized_subsample_is_rejected() {
        let x = random_data(5, 2, 1);
        assert_eq!(
            sample_angle_batch(&x, &[0], 5, 1, 0).unwrap_err(),
            MercatError::SubsampleTooLarge { m: 5, available: 4 }
        );
    }

    #[test]
    fn coincident_contexts_are_dropped_and_counted() {
        let x = DataMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let batch = sample_angle_batch(&x, &[0], 4, 3, 0).unwrap();
        let s = &batch.samples[0];
        assert!(!s.context.contains(&1));
        assert_eq!(s.context.len(), 3);
        assert_eq!(s.target_cos.len(), 3);
        assert_eq!(s.dropped, 3);
    }

    #[test]
    fn equilateral_and_collinear_matrices() {
        let h = 3f64.sqrt() / 2.0;
        let tri = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]).unwrap();
        for anchor in 0..3 {
            let m = full_angle_matrix(&tri, anchor).unwrap();
            assert_abs_diff_eq!(m.cosines[(0, 1)], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(m.cosines[(1, 0)], 0.5, epsilon = 1e-12);
            assert_eq!(m.cosines[(0, 0)], 1.0);
        }
        let line =
            DataMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let m = full_angle_matrix(&line, 1).unwrap();
        assert_abs_diff_eq!(m.cosines[(0, 1)], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn full_matrix_matches_per_entry_oracle() {
        let x = random_data(6, 3, 8);
        let m = full_angle_matrix(&x, 2).unwrap();
        for (a, &j) in m.others.iter().enumerate() {
            for (b, &k) in m.others.iter().enumerate() {
                let expected = if a == b {
                    1.0
                } else {
                    euclidean_cos_angle(x.row(2), x.row(j), x.row(k)).unwrap()
                };
                assert_abs_diff_eq!(m.cosines[(a, b)], expected, epsilon = 1e-12);
            }
        }
        assert!(m.degenerate.is_empty());
    }

    #[test]
    fn angle_matrix_of_rank_r_scores_is_low_rank() {
        let x = random_data(40, 2, 4);
        let m = full_angle_matrix(&x, 0).unwrap();
        let sv = m.cosines.singular_values();
        let er = crate::spectral::effective_rank(sv.as_slice()).unwrap();
        assert!(er <= 3.5, "effective rank {er}");
        // rank of D^-1/2 V V^T D^-1/2 is at most 2
        assert!(sv.iter().filter(|s| **s > 1e-8).count() <= 2);
    }

    proptest! {
        #[test]
        fn cos_angle_is_similarity_invariant(
            pts in prop::collection::vec(-5.0..5.0f64, 9),
            shift in prop::collection::vec(-10.0..10.0f64, 3),
            scale in 0.1..10.0f64,
            angle in 0.0..std::f64::consts::TAU,
        ) {
            let (xi, xj, xk) = (&pts[0..3], &pts[3..6], &pts[6..9]);
            let base = euclidean_cos_angle(xi, xj, xk);
            prop_assume!(base.is_ok());
            let (s, c) = angle.sin_cos();
            let map = |p: &[f64]| -> Vec<f64> {
                let rot = [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
                rot.iter().zip(&shift).map(|(v, t)| scale * v + t).collect()
            };
            let moved = euclidean_cos_angle(&map(xi), &map(xj), &map(xk)).unwrap();
            prop_assert!((base.unwrap() - moved).abs() < 1e-10);
        }
    }
}
