//! Centering, PCA, effective rank, and a spiked-covariance simulator for
//! checking how well spectral and raw angle estimators recover latent
//! angles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angles::{euclidean_cos_angle, unit_direction};
use crate::data::DataMatrix;
use crate::error::{MercatError, Result};
use crate::rng;

/// Leading singular structure of a column-centred data matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// All `min(n, d)` singular values, nonincreasing.
    pub singular_values: Vec<f64>,
    /// `n x k`, orthonormal columns.
    pub left_vectors: DMatrix<f64>,
    /// `d x k`, orthonormal columns (zero where the singular value is zero).
    pub right_vectors: DMatrix<f64>,
    /// `n x k`, left vectors scaled by their singular values.
    pub scores: DMatrix<f64>,
    pub column_means: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn k(&self) -> usize {
        self.scores.ncols()
    }

    /// Scores as a row-major data matrix (one row per sample).
    pub fn scores_matrix(&self) -> Result<DataMatrix> {
        DataMatrix::from_dmatrix(&self.scores)
    }

    /// `scores * right_vectors^T`, i.e. the rank-k approximation of the
    /// centred input.
    pub fn reconstruct_centered(&self) -> DMatrix<f64> {
        &self.scores * self.right_vectors.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaRoute {
    /// SVD of the centred `n x d` matrix.
    Svd,
    /// Eigendecomposition of the `n x n` Gram matrix.
    Gram,
    /// Gram when `d > 2n`, SVD otherwise.
    Auto,
}

pub fn center_columns(x: &DataMatrix) -> (DMatrix<f64>, Vec<f64>) {
    let mut m = x.to_dmatrix();
    let means: Vec<f64> = m.column_iter().map(|c| c.mean()).collect();
    for (mut col, mean) in m.column_iter_mut().zip(&means) {
        col.add_scalar_mut(-mean);
    }
    (m, means)
}

pub fn pca(x: &DataMatrix, k: usize) -> Result<SpectralDecomposition> {
    pca_with(x, k, PcaRoute::Auto)
}

pub fn pca_with(x: &DataMatrix, k: usize, route: PcaRoute) -> Result<SpectralDecomposition> {
    let max = x.n().min(x.d());
    if k == 0 || k > max {
        return Err(MercatError::RankTooLarge { k, max });
    }
    let (centered, column_means) = center_columns(x);
    let route = match route {
        PcaRoute::Auto if x.d() > 2 * x.n() => PcaRoute::Gram,
        PcaRoute::Auto => PcaRoute::Svd,
        r => r,
    };
    let (singular_values, mut left, mut right) = match route {
        PcaRoute::Gram => gram_route(&centered, k),
        _ => svd_route(&centered, k)?,
    };
    fix_signs(&mut left, &mut right);
    let mut scores = left.clone();
    for (j, mut col) in scores.column_iter_mut().enumerate() {
        col *= singular_values[j];
    }
    Ok(SpectralDecomposition {
        singular_values,
        left_vectors: left,
        right_vectors: right,
        scores,
        column_means,
    })
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

fn svd_route(c: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let m = faer::Mat::<f64>::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)]);
    let svd = m
        .thin_svd()
        .map_err(|e| MercatError::InvalidInput(format!("SVD did not converge: {e:?}")))?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let raw: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    let order = sorted_order(&raw);
    let singular_values: Vec<f64> = order.iter().map(|&i| raw[i].max(0.0)).collect();
    let left = DMatrix::from_fn(c.nrows(), k, |r, j| u[(r, order[j])]);
    let right = DMatrix::from_fn(c.ncols(), k, |r, j| v[(r, order[j])]);
    Ok((singular_values, left, right))
}

fn gram_route(c: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let gram = c * c.transpose();
    let eig = SymmetricEigen::new(gram);
    let order = sorted_order(eig.eigenvalues.as_slice());
    let count = c.nrows().min(c.ncols());
    // eigenvalues at rounding level are exact zeros of the centred matrix
    let floor =
        eig.eigenvalues[order[0]].max(0.0) * c.nrows().max(c.ncols()) as f64 * 16.0 * f64::EPSILON;
    let singular_values: Vec<f64> = order
        .iter()
        .take(count)
        .map(|&i| {
            let l = eig.eigenvalues[i];
            if l > floor {
                l.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let left = DMatrix::from_fn(c.nrows(), k, |r, j| eig.eigenvectors[(r, order[j])]);
    let scale = singular_values.first().copied().unwrap_or(0.0).max(1.0);
    let mut right = c.transpose() * &left;
    for (j, mut col) in right.column_iter_mut().enumerate() {
        let s = singular_values[j];
        if s > 1e-12 * scale {
            col /= s;
        } else {
            col.fill(0.0);
        }
    }
    (singular_values, left, right)
}

/// Makes the largest-magnitude entry of every left vector positive.
fn fix_signs(left: &mut DMatrix<f64>, right: &mut DMatrix<f64>) {
    for j in 0..left.ncols() {
        let mut best = 0.0;
        let mut sign = 1.0;
        for v in left.column(j).iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            left.column_mut(j).neg_mut();
            right.column_mut(j).neg_mut();
        }
    }
}

/// Number of singular values above the optimal hard threshold for unknown
/// noise level, `omega(beta) * median`, with `beta = min(n, d) / max(n, d)`.
/// Serves as an automatic denoising rank.
pub fn hard_threshold_rank(singular_values: &[f64], n: usize, d: usize) -> Result<usize> {
    if singular_values.is_empty() || n == 0 || d == 0 {
        return Err(MercatError::BadDims("empty spectrum".into()));
    }
    let mut sorted = singular_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m.is_multiple_of(2) {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    } else {
        sorted[m / 2]
    };
    let tau = hard_threshold_omega(n.min(d) as f64 / n.max(d) as f64) * median;
    Ok(singular_values.iter().filter(|&&s| s > tau).count())
}

/// Cubic approximation of the threshold coefficient for aspect ratio `beta`.
pub fn hard_threshold_omega(beta: f64) -> f64 {
    0.56 * beta.powi(3) - 0.95 * beta.powi(2) + 1.82 * beta + 1.43
}

/// `exp` of the Shannon entropy of the normalized singular values.
pub fn effective_rank(singular_values: &[f64]) -> Result<f64> {
    if singular_values.iter().any(|s| *s < 0.0 || !s.is_finite()) {
        return Err(MercatError::InvalidInput(
            "singular values must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = singular_values.iter().sum();
    if total <= 0.0 {
        return Err(MercatError::AllZero);
    }
    let entropy: f64 = singular_values
        .iter()
        .filter(|s| **s > 0.0)
        .map(|s| {
            let p = s / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// How signal strengths `sigma_i` map to loading variances `lambda_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadingScale {
    /// `lambda_i = sqrt(n / d) sigma_i`, so that
    /// `E[X X^T] / d = I + sqrt(n / d) sum_i sigma_i u_i u_i^T`.
    Population,
    /// `lambda_i = sqrt(d n) sigma_i` on unit-variance loadings. The signal
    /// covariance is `d` times the population one.
    #[default]
    RootDn,
}

impl LoadingScale {
    pub fn lambda(self, n: usize, d: usize, sigma: f64) -> f64 {
        let (n, d) = (n as f64, d as f64);
        match self {
            LoadingScale::Population => (n / d).sqrt() * sigma,
            LoadingScale::RootDn => (n * d).sqrt() * sigma,
        }
    }
}

impl std::str::FromStr for LoadingScale {
    type Err = MercatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "population" => Ok(LoadingScale::Population),
            "root_dn" | "root-dn" => Ok(LoadingScale::RootDn),
            _ => Err(MercatError::BadDims(format!("unknown loading scale '{s}'"))),
        }
    }
}

/// Singular values of a symmetric matrix (absolute eigenvalues), sorted
/// decreasingly.
pub fn symmetric_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Effective rank of the full cosine-angle matrix at each anchor.
pub fn anchor_effective_ranks(x_hat: &DataMatrix, anchors: &[usize]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    anchors
        .par_iter()
        .map(|&a| anchor_angle_spectrum(x_hat, a).and_then(|sv| effective_rank(&sv)))
        .collect()
}

/// Nonzero singular values of the cosine-angle matrix at `anchor`, without
/// forming it. Off the coincident points the matrix is `U U^T` for the
/// `(n - 1) x d` matrix `U` of unit directions, which shares its nonzero
/// spectrum with the `d x d` matrix `U^T U`; each coincident point adds an
/// isolated unit diagonal entry, i.e. one more singular value of 1.
pub fn anchor_angle_spectrum(x_hat: &DataMatrix, anchor: usize) -> Result<Vec<f64>> {
    let (n, d) = (x_hat.n(), x_hat.d());
    if anchor >= n {
        return Err(MercatError::InvalidInput(format!(
            "anchor {anchor} out of range"
        )));
    }
    let origin = x_hat.row(anchor);
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut coincident = 0;
    for j in (0..n).filter(|&j| j != anchor) {
        match unit_direction(origin, x_hat.row(j)) {
            Some(u) => {
                for a in 0..d {
                    for b in a..d {
                        gram[(a, b)] += u[a] * u[b];
                    }
                }
            }
            None => coincident += 1,
        }
    }
    gram.fill_lower_triangle_with_upper_triangle();
    let mut sv = symmetric_singular_values(&gram);
    sv.extend(std::iter::repeat_n(1.0, coincident));
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Low-rank signal plus i.i.d. unit-variance noise, `X = U Y^T + Z`.
#[derive(Debug, Clone)]
pub struct SpikedModel {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub sigmas: Vec<f64>,
    pub scale: LoadingScale,
    /// `n x r` latent factors with orthonormal columns.
    pub u: DMatrix<f64>,
    /// `d x r` loadings; column `i` has i.i.d. entries of variance `lambda_i`.
    pub loadings: DMatrix<f64>,
    pub x: DataMatrix,
}

impl SpikedModel {
    /// The noiseless part `U Y^T`.
    pub fn signal(&self) -> Result<DataMatrix> {
        DataMatrix::from_dmatrix(&(&self.u * self.loadings.transpose()))
    }
}

pub fn generate_spiked(
    n: usize,
    d: usize,
    r: usize,
    sigmas: &[f64],
    seed: u64,
) -> Result<SpikedModel> {
    generate_spiked_with(n, d, r, sigmas, seed, LoadingScale::RootDn)
}

pub fn generate_spiked_with(
    n: usize,
    d: usize,
    r: usize,
    sigmas: &[f64],
    seed: u64,
    scale: LoadingScale,
) -> Result<SpikedModel> {
    if r == 0 || r > n.min(d) || r + 1 > n {
        return Err(MercatError::BadDims(format!(
            "rank {r} must be in 1..=min(n - 1, d) for n = {n}, d = {d}"
        )));
    }
    if sigmas.len() != r {
        return Err(MercatError::BadDims(format!(
            "{} sigmas for rank {r}",
            sigmas.len()
        )));
    }
    if sigmas.iter().any(|s| !s.is_finite() || *s <= 0.0) || sigmas.windows(2).any(|w| w[0] < w[1])
    {
        return Err(MercatError::BadDims(
            "sigmas must be positive and nonincreasing".into(),
        ));
    }
    let mut rng = rng::stream(seed, &[]);
    let mut draw = |rows: usize, cols: usize| {
        // fill column by column for a layout-independent stream order
        let mut m = DMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        m
    };
    let gaussian_u = draw(n, r);
    let mut loadings = draw(d, r);
    let noise = draw(n, d);

    // orthonormal and orthogonal to the all-ones vector, so centring the
    // data leaves the latent subspace untouched
    let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let u = orthonormalize(&gaussian_u, Some(&ones))?;
    for (j, mut col) in loadings.column_iter_mut().enumerate() {
        col *= scale.lambda(n, d, sigmas[j]).sqrt();
    }
    let x = &u * loadings.transpose() + noise;
    Ok(SpikedModel {
        n,
        d,
        r,
        sigmas: sigmas.to_vec(),
        scale,
        u,
        loadings,
        x: DataMatrix::from_dmatrix(&x)?,
    })
}

/// Modified Gram-Schmidt with one re-orthogonalization pass, optionally
/// against a fixed unit vector first.
pub fn orthonormalize(a: &DMatrix<f64>, against: Option<&DVector<f64>>) -> Result<DMatrix<f64>> {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        for _pass in 0..2 {
            if let Some(e) = against {
                let proj = e.dot(&q.column(j));
                q.column_mut(j).axpy(-proj, e, 1.0);
            }
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm < 1e-12 {
            return Err(MercatError::BadDims(format!(
                "column {j} is linearly dependent"
            )));
        }
        q.column_mut(j).unscale_mut(norm);
    }
    Ok(q)
}

fn angle_from_rows(m: &DMatrix<f64>, (i, j, k): (usize, usize, usize)) -> Result<f64> {
    let row = |a: usize| m.row(a).iter().copied().collect::<Vec<f64>>();
    let (ri, rj, rk) = (row(i), row(j), row(k));
    euclidean_cos_angle(&ri, &rj, &rk)
        .map(f64::acos)
        .map_err(|_| MercatError::DegenerateTriple(Some((i, j, k))))
}

fn check_triples(n: usize, triples: &[(usize, usize, usize)]) -> Result<()> {
    for &(i, j, k) in triples {
        if i >= n || j >= n || k >= n {
            return Err(MercatError::InvalidInput(format!(
                "triple ({i}, {j}, {k}) out of range for n = {n}"
            )));
        }
        if i == j || i == k || j == k {
            return Err(MercatError::InvalidInput(format!(
                "triple ({i}, {j}, {k}) has repeated indices"
            )));
        }
    }
    Ok(())
}

/// Angles at `i` between `j` and `k` among rows of the latent factors.
pub fn latent_angles(model: &SpikedModel, triples: &[(usize, usize, usize)]) -> Result<Vec<f64>> {
    check_triples(model.n, triples)?;
    triples
        .iter()
        .map(|&t| angle_from_rows(&model.u, t))
        .collect()
}

/// Angles among rows of the `r` leading left singular vectors of the
/// centred data.
pub fn spectral_angle_estimates(
    x: &DataMatrix,
    r: usize,
    triples: &[(usize, usize, usize)],
) -> Result<Vec<f64>> {
    check_triples(x.n(), triples)?;
    let dec = pca(x, r)?;
    triples
        .iter()
        .map(|&t| angle_from_rows(&dec.left_vectors, t))
        .collect()
}

/// Angles among the raw rows of `x`.
pub fn naive_angle_estimates(
    x: &DataMatrix,
    triples: &[(usize, usize, usize)],
) -> Result<Vec<f64>> {
    check_triples(x.n(), triples)?;
    triples
        .iter()
        .map(|&(i, j, k)| {
            euclidean_cos_angle(x.row(i), x.row(j), x.row(k))
                .map(f64::acos)
                .map_err(|_| MercatError::DegenerateTriple(Some((i, j, k))))
        })
        .collect()
}

/// Uniformly random triples of distinct indices.
pub fn random_triples(n: usize, count: usize, seed: u64) -> Vec<(usize, usize, usize)> {
    let mut rng = rng::stream(seed, &[0x7452_4950]);
    (0..count)
        .map(|_| {
            let s = rand::seq::index::sample(&mut rng, n, 3);
            (s.index(0), s.index(1), s.index(2))
        })
        .collect()
}

/// Error summary of the spectral and raw-data angle estimators against the
/// latent angles of one simulated dataset.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EstimatorReport {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub sigmas: Vec<f64>,
    pub scale: LoadingScale,
    pub seed: u64,
    pub triples: usize,
    pub spectral_mean_error: f64,
    pub spectral_median_error: f64,
    pub naive_mean_error: f64,
    pub naive_median_error: f64,
    /// Spectral estimator strictly better than the raw one in mean error.
    pub ordering_holds: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len().is_multiple_of(2) {
        0.5 * (values[m - 1] + values[m])
    } else {
        values[m]
    }
}

/// Simulates a spiked model and compares `|theta_hat - theta|` against
/// `|theta_bar - theta|` over random triples.
pub fn estimator_comparison(
    n: usize,
    d: usize,
    r: usize,
    sigmas: &[f64],
    triple_count: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    estimator_comparison_with(n, d, r, sigmas, triple_count, seed, LoadingScale::RootDn)
}

pub fn estimator_comparison_with(
    n: usize,
    d: usize,
    r: usize,
    sigmas: &[f64],
    triple_count: usize,
    seed: u64,
    scale: LoadingScale,
) -> Result<EstimatorReport> {
    if triple_count == 0 {
        return Err(MercatError::BadDims("need at least one triple".into()));
    }
    let model = generate_spiked_with(n, d, r, sigmas, seed, scale)?;
    let triples = random_triples(n, triple_count, seed);
    let truth = latent_angles(&model, &triples)?;
    let spectral = spectral_angle_estimates(&model.x, r, &triples)?;
    let naive = naive_angle_estimates(&model.x, &triples)?;
    let mut spectral_err: Vec<f64> = truth
        .iter()
        .zip(&spectral)
        .map(|(t, s)| (t - s).abs())
        .collect();
    let mut naive_err: Vec<f64> = truth
        .iter()
        .zip(&naive)
        .map(|(t, s)| (t - s).abs())
        .collect();
    let count = triple_count as f64;
    let spectral_mean_error = spectral_err.iter().sum::<f64>() / count;
    let naive_mean_error = naive_err.iter().sum::<f64>() / count;
    Ok(EstimatorReport {
        n,
        d,
        r,
        sigmas: sigmas.to_vec(),
        scale,
        seed,
        triples: triple_count,
        spectral_mean_error,
        spectral_median_error: median(&mut spectral_err),
        naive_mean_error,
        naive_median_error: median(&mut naive_err),
        ordering_holds: spectral_mean_error < naive_mean_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, d: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        DataMatrix::new(values, n, d).unwrap()
    }

    /// One-sided Jacobi SVD, written independently of the library path.
    fn jacobi_singular_values(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut u = a.clone();
        let cols = u.ncols();
        let mut v = DMatrix::<f64>::identity(cols, cols);
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..cols {
                for q in p + 1..cols {
                    let alpha: f64 = u.column(p).norm_squared();
                    let beta: f64 = u.column(q).norm_squared();
                    let gamma: f64 = u.column(p).dot(&u.column(q));
                    off = off.max(gamma.abs() / (alpha * beta).sqrt().max(1e-300));
                    if gamma.abs() < 1e-300 {
                        continue;
                    }
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for m in [&mut u, &mut v] {
                        for r in 0..m.nrows() {
                            let (x, y) = (m[(r, p)], m[(r, q)]);
                            m[(r, p)] = c * x - s * y;
                            m[(r, q)] = s * x + c * y;
                        }
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        let sv: Vec<f64> = u.column_iter().map(|c| c.norm()).collect();
        (sv, u, v)
    }

    #[test]
    fn exact_low_rank_scores_preserve_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lift = DMatrix::from_fn(2, 10, |_, _| rng.random_range(-1.0..1.0));
        let q = orthonormalize(&lift.transpose(), None).unwrap().transpose();
        let pts = DMatrix::from_fn(30, 2, |_, _| rng.random_range(-5.0..5.0));
        let x = DataMatrix::from_dmatrix(&(&pts * &q)).unwrap();
        let dec = pca(&x, 2).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let orig = (pts.row(i) - pts.row(j)).norm();
                let emb = (dec.scores.row(i) - dec.scores.row(j)).norm();
                assert_abs_diff_eq!(orig, emb, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn identical_rows_have_zero_spectrum() {
        let x = DataMatrix::from_rows(&vec![vec![1.0, -2.0, 3.5]; 6]).unwrap();
        let dec = pca(&x, 2).unwrap();
        assert!(dec.singular_values.iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn full_rank_matches_jacobi_oracle() {
        let x = random_matrix(8, 5, 11);
        let dec = pca(&x, 5).unwrap();
        let (centered, _) = center_columns(&x);
        assert_abs_diff_eq!(dec.reconstruct_centered(), centered, epsilon = 1e-8);
        let (mut oracle, _, _) = jacobi_singular_values(&centered);
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in dec.singular_values.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn rank_k_error_is_eckart_young_minimum() {
        let x = random_matrix(8, 5, 12);
        let dec = pca(&x, 2).unwrap();
        let (centered, _) = center_columns(&x);
        let err = (&centered - dec.reconstruct_centered()).norm_squared();
        let tail: f64 = dec.singular_values[2..].iter().map(|s| s * s).sum();
        assert_abs_diff_eq!(err, tail, epsilon = 1e-8);
    }

    #[test]
    fn rank_too_large_is_rejected() {
        let x = random_matrix(6, 3, 1);
        assert_eq!(
            pca(&x, 4).unwrap_err(),
            MercatError::RankTooLarge { k: 4, max: 3 }
        );
        assert!(pca(&x, 0).is_err());
    }

    #[test]
    fn gram_and_svd_routes_agree() {
        for (n, d) in [(10, 40), (12, 5)] {
            let x = random_matrix(n, d, 99);
            let a = pca_with(&x, 3, PcaRoute::Svd).unwrap();
            let b = pca_with(&x, 3, PcaRoute::Gram).unwrap();
            for (s, t) in a.singular_values.iter().zip(&b.singular_values) {
                assert_abs_diff_eq!(s, t, epsilon = 1e-8);
            }
            assert_abs_diff_eq!(a.scores, b.scores, epsilon = 1e-8);
            assert_abs_diff_eq!(a.right_vectors, b.right_vectors, epsilon = 1e-8);
        }
    }

    #[test]
    fn left_vectors_are_orthonormal_and_sorted() {
        let x = random_matrix(20, 7, 5);
        let dec = pca(&x, 4).unwrap();
        let gram = dec.left_vectors.transpose() * &dec.left_vectors;
        assert_abs_diff_eq!(gram, DMatrix::identity(4, 4), epsilon = 1e-8);
        assert!(dec.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn effective_rank_references() {
        assert_abs_diff_eq!(effective_rank(&[2.0; 7]).unwrap(), 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            effective_rank(&[4.0, 0.0, 0.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let expected = (-(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln())).exp();
        assert_abs_diff_eq!(
            effective_rank(&[3.0, 1.0]).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expected, 1.7548, epsilon = 1e-4);
        assert_eq!(
            effective_rank(&[0.0, 0.0]).unwrap_err(),
            MercatError::AllZero
        );
    }

    #[test]
    fn angle_spectrum_matches_full_matrix() {
        use crate::angles::full_angle_matrix;
        let mut x = random_matrix(40, 3, 9);
        // a duplicate of the anchor exercises the coincident branch
        let mut rows: Vec<Vec<f64>> = x.rows().map(<[f64]>::to_vec).collect();
        rows[7] = rows[0].clone();
        x = DataMatrix::from_rows(&rows).unwrap();
        for anchor in [0, 5, 39] {
            let fast = anchor_angle_spectrum(&x, anchor).unwrap();
            let full = symmetric_singular_values(&full_angle_matrix(&x, anchor).unwrap().cosines);
            for (i, s) in full.iter().enumerate() {
                assert_abs_diff_eq!(fast.get(i).copied().unwrap_or(0.0), *s, epsilon = 1e-9);
            }
            assert_abs_diff_eq!(
                effective_rank(&fast).unwrap(),
                effective_rank(
                    &full
                        .iter()
                        .map(|s| if *s < 1e-9 { 0.0 } else { *s })
                        .collect::<Vec<_>>()
                )
                .unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn spiked_model_is_deterministic() {
        let a = generate_spiked(30, 20, 2, &[5.0, 3.0], 4).unwrap();
        let b = generate_spiked(30, 20, 2, &[5.0, 3.0], 4).unwrap();
        assert_eq!(a.x, b.x);
        let gram = a.u.transpose() * &a.u;
        assert_abs_diff_eq!(gram, DMatrix::identity(2, 2), epsilon = 1e-8);
    }

    #[test]
    fn spiked_model_rejects_bad_dims() {
        assert!(generate_spiked(10, 10, 0, &[], 1).is_err());
        assert!(generate_spiked(10, 3, 4, &[1.0; 4], 1).is_err());
        assert!(generate_spiked(10, 10, 2, &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn strong_spikes_dominate_spectrum() {
        let model = generate_spiked(60, 80, 3, &[1e4, 1e4, 1e4], 2).unwrap();
        let dec = pca(&model.x, 3).unwrap();
        assert!(dec.singular_values[2] > 10.0 * dec.singular_values[3]);
    }

    #[test]
    fn covariance_diagonal_matches_scale() {
        // mean of diag(X X^T / d) = 1 + sum_k lambda_k ||u_k||^2 / n
        let (n, d) = (50, 5000);
        let sigmas = [50.0, 30.0];
        let root_nd = ((n * d) as f64).sqrt();
        for (scale, lambda_sum) in [
            (
                LoadingScale::Population,
                (n as f64 / d as f64).sqrt() * 80.0,
            ),
            (LoadingScale::RootDn, root_nd * 80.0),
        ] {
            let expected = 1.0 + lambda_sum / n as f64;
            let mut acc = 0.0;
            for seed in 0..20 {
                let m = generate_spiked_with(n, d, 2, &sigmas, seed, scale).unwrap();
                let diag_mean: f64 =
                    m.x.rows()
                        .map(|r| r.iter().map(|v| v * v).sum::<f64>() / d as f64)
                        .sum::<f64>()
                        / n as f64;
                acc += diag_mean;
            }
            assert_abs_diff_eq!(
                acc / 20.0,
                expected,
                epsilon = 3.0 * expected / (d as f64).sqrt()
            );
        }
    }

    #[test]
    fn latent_angle_references() {
        let mut model = generate_spiked(10, 10, 2, &[2.0, 1.0], 1).unwrap();
        model.u = DMatrix::zeros(10, 2);
        model.u[(0, 0)] = 0.0;
        model.u[(1, 0)] = 1.0;
        model.u[(2, 1)] = 1.0;
        model.u[(3, 0)] = 1.0;
        let a = latent_angles(&model, &[(0, 1, 2), (0, 1, 3)]).unwrap();
        assert_abs_diff_eq!(a[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-7);
        assert!(matches!(
            latent_angles(&model, &[(4, 5, 1)]),
            Err(MercatError::DegenerateTriple(_))
        ));
    }

    #[test]
    fn latent_angles_match_direct_formula() {
        let model = generate_spiked(40, 30, 3, &[4.0, 3.0, 2.0], 8).unwrap();
        let triples = random_triples(40, 25, 3);
        let got = latent_angles(&model, &triples).unwrap();
        for (&(i, j, k), g) in triples.iter().zip(&got) {
            let a = model.u.row(j) - model.u.row(i);
            let b = model.u.row(k) - model.u.row(i);
            let expected = (a.dot(&b) / (a.norm() * b.norm())).acos();
            assert_abs_diff_eq!(*g, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn noiseless_spectral_estimates_are_exact() {
        let model = generate_spiked(50, 40, 3, &[5.0, 4.0, 3.0], 21).unwrap();
        let signal = model.signal().unwrap();
        let triples = random_triples(50, 50, 2);
        let truth = latent_angles(&model, &triples).unwrap();
        let est = spectral_angle_estimates(&signal, 3, &triples).unwrap();
        for (t, e) in truth.iter().zip(&est) {
            assert_abs_diff_eq!(t, e, epsilon = 1e-6);
        }
    }

    #[test]
    fn naive_estimates_on_exact_factors() {
        let model = generate_spiked(20, 3, 3, &[3.0, 2.0, 1.0], 6).unwrap();
        let x = DataMatrix::from_dmatrix(&model.u).unwrap();
        let triples = random_triples(20, 30, 1);
        let truth = latent_angles(&model, &triples).unwrap();
        let naive = naive_angle_estimates(&x, &triples).unwrap();
        for (t, e) in truth.iter().zip(&naive) {
            assert_abs_diff_eq!(t, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn naive_estimates_reject_coincident_rows() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        assert!(matches!(
            naive_angle_estimates(&x, &[(0, 1, 2)]),
            Err(MercatError::DegenerateTriple(_))
        ));
    }

    #[test]
    fn column_permutation_leaves_spectral_estimates_unchanged() {
        let model = generate_spiked(40, 25, 2, &[20.0, 10.0], 3).unwrap();
        let mut perm: Vec<usize> = (0..25).rev().collect();
        perm.swap(3, 17);
        let shuffled = model.x.permute_columns(&perm).unwrap();
        let triples = random_triples(40, 40, 4);
        let a = spectral_angle_estimates(&model.x, 2, &triples).unwrap();
        let b = spectral_angle_estimates(&shuffled, 2, &triples).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn threshold_coefficient_at_square_aspect() {
        // tabulated value for square matrices is 2.858
        assert!((hard_threshold_omega(1.0) - 2.858).abs() < 0.01);
    }

    #[test]
    fn threshold_rank_ignores_pure_noise() {
        for seed in 0..5 {
            let x = random_matrix(200, 100, seed);
            let sv = pca(&x, 1).unwrap().singular_values;
            assert_eq!(hard_threshold_rank(&sv, 200, 100).unwrap(), 0);
        }
    }

    #[test]
    fn threshold_rank_recovers_strong_spikes() {
        for seed in 0..5 {
            let model = generate_spiked(200, 100, 3, &[40.0, 30.0, 20.0], seed).unwrap();
            let sv = pca(&model.x, 1).unwrap().singular_values;
            assert_eq!(hard_threshold_rank(&sv, 200, 100).unwrap(), 3);
        }
    }

    #[test]
    fn high_snr_spectral_beats_naive() {
        let report = estimator_comparison(300, 300, 3, &[100.0; 3], 200, 1).unwrap();
        assert!(
            report.spectral_mean_error < 0.05 && report.ordering_holds,
            "{report:?}"
        );
    }

    #[test]
    fn population_scale_is_d_times_weaker() {
        let (n, d) = (300, 300);
        assert_abs_diff_eq!(
            LoadingScale::RootDn.lambda(n, d, 100.0),
            d as f64 * LoadingScale::Population.lambda(n, d, 100.0),
            epsilon = 1e-9
        );
        let report =
            estimator_comparison_with(n, d, 3, &[100.0; 3], 200, 1, LoadingScale::Population)
                .unwrap();
        assert!(report.ordering_holds, "{report:?}");
        // overlap^2 of each sample eigenvector with the truth is about
        // (1 - phi / s^2) / (1 + phi / s) with s = 100: roughly 10% of each
        // estimated row is noise, so angle errors sit near 0.08
        assert!(
            (0.04..0.15).contains(&report.spectral_mean_error),
            "{report:?}"
        );
    }

    #[test]
    fn moderate_snr_median_ordering() {
        for (n, d) in [(100, 200), (150, 150), (200, 100)] {
            let report = estimator_comparison(n, d, 2, &[5.0, 5.0], 100, 7).unwrap();
            assert!(
                report.spectral_median_error < report.naive_median_error,
                "{report:?}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pca_is_shift_invariant(seed in 0u64..1000, shift in prop::collection::vec(-50.0..50.0f64, 4)) {
            let x = random_matrix(12, 4, seed);
            let shifted: Vec<Vec<f64>> = x.rows().map(|r| r.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
            let y = DataMatrix::from_rows(&shifted).unwrap();
            let a = pca(&x, 3).unwrap();
            let b = pca(&y, 3).unwrap();
            prop_assert!((a.scores - b.scores).amax() < 1e-8);
        }

        #[test]
        fn effective_rank_is_scale_invariant(values in prop::collection::vec(0.0..10.0f64, 1..12), c in 1e-3..1e3f64) {
            prop_assume!(values.iter().any(|v| *v > 1e-6));
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let a = effective_rank(&values).unwrap();
            let b = effective_rank(&scaled).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
            let nonzero = values.iter().filter(|v| **v > 0.0).count() as f64;
            prop_assert!(a >= 1.0 - 1e-12 && a <= nonzero + 1e-9);
        }

        #[test]
        fn full_rank_reconstruction(seed in 0u64..1000) {
            let x = random_matrix(9, 4, seed);
            let dec = pca(&x, 4).unwrap();
            let (centered, _) = center_columns(&x);
            prop_assert!((dec.reconstruct_centered() - centered).amax() < 1e-8);
        }
    }
}
