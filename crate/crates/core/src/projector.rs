//! Sample splitting and estimation of the projection directions.
//!
//! On one half of the data the covariates are screened by distance
//! correlation with the response, sliced inverse regression is run on the
//! survivors, and each leading inverse-regression direction is sparsified by
//! a cross-validated lasso. The fitted coefficient direction is prepended.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GofError, Result};
use crate::glm::{fit_cv_lasso, Family, FittedModel, DEFAULT_FOLDS};

/// Directions with absolute cosine above this are treated as duplicates.
pub const DEDUP_COSINE: f64 = 0.999;
pub const CONTINUOUS_SLICES: usize = 10;
pub const MAX_DIRECTIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Half {
    D1,
    D2,
}

impl Half {
    pub fn other(self) -> Half {
        match self {
            Half::D1 => Half::D2,
            Half::D2 => Half::D1,
        }
    }
}

impl std::fmt::Display for Half {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Half::D1 => "D1",
            Half::D2 => "D2",
        })
    }
}

/// A random partition of `0..n` into two halves, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub d1: Vec<usize>,
    pub d2: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn indices(&self, half: Half) -> &[usize] {
        match half {
            Half::D1 => &self.d1,
            Half::D2 => &self.d2,
        }
    }

    /// FNV-1a hash of the first half's indices, for reproducibility records.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &i in &self.d1 {
            for b in (i as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Uniformly random split with `|D1| = ceil(n / 2)`.
pub fn split_data(n: usize, seed: u64) -> Result<SplitPlan> {
    if n < 4 {
        return Err(GofError::InvalidArgument(format!(
            "splitting needs at least 4 observations, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let cut = n.div_ceil(2);
    let mut d1 = perm[..cut].to_vec();
    let mut d2 = perm[cut..].to_vec();
    d1.sort_unstable();
    d2.sort_unstable();
    Ok(SplitPlan { d1, d2, seed })
}

/// Double-centered distance matrix of `v` (the V-statistic form).
fn centered_distances(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let mut b = DMatrix::from_fn(n, n, |k, l| (v[k] - v[l]).abs());
    let row_means: Vec<f64> = (0..n).map(|k| b.column(k).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for l in 0..n {
        for k in 0..n {
            b[(k, l)] += grand - row_means[k] - row_means[l];
        }
    }
    b
}

/// Squared distance covariance of `u` with the variable behind `b`, and the
/// squared distance variance of `u`, both times n^2.
fn dcov_terms(u: &[f64], b: &DMatrix<f64>) -> (f64, f64) {
    let n = u.len();
    let mut cross = 0.0;
    let mut sq = 0.0;
    let mut rows = vec![0.0; n];
    for k in 0..n {
        let bk = b.column(k);
        let uk = u[k];
        let mut acc = 0.0;
        for l in (k + 1)..n {
            let d = (uk - u[l]).abs();
            acc += d * bk[l];
            sq += d * d;
            rows[k] += d;
            rows[l] += d;
        }
        cross += acc;
    }
    let nf = n as f64;
    let row_sq: f64 = rows.iter().map(|r| r * r).sum::<f64>() / nf;
    let grand = rows.iter().sum::<f64>() / nf;
    // sum over ordered pairs is twice the upper triangle
    let dvar = 2.0 * sq - 2.0 * row_sq + grand * grand;
    (2.0 * cross, dvar)
}

fn dcor_from_terms(cross: f64, dvar_u: f64, dvar_v: f64) -> f64 {
    let denom = (dvar_u * dvar_v).sqrt();
    if !(denom > 0.0) {
        return 0.0;
    }
    (cross.max(0.0) / denom).sqrt().min(1.0)
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Sample distance correlation.
pub fn distance_correlation(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(GofError::DimensionMismatch(format!(
            "distance correlation of lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() || is_constant(u) || is_constant(v) {
        return Ok(0.0);
    }
    let b = centered_distances(v);
    let (cross, dvar_u) = dcov_terms(u, &b);
    let dvar_v = b.iter().map(|x| x * x).sum::<f64>();
    Ok(dcor_from_terms(cross, dvar_u, dvar_v))
}

/// Distance correlation of every column with the response.
pub fn column_dcor(data: &Dataset) -> Vec<f64> {
    let y = data.y.as_slice();
    if is_constant(y) {
        return vec![0.0; data.p()];
    }
    let b = centered_distances(y);
    let dvar_y = b.iter().map(|x| x * x).sum::<f64>();
    (0..data.p())
        .into_par_iter()
        .map(|j| {
            let u = data.x.column(j);
            let u = u.as_slice();
            if is_constant(u) {
                return 0.0;
            }
            let (cross, dvar_u) = dcov_terms(u, &b);
            dcor_from_terms(cross, dvar_u, dvar_y)
        })
        .collect()
}

/// Screening size `floor((n/2) / ln(n/2))`, at least 2.
pub fn screening_size(n: usize) -> usize {
    let half = n as f64 / 2.0;
    let k = if half > 1.0 {
        (half / half.ln()).floor() as usize
    } else {
        0
    };
    k.max(2)
}

/// Indices of the `k` columns most distance-correlated with the response,
/// in decreasing order of correlation.
pub fn dc_sis_screen(data: &Dataset, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > data.p() {
        return Err(GofError::InvalidArgument(format!(
            "screening size {k} outside 1..={}",
            data.p()
        )));
    }
    Ok(rank_columns(&column_dcor(data))[..k].to_vec())
}

fn rank_columns(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Slice labels for sliced inverse regression: equal-count slices of the
/// sorted response, or the classes of a binary response.
fn slice_labels(y: &DVector<f64>, slices: usize, family: Family) -> Result<(Vec<usize>, usize)> {
    let n = y.len();
    match family {
        Family::Binomial => {
            let labels: Vec<usize> = y.iter().map(|v| usize::from(*v > 0.5)).collect();
            if labels.iter().all(|l| *l == labels[0]) {
                return Err(GofError::TooFewDistinct(2));
            }
            Ok((labels, 2))
        }
        Family::Gaussian => {
            let mut distinct: Vec<f64> = y.iter().copied().collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() < slices {
                return Err(GofError::TooFewDistinct(slices));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
            let mut labels = vec![0; n];
            for (rank, &i) in order.iter().enumerate() {
                labels[i] = rank * slices / n;
            }
            Ok((labels, slices))
        }
    }
}

/// Output of [`sparse_sir`].
#[derive(Debug, Clone)]
pub struct SirFit {
    /// Unit directions in the full covariate space.
    pub directions: Vec<DVector<f64>>,
    /// Eigenvalues of the between-slice covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Structural dimension picked by the eigenvalue-ratio rule, before
    /// empty sparse directions were dropped.
    pub d_selected: usize,
}

/// `argmax_{1<=j<=max_d} lambda_j / lambda_{j+1}` (1-based, earliest wins).
pub fn eigen_ratio_dimension(eigenvalues: &[f64], max_d: usize) -> usize {
    let cap = max_d.min(eigenvalues.len().saturating_sub(1));
    if cap <= 1 {
        return 1;
    }
    let mut best = 1;
    let mut best_ratio = f64::NEG_INFINITY;
    for j in 1..=cap {
        let (num, den) = (eigenvalues[j - 1].max(0.0), eigenvalues[j].max(0.0));
        let ratio = if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > best_ratio {
            best_ratio = ratio;
            best = j;
        }
    }
    best
}

/// Sparse sliced inverse regression on the `screened` columns of `data`.
///
/// Each leading eigenvector `eta` of the between-slice covariance of the
/// standardized screened covariates defines the pseudo-response
/// `m_{h(i)}' eta`, where `m_h` is the mean of slice `h`. A lasso of that
/// pseudo-response on the standardized covariates estimates
/// `Sigma^{-1} eta` sparsely.
pub fn sparse_sir(
    data: &Dataset,
    screened: &[usize],
    family: Family,
    slices: usize,
    max_d: usize,
    seed: u64,
) -> Result<SirFit> {
    let slices = match family {
        Family::Binomial => 2,
        Family::Gaussian => slices,
    };
    if slices < 2 {
        return Err(GofError::InvalidArgument("need at least 2 slices".into()));
    }
    if screened.is_empty() {
        return Err(GofError::InvalidArgument("no screened columns".into()));
    }
    let n = data.n();
    let nf = n as f64;
    let (labels, h) = slice_labels(&data.y, slices, family)?;

    let sub = data.select_columns(screened);
    let q = screened.len();
    let mut z = sub.x.clone();
    let mut scales = vec![0.0; q];
    for j in 0..q {
        let mut col = z.column_mut(j);
        let mean = col.sum() / nf;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
        if sd > 0.0 {
            scales[j] = sd;
            col.apply(|v| *v = (*v - mean) / sd);
        } else {
            col.fill(0.0);
        }
    }

    let mut counts = vec![0usize; h];
    let mut means = DMatrix::<f64>::zeros(q, h);
    for i in 0..n {
        counts[labels[i]] += 1;
        for j in 0..q {
            means[(j, labels[i])] += z[(i, j)];
        }
    }
    for s in 0..h {
        if counts[s] > 0 {
            means.column_mut(s).scale_mut(1.0 / counts[s] as f64);
        }
    }
    let mut between = DMatrix::<f64>::zeros(q, q);
    for s in 0..h {
        let m = means.column(s);
        between.ger(counts[s] as f64 / nf, &m, &m, 1.0);
    }

    let eig = SymmetricEigen::new(between);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let max_d = max_d.min(h - 1).max(1);
    let d_selected = eigen_ratio_dimension(&eigenvalues, max_d);

    let design = Dataset::new(z, data.y.clone())?;
    let directions: Vec<DVector<f64>> = (0..d_selected)
        .into_par_iter()
        .map(|k| -> Result<Option<DVector<f64>>> {
            let eta = eig.eigenvectors.column(order[k]);
            let slice_scores = means.transpose() * eta;
            let pseudo = DVector::from_fn(n, |i, _| slice_scores[labels[i]]);
            let mut pd = design.clone();
            pd.y = pseudo;
            let fit = match fit_cv_lasso(&pd, Family::Gaussian, DEFAULT_FOLDS, seed ^ k as u64) {
                Ok(fit) => fit,
                Err(GofError::DegenerateResponse(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut full = DVector::zeros(data.p());
            for (j, &col) in screened.iter().enumerate() {
                let b = fit.coefficients[j];
                if b != 0.0 && scales[j] > 0.0 {
                    // back to the raw covariate scale
                    full[col] = b / scales[j];
                }
            }
            let norm = full.norm();
            if norm > 0.0 {
                Ok(Some(full / norm))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(SirFit {
        directions,
        eigenvalues,
        d_selected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSource {
    /// Normalized fitted coefficient vector.
    Coefficients,
    /// Sparse inverse-regression direction, 1-based.
    Sir(usize),
    /// Coordinate axis of the top screened covariate.
    Fallback,
}

/// Estimated projection directions, all of unit length.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pub directions: Vec<DVector<f64>>,
    pub sources: Vec<DirectionSource>,
    pub source_half: Half,
    pub warnings: Vec<String>,
}

impl ProjectionSet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Number of inverse-regression directions retained.
    pub fn d_hat(&self) -> usize {
        self.sources
            .iter()
            .filter(|s| matches!(s, DirectionSource::Sir(_)))
            .count()
    }

    pub fn has_coefficient_direction(&self) -> bool {
        self.sources.first() == Some(&DirectionSource::Coefficients)
    }
}

/// Prepends the normalized coefficient direction to the inverse-regression
/// directions and removes near-duplicates, keeping the earliest. When
/// nothing survives, the axis of column `fallback` is used.
pub fn build_projection_set(
    model: &FittedModel,
    sir_dirs: &[DVector<f64>],
    half: Half,
    fallback: usize,
) -> ProjectionSet {
    let mut warnings = Vec::new();
    let mut candidates = Vec::new();
    let norm = model.coefficients.norm();
    if norm > 0.0 {
        candidates.push((
            &model.coefficients / norm,
            DirectionSource::Coefficients,
        ));
    } else {
        warnings.push(format!(
            "{half}: fitted coefficients are all zero; coefficient direction omitted"
        ));
    }
    for (k, d) in sir_dirs.iter().enumerate() {
        let nd = d.norm();
        if nd > 0.0 && nd.is_finite() {
            candidates.push((d / nd, DirectionSource::Sir(k + 1)));
        }
    }

    let mut directions: Vec<DVector<f64>> = Vec::new();
    let mut sources = Vec::new();
    for (d, src) in candidates {
        if directions.iter().any(|e| e.dot(&d).abs() > DEDUP_COSINE) {
            continue;
        }
        directions.push(d);
        sources.push(src);
    }
    if directions.is_empty() {
        warnings.push(format!(
            "{half}: no projection survived; using the axis of column {fallback}"
        ));
        let mut e = DVector::zeros(model.coefficients.len());
        e[fallback] = 1.0;
        directions.push(e);
        sources.push(DirectionSource::Fallback);
    }
    ProjectionSet {
        directions,
        sources,
        source_half: half,
        warnings,
    }
}

/// Tuning of projection estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorConfig {
    pub slices: usize,
    pub max_d: usize,
    /// Overrides the default screening size when set.
    pub screen_size: Option<usize>,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        Self {
            slices: CONTINUOUS_SLICES,
            max_d: MAX_DIRECTIONS,
            screen_size: None,
        }
    }
}

/// Screening, sparse SIR and assembly on one half, given the model fitted
/// on that same half.
pub fn estimate_projections(
    half_data: &Dataset,
    model: &FittedModel,
    family: Family,
    half: Half,
    config: &ProjectorConfig,
    seed: u64,
) -> Result<ProjectionSet> {
    let k = config
        .screen_size
        .unwrap_or_else(|| screening_size(half_data.n()))
        .min(half_data.p());
    let screened = dc_sis_screen(half_data, k)?;
    let mut warnings = Vec::new();
    let sir_dirs = match sparse_sir(half_data, &screened, family, config.slices, config.max_d, seed) {
        Ok(fit) => fit.directions,
        Err(e) => {
            warnings.push(format!("{half}: sparse SIR failed ({e}); no SIR directions"));
            Vec::new()
        }
    };
    let mut set = build_projection_set(model, &sir_dirs, half, screened[0]);
    warnings.append(&mut set.warnings);
    set.warnings = warnings;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn brute_dcor(u: &[f64], v: &[f64]) -> f64 {
        let n = u.len();
        let center = |x: &[f64]| {
            let a: Vec<Vec<f64>> = (0..n)
                .map(|k| (0..n).map(|l| (x[k] - x[l]).abs()).collect())
                .collect();
            let row: Vec<f64> = a.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
            let g = row.iter().sum::<f64>() / n as f64;
            (0..n)
                .map(|k| (0..n).map(|l| a[k][l] - row[k] - row[l] + g).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        let (a, b) = (center(u), center(v));
        let mut xy = 0.0;
        let mut xx = 0.0;
        let mut yy = 0.0;
        for k in 0..n {
            for l in 0..n {
                xy += a[k][l] * b[k][l];
                xx += a[k][l] * a[k][l];
                yy += b[k][l] * b[k][l];
            }
        }
        (xy / (xx * yy).sqrt()).sqrt()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split_data(6, 1).unwrap();
        assert_eq!((s.d1.len(), s.d2.len()), (3, 3));
        let s7 = split_data(7, 1).unwrap();
        assert_eq!((s7.d1.len(), s7.d2.len()), (4, 3));
        let mut all: Vec<usize> = s7.d1.iter().chain(&s7.d2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert_eq!(split_data(50, 9).unwrap(), split_data(50, 9).unwrap());
        assert_ne!(split_data(50, 9).unwrap().d1, split_data(50, 10).unwrap().d1);
        assert!(split_data(3, 0).is_err());
    }

    #[test]
    fn dcor_matches_brute_force() {
        let u = [0.0, 1.0, 2.0];
        let v = [0.0, 1.0, 0.0];
        let fast = distance_correlation(&u, &v).unwrap();
        assert!((fast - brute_dcor(&u, &v)).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..40).map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = u.iter().map(|x: &f64| x.powi(2) + rng.sample::<f64, _>(StandardNormal)).collect();
        let fast = distance_correlation(&u, &v).unwrap();
        assert!((fast - brute_dcor(&u, &v)).abs() < 1e-12);
    }

    #[test]
    fn dcor_is_one_for_affine_maps_and_zero_for_constants() {
        let u = [0.3, -1.0, 2.5, 4.0, 0.0];
        let v: Vec<f64> = u.iter().map(|x| -3.0 * x + 7.0).collect();
        assert!((distance_correlation(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert!((distance_correlation(&u, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(distance_correlation(&u, &[1.0; 5]).unwrap(), 0.0);
        assert!(distance_correlation(&u, &[1.0; 4]).is_err());
    }

    #[test]
    fn screening_ranks_constants_last_and_breaks_ties_by_index() {
        let n = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(n, 4, |i, j| match j {
            0 => 1.0,
            _ => rng.sample::<f64, _>(StandardNormal) + i as f64 * (j == 2) as u8 as f64,
        });
        let y = DVector::from_fn(n, |i, _| i as f64);
        let d = Dataset::new(x, y).unwrap();
        let all = dc_sis_screen(&d, 4).unwrap();
        assert_eq!(all[0], 2);
        assert_eq!(all[3], 0);
        assert!(dc_sis_screen(&d, 0).is_err());
        assert!(dc_sis_screen(&d, 5).is_err());
        assert_eq!(rank_columns(&[0.5, 0.7, 0.5]), vec![1, 0, 2]);
    }

    #[test]
    fn screening_size_rule() {
        assert_eq!(screening_size(300), 29);
        assert_eq!(screening_size(4), 2);
    }

    #[test]
    fn eigen_ratio_rule() {
        assert_eq!(eigen_ratio_dimension(&[5.0, 0.5, 0.4, 0.1], 3), 1);
        assert_eq!(eigen_ratio_dimension(&[5.0, 4.0, 0.1, 0.09], 3), 2);
        assert_eq!(eigen_ratio_dimension(&[5.0, 4.0], 1), 1);
        assert_eq!(eigen_ratio_dimension(&[5.0], 5), 1);
    }

    #[test]
    fn sir_recovers_a_single_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, p) = (400, 20);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = DVector::from_fn(p, |j, _| if j < 5 { 1.0 } else { 0.0 });
        let y = DVector::from_fn(n, |i, _| {
            (x.row(i) * &beta)[0].powi(3) + rng.sample::<f64, _>(StandardNormal)
        });
        let d = Dataset::new(x, y).unwrap();
        let screened: Vec<usize> = (0..p).collect();
        let fit = sparse_sir(&d, &screened, Family::Gaussian, 10, 5, 1).unwrap();
        let cos = fit.directions[0].dot(&beta.normalize()).abs();
        assert!(cos > 0.9, "cos {cos}");
        assert!(fit.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sir_rejects_constant_response_and_caps_binary_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let x = DMatrix::from_fn(60, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let flat = Dataset::new(x.clone(), DVector::from_element(60, 1.0)).unwrap();
        assert!(matches!(
            sparse_sir(&flat, &[0, 1, 2], Family::Gaussian, 10, 5, 0),
            Err(GofError::TooFewDistinct(10))
        ));
        let y = DVector::from_fn(60, |i, _| if x[(i, 0)] + 0.3 * x[(i, 1)] > 0.0 { 1.0 } else { 0.0 });
        let bin = Dataset::new(x, y).unwrap();
        let fit = sparse_sir(&bin, &[0, 1, 2, 3], Family::Binomial, 10, 5, 0).unwrap();
        assert_eq!(fit.d_selected, 1);
        assert!(fit.directions.len() <= 1);
    }

    #[test]
    fn projection_set_rules() {
        let mut beta = DVector::zeros(4);
        beta[0] = 2.0;
        let model = FittedModel::from_coefficients(0.0, beta.clone(), Family::Gaussian);
        let other = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        let set = build_projection_set(&model, &[beta.normalize(), other.clone()], Half::D1, 3);
        assert_eq!(set.len(), 2);
        assert_eq!(set.directions[0], DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
        assert_eq!(set.sources, vec![DirectionSource::Coefficients, DirectionSource::Sir(2)]);
        assert_eq!(set.d_hat(), 1);

        let zero = FittedModel::from_coefficients(1.0, DVector::zeros(4), Family::Gaussian);
        let set = build_projection_set(&zero, &[other], Half::D2, 3);
        assert_eq!(set.len(), 1);
        assert!(!set.has_coefficient_direction());
        assert_eq!(set.warnings.len(), 1);

        let set = build_projection_set(&zero, &[], Half::D2, 3);
        assert_eq!(set.sources, vec![DirectionSource::Fallback]);
        assert_eq!(set.directions[0][3], 1.0);
        for d in &set.directions {
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }
}
