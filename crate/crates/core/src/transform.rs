//! The estimated martingale transformation of a projected process and the
//! Cramer-von Mises statistic built on it.
//!
//! Everything is discretized on the empirical measure of the projected
//! sample. With score vectors `A_k` and point weights `w_k` (the jumps of the
//! variance measure times `n`),
//!
//! ```text
//! Gamma_k = n^{-1} sum_{z_j >= z_k} w_j A_j A_j'
//! H_k     =        sum_{z_j >= z_k} A_j dR_j
//! TR_k    = R_k - n^{-1} sum_{z_i <= z_k} w_i A_i' Gamma_i^{-1} H_i
//! ```
//!
//! Any process whose increments are `n^{-1} w_j c'A_j` is mapped to zero, which
//! is what removes the parameter-estimation drift.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GofError, Result};
use crate::glm::FittedModel;
use crate::kernel::{estimate_nuisance_curves, NuisanceCurves};
use crate::nulldist::cvm_bm_pvalue;
use crate::process::{grouped_cumsum, marked_process, project, ProcessTable};

const CONDITION_LIMIT: f64 = 1e12;

/// How the variance measure and score vectors are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Kernel-estimated conditional variance and derivative curves.
    General,
    /// Constant error variance; no smoothing.
    Homoscedastic,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "general" => Ok(Mode::General),
            "homoscedastic" => Ok(Mode::Homoscedastic),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::General => "general",
            Mode::Homoscedastic => "homoscedastic",
        })
    }
}

/// Score vectors `z_k / sigma2` at the sorted points, as an `n x 1` matrix.
pub fn scores_homoscedastic(z_sorted: &[f64], sigma2: f64, intercept: bool) -> DMatrix<f64> {
    let n = z_sorted.len();
    if intercept {
        DMatrix::from_fn(n, 2, |k, j| if j == 0 { 1.0 / sigma2 } else { z_sorted[k] / sigma2 })
    } else {
        DMatrix::from_fn(n, 1, |k, _| z_sorted[k] / sigma2)
    }
}

/// Score vectors `(z g1 / sigma2, g2 / sigma2)` at the sorted points, with
/// the curves given in the same sorted order.
pub fn scores_general(z_sorted: &[f64], curves: &NuisanceCurves, intercept: bool) -> DMatrix<f64> {
    let n = z_sorted.len();
    let offset = usize::from(intercept);
    DMatrix::from_fn(n, 2 + offset, |k, j| {
        let s = curves.sigma2[k];
        match j as isize - offset as isize {
            -1 => curves.g1[k] / s,
            0 => z_sorted[k] * curves.g1[k] / s,
            _ => curves.g2[k] / s,
        }
    })
}

/// Right-tail sums `Gamma_k` and `H_k` for every sorted position.
pub fn compute_gamma_and_h(
    table: &ProcessTable,
    scores: &DMatrix<f64>,
    weights: &[f64],
    increments: &[f64],
) -> (Vec<DMatrix<f64>>, Vec<DVector<f64>>) {
    let n = table.len();
    let m = scores.ncols();
    let nf = n as f64;
    let mut gamma_raw = vec![DMatrix::zeros(m, m); n];
    let mut h_raw = vec![DVector::zeros(m); n];
    let mut g = DMatrix::zeros(m, m);
    let mut h = DVector::zeros(m);
    for k in (0..n).rev() {
        let a = scores.row(k).transpose();
        g.ger(weights[k] / nf, &a, &a, 1.0);
        h.axpy(increments[k], &a, 1.0);
        gamma_raw[k].copy_from(&g);
        h_raw[k].copy_from(&h);
    }
    let gamma = table.group_start.iter().map(|&s| gamma_raw[s].clone()).collect();
    let hv = table.group_start.iter().map(|&s| h_raw[s].clone()).collect();
    (gamma, hv)
}

/// Solves `Gamma x = h`, adding a ridge when `Gamma` is ill-conditioned.
/// Returns the solution and whether the ridge was needed.
fn regularized_solve(gamma: &DMatrix<f64>, h: &DVector<f64>) -> Option<(DVector<f64>, bool)> {
    let m = gamma.nrows();
    let trace = gamma.trace();
    let eig = SymmetricEigen::new(gamma.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let det: f64 = eig.eigenvalues.iter().product();
    let scale = (trace / m as f64).powi(m as i32);
    let ill = !(min > 0.0) || max / min > CONDITION_LIMIT || det.abs() < 1e-12 * scale;
    let mut g = gamma.clone();
    if ill {
        let delta = 1e-10 * trace.max(1.0);
        for i in 0..m {
            g[(i, i)] += delta;
        }
    }
    let x = g.cholesky()?.solve(h);
    x.iter().all(|v| v.is_finite()).then_some((x, ill))
}

/// Transformed process values for positions `0..=table.last_index()`.
#[derive(Debug, Clone)]
pub struct Transformed {
    pub values: Vec<f64>,
    /// Number of positions where `Gamma` needed a ridge.
    pub regularized: usize,
}

/// Applies the transformation to the process with the given increments
/// (in sorted order). Passing `n^{-1/2} eps_sorted` transforms the marked
/// residual process itself.
pub fn transform_process(
    table: &ProcessTable,
    scores: &DMatrix<f64>,
    weights: &[f64],
    increments: &[f64],
    projection_id: usize,
) -> Result<Transformed> {
    let n = table.len();
    if scores.nrows() != n || weights.len() != n || increments.len() != n {
        return Err(GofError::DimensionMismatch(
            "transform inputs differ in length".into(),
        ));
    }
    let last = table.last_index();
    let (gamma, h) = compute_gamma_and_h(table, scores, weights, increments);
    let process = grouped_cumsum(increments, &table.group_end);

    let nf = n as f64;
    let mut comp = vec![0.0; last + 1];
    let mut regularized = 0;
    for i in 0..=last {
        let (x, ridge) = regularized_solve(&gamma[i], &h[i]).ok_or_else(|| {
            GofError::Untransformable(
                projection_id,
                format!("singular Gamma at sorted position {i}"),
            )
        })?;
        regularized += usize::from(ridge);
        comp[i] = weights[i] / nf * scores.row(i).transpose().dot(&x);
    }
    let comp = grouped_cumsum(&comp, &table.group_end[..=last]);
    let values: Vec<f64> = (0..=last).map(|k| process[k] - comp[k]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(GofError::Untransformable(
            projection_id,
            "non-finite transformed process".into(),
        ));
    }
    Ok(Transformed {
        values,
        regularized,
    })
}

/// A projected Cramer-von Mises statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcvmStatistic {
    pub value: f64,
    /// Set when the normalizing variance is zero.
    pub degenerate: bool,
}

/// Integrates the squared transformed process up to `t0` and normalizes it.
/// `sigma2` is the constant variance estimate used in homoscedastic mode.
pub fn tcvm_statistic(
    transformed: &[f64],
    table: &ProcessTable,
    mode: Mode,
    sigma2: f64,
) -> TcvmStatistic {
    let n = table.len() as f64;
    let last = table.last_index();
    let (integral, norm) = match mode {
        Mode::General => {
            let integral: f64 = (0..=last)
                .map(|k| table.eps_sorted[k].powi(2) * transformed[k].powi(2))
                .sum::<f64>()
                / n;
            (integral, table.psi[last].powi(2))
        }
        Mode::Homoscedastic => {
            let integral: f64 = transformed[..=last].iter().map(|v| v * v).sum::<f64>() / n;
            let f0 = (last + 1) as f64 / n;
            (integral, sigma2 * f0 * f0)
        }
    };
    if !(norm > 0.0) {
        return TcvmStatistic {
            value: 0.0,
            degenerate: true,
        };
    }
    TcvmStatistic {
        value: integral / norm,
        degenerate: false,
    }
}

/// Options of a single projected test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedOptions {
    pub mode: Mode,
    /// Adds a constant score component so the drift caused by estimating
    /// the intercept is removed as well.
    pub intercept_score: bool,
    /// Centers the projected points before building scores.
    pub center: bool,
}

impl ProjectedOptions {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            intercept_score: true,
            center: true,
        }
    }
}

/// Outcome of one projected test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedTest {
    pub statistic: f64,
    pub pvalue: f64,
    pub degenerate: bool,
    pub regularized: usize,
}

/// Projects the half, transforms its residual process and returns the
/// statistic with its asymptotic p-value.
pub fn projected_tcvm_test(
    half: &Dataset,
    model: &FittedModel,
    alpha: &DVector<f64>,
    options: &ProjectedOptions,
    projection_id: usize,
) -> Result<ProjectedTest> {
    let eps = crate::glm::residuals(model, half)?;
    let z = project(&half.x, alpha)?;
    let eta = if options.mode == Mode::General {
        Some(model.linear_predictor(half)?)
    } else {
        None
    };
    tcvm_from_parts(
        z.as_slice(),
        eps.as_slice(),
        eta.as_ref().map(|e| (e.as_slice(), model)),
        options,
        projection_id,
    )
}

/// Test on precomputed projections and residuals. `eta` carries the linear
/// predictor and model needed for general mode.
pub fn tcvm_from_parts(
    z: &[f64],
    eps: &[f64],
    eta: Option<(&[f64], &FittedModel)>,
    options: &ProjectedOptions,
    projection_id: usize,
) -> Result<ProjectedTest> {
    let n = z.len();
    let mut z = z.to_vec();
    if options.center {
        let mean = z.iter().sum::<f64>() / n as f64;
        z.iter_mut().for_each(|v| *v -= mean);
    }
    let table = marked_process(&z, eps)?;
    let sigma2 = eps.iter().map(|e| e * e).sum::<f64>() / n as f64;
    if !(sigma2 > 0.0) {
        return Ok(ProjectedTest {
            statistic: 0.0,
            pvalue: cvm_bm_pvalue(0.0)?,
            degenerate: true,
            regularized: 0,
        });
    }

    let (scores, weights) = match options.mode {
        Mode::Homoscedastic => (
            scores_homoscedastic(&table.z_sorted, sigma2, options.intercept_score),
            vec![sigma2; n],
        ),
        Mode::General => {
            let (eta, model) = eta.ok_or_else(|| {
                GofError::InvalidArgument("general mode needs the linear predictor".into())
            })?;
            let family = model.family;
            let eta_sorted = table.sorted(eta);
            let muprime: Vec<f64> = eta_sorted.iter().map(|e| family.mean_derivative(*e)).collect();
            // index values exclude the intercept
            let index: Vec<f64> = eta_sorted.iter().map(|e| e - model.intercept).collect();
            let curves = estimate_nuisance_curves(&table.z_sorted, &table.eps_sorted, &muprime, &index)?;
            let weights: Vec<f64> = table.eps_sorted.iter().map(|e| e * e).collect();
            (
                scores_general(&table.z_sorted, &curves, options.intercept_score),
                weights,
            )
        }
    };
    let scale = (n as f64).sqrt().recip();
    let increments: Vec<f64> = table.eps_sorted.iter().map(|e| e * scale).collect();
    let tr = transform_process(&table, &scores, &weights, &increments, projection_id)?;
    let stat = tcvm_statistic(&tr.values, &table, options.mode, sigma2);
    Ok(ProjectedTest {
        statistic: stat.value,
        pvalue: cvm_bm_pvalue(stat.value)?,
        degenerate: stat.degenerate,
        regularized: tr.regularized,
    })
}
