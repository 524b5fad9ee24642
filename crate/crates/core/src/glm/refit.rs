//! Post-lasso refits and the fitted-model type.

use nalgebra::{DMatrix, DVector};

use super::cv::{cross_validate, lambda_grid};
use super::family::{logistic, Family};
use super::lasso::{path_on_design, StandardizedDesign};
use crate::data::Dataset;
use crate::error::{GofError, Result};

const RANK_TOLERANCE: f64 = 1e-10;
const MAX_NEWTON_ITERATIONS: usize = 100;
/// Linear predictors beyond this magnitude signal a separable sample.
const SEPARATION_ETA: f64 = 30.0;

/// A sparse GLM fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub intercept: f64,
    /// Length-p coefficients on the original covariate scale.
    pub coefficients: DVector<f64>,
    /// Indices of the nonzero coefficients, ascending.
    pub support: Vec<usize>,
    pub lambda: f64,
    pub family: Family,
    /// False when the unpenalized refit hit its iteration cap or the
    /// selected columns separate the classes.
    pub converged: bool,
    /// Columns selected by the lasso but removed from the refit because
    /// they made the design rank deficient.
    pub dropped: Vec<usize>,
}

impl FittedModel {
    /// Wraps known coefficients, e.g. the true parameter of a simulation.
    pub fn from_coefficients(intercept: f64, coefficients: DVector<f64>, family: Family) -> Self {
        let support = nonzero(&coefficients);
        Self {
            intercept,
            coefficients,
            support,
            lambda: 0.0,
            family,
            converged: true,
            dropped: Vec::new(),
        }
    }

    pub fn linear_predictor(&self, data: &Dataset) -> Result<DVector<f64>> {
        if data.p() != self.coefficients.len() {
            return Err(GofError::DimensionMismatch(format!(
                "model has {} coefficients, data has {} columns",
                self.coefficients.len(),
                data.p()
            )));
        }
        let mut eta = DVector::from_element(data.n(), self.intercept);
        for &j in &self.support {
            eta.axpy(self.coefficients[j], &data.x.column(j), 1.0);
        }
        Ok(eta)
    }

    pub fn fitted_means(&self, data: &Dataset) -> Result<DVector<f64>> {
        let family = self.family;
        Ok(self.linear_predictor(data)?.map(|e| family.mean(e)))
    }
}

fn nonzero(v: &DVector<f64>) -> Vec<usize> {
    (0..v.len()).filter(|&j| v[j] != 0.0).collect()
}

/// Response minus fitted mean, intercept included.
pub fn residuals(model: &FittedModel, data: &Dataset) -> Result<DVector<f64>> {
    Ok(&data.y - model.fitted_means(data)?)
}

/// Lasso solution at a single penalty, reached by warm starts down the
/// standard grid.
fn lasso_at(data: &Dataset, family: Family, lambda: f64) -> Result<(f64, DVector<f64>)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(GofError::InvalidArgument(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    let mut lambdas: Vec<f64> = lambda_grid(data, family)?
        .into_iter()
        .filter(|&l| l > lambda)
        .collect();
    lambdas.push(lambda);
    let design = StandardizedDesign::new(&data.x);
    let path = path_on_design(&design, &data.y, family, &lambdas, false);
    let last = path.len() - 1;
    Ok((path.intercepts[last], path.coefficients[last].clone()))
}

/// Design `[1, X_S]`.
fn with_intercept(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, cols.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            x[(i, cols[j - 1])]
        }
    })
}

fn is_full_rank(z: &DMatrix<f64>) -> bool {
    if z.ncols() > z.nrows() {
        return false;
    }
    let r = z.clone().qr().r();
    let diag: Vec<f64> = (0..r.ncols()).map(|k| r[(k, k)].abs()).collect();
    let top = diag.iter().cloned().fold(0.0, f64::max);
    diag.iter().all(|d| *d > RANK_TOLERANCE * top.max(1.0))
}

fn least_squares(z: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let qr = z.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&qty)
}

/// Unpenalized logistic regression by Newton's method with step halving.
/// Returns the coefficients and whether the fit converged cleanly.
fn logistic_mle(z: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, bool) {
    let (n, m) = z.shape();
    let ybar = y.mean().clamp(1e-10, 1.0 - 1e-10);
    let mut b = DVector::zeros(m);
    b[0] = (ybar / (1.0 - ybar)).ln();
    let deviance = |b: &DVector<f64>| -> f64 {
        let eta = z * b;
        (0..n)
            .map(|i| Family::Binomial.unit_deviance(y[i], logistic(eta[i])))
            .sum()
    };
    let mut dev = deviance(&b);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let eta = z * &b;
        let mu = eta.map(logistic);
        let w = mu.map(|m| (m * (1.0 - m)).max(1e-12));
        let grad = z.transpose() * (y - &mu);
        let mut info = DMatrix::zeros(m, m);
        for i in 0..n {
            let zi = z.row(i);
            info.ger(w[i], &zi.transpose(), &zi.transpose(), 1.0);
        }
        let Some(step) = info.cholesky().map(|c| c.solve(&grad)) else {
            return (b, false);
        };
        let mut t = 1.0;
        let mut candidate = &b + &step * t;
        let mut new_dev = deviance(&candidate);
        while new_dev > dev + 1e-12 && t > 1e-8 {
            t *= 0.5;
            candidate = &b + &step * t;
            new_dev = deviance(&candidate);
        }
        let change = (&candidate - &b).amax();
        b = candidate;
        let rel = (dev - new_dev).abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        if change < 1e-10 || rel < 1e-12 {
            let eta = z * &b;
            let separated = eta.amax() > SEPARATION_ETA;
            return (b, !separated);
        }
    }
    (b, false)
}

/// Lasso at `lambda`, then an unpenalized refit with intercept on the
/// selected columns.
pub fn fit_post_lasso(data: &Dataset, family: Family, lambda: f64) -> Result<FittedModel> {
    let (lasso_intercept, lasso_beta) = lasso_at(data, family, lambda)?;
    refit_support(data, family, lambda, lasso_intercept, &lasso_beta)
}

fn refit_support(
    data: &Dataset,
    family: Family,
    lambda: f64,
    lasso_intercept: f64,
    lasso_beta: &DVector<f64>,
) -> Result<FittedModel> {
    let p = data.p();
    let mut support = nonzero(lasso_beta);
    let mut dropped = Vec::new();
    let mut z = with_intercept(&data.x, &support);
    while !support.is_empty() && !is_full_rank(&z) {
        let (pos, _) = support
            .iter()
            .enumerate()
            .min_by(|a, b| {
                lasso_beta[*a.1]
                    .abs()
                    .total_cmp(&lasso_beta[*b.1].abs())
                    .then(b.1.cmp(a.1))
            })
            .expect("support is non-empty");
        dropped.push(support.remove(pos));
        z = with_intercept(&data.x, &support);
    }
    if !dropped.is_empty() {
        dropped.sort_unstable();
        log::debug!("refit dropped {} redundant columns", dropped.len());
    }

    let (coef, converged) = match family {
        Family::Gaussian => match least_squares(&z, &data.y) {
            Some(c) => (c, true),
            None => {
                let mut c = DVector::zeros(support.len() + 1);
                c[0] = lasso_intercept;
                (c, false)
            }
        },
        Family::Binomial => logistic_mle(&z, &data.y),
    };
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(GofError::NonFinite("post-lasso refit"));
    }
    let mut coefficients = DVector::zeros(p);
    for (k, &j) in support.iter().enumerate() {
        coefficients[j] = coef[k + 1];
    }
    Ok(FittedModel {
        intercept: coef[0],
        support: nonzero(&coefficients),
        coefficients,
        lambda,
        family,
        converged,
        dropped,
    })
}

/// Lasso fit at the cross-validated penalty, without refitting.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub lambda: f64,
    pub intercept: f64,
    pub coefficients: DVector<f64>,
}

pub fn fit_cv_lasso(data: &Dataset, family: Family, folds: usize, seed: u64) -> Result<LassoFit> {
    let cv = cross_validate(data, family, folds, seed)?;
    let design = StandardizedDesign::new(&data.x);
    let path = path_on_design(&design, &data.y, family, &cv.lambdas[..=cv.best], false);
    let last = path.len() - 1;
    Ok(LassoFit {
        lambda: cv.lambda(),
        intercept: path.intercepts[last],
        coefficients: path.coefficients[last].clone(),
    })
}

/// Cross-validated penalty followed by the post-lasso refit.
pub fn fit_cv_post_lasso(
    data: &Dataset,
    family: Family,
    folds: usize,
    seed: u64,
) -> Result<FittedModel> {
    let fit = fit_cv_lasso(data, family, folds, seed)?;
    refit_support(data, family, fit.lambda, fit.intercept, &fit.coefficients)
}
