//! Cyclic coordinate descent for the l1-penalized GLM
//!
//! ```text
//! minimize  (1/n) * sum_i nll(y_i, a + x_i' b) + lambda * ||b||_1
//! ```
//!
//! with the gaussian negative log-likelihood taken as `(y - eta)^2 / 2`.
//! Columns are standardized internally (population standard deviation) and
//! the intercept is never penalized. Logistic fits wrap the coordinate
//! descent in iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

use super::family::{logistic, Family};
use crate::data::Dataset;
use crate::error::{GofError, Result};

/// Convergence threshold on the largest coefficient change in one pass.
pub const CD_TOLERANCE: f64 = 1e-7;
/// Cap on IRLS outer iterations for logistic fits.
pub const MAX_IRLS_ITERATIONS: usize = 100;
const MAX_PASSES: usize = 100_000;
const MIN_IRLS_WEIGHT: f64 = 1e-5;
/// A path stops once the model explains this fraction of the null deviance.
const MAX_DEVIANCE_RATIO: f64 = 0.999;

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Column-standardized copy of a design matrix.
#[derive(Debug, Clone)]
pub struct StandardizedDesign {
    pub x: DMatrix<f64>,
    pub means: Vec<f64>,
    /// Population standard deviations; 0 marks a constant column.
    pub scales: Vec<f64>,
}

impl StandardizedDesign {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let nf = n as f64;
        let mut xs = x.clone();
        let mut means = vec![0.0; p];
        let mut scales = vec![0.0; p];
        for j in 0..p {
            let mut col = xs.column_mut(j);
            let mean = col.iter().sum::<f64>() / nf;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
            let sd = var.sqrt();
            means[j] = mean;
            if sd > 1e-12 * mean.abs().max(1.0) {
                scales[j] = sd;
                for v in col.iter_mut() {
                    *v = (*v - mean) / sd;
                }
            } else {
                col.fill(0.0);
            }
        }
        Self {
            x: xs,
            means,
            scales,
        }
    }

    /// Maps standardized-scale coefficients back to the original scale.
    pub fn unstandardize(&self, intercept_std: f64, beta_std: &[f64]) -> (f64, DVector<f64>) {
        let p = beta_std.len();
        let mut beta = DVector::zeros(p);
        let mut intercept = intercept_std;
        for j in 0..p {
            if self.scales[j] > 0.0 && beta_std[j] != 0.0 {
                beta[j] = beta_std[j] / self.scales[j];
                intercept -= beta[j] * self.means[j];
            }
        }
        (intercept, beta)
    }
}

/// Solutions along a decreasing penalty sequence.
#[derive(Debug, Clone)]
pub struct LassoPath {
    /// Penalties actually fitted; a prefix of the requested sequence when
    /// the path saturates early.
    pub lambdas: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// Coefficients on the original covariate scale.
    pub coefficients: Vec<DVector<f64>>,
    pub requested: usize,
    /// False if any solution hit an iteration cap.
    pub converged: bool,
}

impl LassoPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

fn validate_inputs(data: &Dataset, lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(GofError::InvalidArgument("empty lambda sequence".into()));
    }
    if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(GofError::InvalidArgument(
            "lambdas must be finite and non-negative".into(),
        ));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GofError::InvalidArgument(
            "lambdas must be strictly decreasing".into(),
        ));
    }
    if data.x.iter().any(|v| !v.is_finite()) {
        return Err(GofError::NonFinite("design matrix"));
    }
    if data.y.iter().any(|v| !v.is_finite()) {
        return Err(GofError::NonFinite("response"));
    }
    Ok(())
}

/// Smallest penalty with an empty active set, on standardized columns.
pub fn lambda_max(design: &StandardizedDesign, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let ybar = y.mean();
    let mut best = 0.0f64;
    for j in 0..design.x.ncols() {
        let col = design.x.column(j);
        let g: f64 = col.iter().zip(y.iter()).map(|(x, y)| x * (y - ybar)).sum();
        best = best.max((g / n).abs());
    }
    best
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Fits the penalized GLM at every lambda, warm-starting each solution
/// from the previous one.
pub fn fit_lasso_path(data: &Dataset, family: Family, lambdas: &[f64]) -> Result<LassoPath> {
    validate_inputs(data, lambdas)?;
    let design = StandardizedDesign::new(&data.x);
    Ok(path_on_design(&design, &data.y, family, lambdas, false))
}

/// With `stop_early`, the path ends once the support reaches `n - 1`
/// columns or the deviance ratio exceeds 0.999.
pub(crate) fn path_on_design(
    design: &StandardizedDesign,
    y: &DVector<f64>,
    family: Family,
    lambdas: &[f64],
    stop_early: bool,
) -> LassoPath {
    match family {
        Family::Gaussian => gaussian_path(design, y, lambdas, stop_early),
        Family::Binomial => binomial_path(design, y, lambdas, stop_early),
    }
}

fn usable_columns(design: &StandardizedDesign) -> Vec<usize> {
    (0..design.scales.len())
        .filter(|&j| design.scales[j] > 0.0)
        .collect()
}

/// Cached columns of `X'X / n`, filled as variables enter the model.
struct GramCache<'a> {
    x: &'a DMatrix<f64>,
    cols: Vec<Option<Vec<f64>>>,
}

impl<'a> GramCache<'a> {
    fn new(x: &'a DMatrix<f64>) -> Self {
        Self {
            x,
            cols: vec![None; x.ncols()],
        }
    }

    fn column(&mut self, j: usize) -> &[f64] {
        let x = self.x;
        self.cols[j].get_or_insert_with(|| {
            let nf = x.nrows() as f64;
            let xj = x.column(j);
            (0..x.ncols())
                .map(|k| dot(x.column(k).as_slice(), xj.as_slice()) / nf)
                .collect()
        })
    }
}

fn gaussian_path(
    design: &StandardizedDesign,
    y: &DVector<f64>,
    lambdas: &[f64],
    stop_early: bool,
) -> LassoPath {
    let (n, p) = design.x.shape();
    let nf = n as f64;
    let ybar = y.mean();
    let mut r: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let tss: f64 = r.iter().map(|v| v * v).sum();
    let cols = usable_columns(design);
    let mut gram = GramCache::new(&design.x);
    let mut beta = vec![0.0; p];
    let mut out = LassoPath {
        lambdas: Vec::new(),
        intercepts: Vec::new(),
        coefficients: Vec::new(),
        requested: lambdas.len(),
        converged: true,
    };

    for &lambda in lambdas {
        let mut passes = 0;
        loop {
            let mut max_delta = 0.0f64;
            for &j in &cols {
                let xj = design.x.column(j);
                let xj = xj.as_slice();
                let old = beta[j];
                let new = soft_threshold(dot(xj, &r) / nf + old, lambda);
                if new != old {
                    axpy(old - new, xj, &mut r);
                    beta[j] = new;
                    max_delta = max_delta.max((new - old).abs());
                }
            }
            passes += 1;
            if max_delta < CD_TOLERANCE || passes > MAX_PASSES {
                break;
            }
            // active-set passes on gradients, updated through the Gram
            // matrix; the residual is brought up to date afterwards
            let active: Vec<usize> = cols.iter().copied().filter(|&j| beta[j] != 0.0).collect();
            let start: Vec<f64> = active.iter().map(|&j| beta[j]).collect();
            let mut grad: Vec<f64> = active
                .iter()
                .map(|&j| dot(design.x.column(j).as_slice(), &r) / nf)
                .collect();
            let sub: Vec<Vec<f64>> = active
                .iter()
                .map(|&j| {
                    let g = gram.column(j);
                    active.iter().map(|&k| g[k]).collect()
                })
                .collect();
            loop {
                let mut max_delta = 0.0f64;
                for (a, &j) in active.iter().enumerate() {
                    let old = beta[j];
                    let new = soft_threshold(grad[a] + old, lambda);
                    if new != old {
                        let delta = new - old;
                        for (g, s) in grad.iter_mut().zip(&sub[a]) {
                            *g -= delta * s;
                        }
                        beta[j] = new;
                        max_delta = max_delta.max(delta.abs());
                    }
                }
                passes += 1;
                if max_delta < CD_TOLERANCE || passes > MAX_PASSES {
                    break;
                }
            }
            for (a, &j) in active.iter().enumerate() {
                let delta = beta[j] - start[a];
                if delta != 0.0 {
                    axpy(-delta, design.x.column(j).as_slice(), &mut r);
                }
            }
        }
        if passes > MAX_PASSES {
            out.converged = false;
        }
        let (a, b) = design.unstandardize(ybar, &beta);
        out.lambdas.push(lambda);
        out.intercepts.push(a);
        out.coefficients.push(b);

        let nnz = beta.iter().filter(|b| **b != 0.0).count();
        let rss: f64 = r.iter().map(|v| v * v).sum();
        let saturated = tss > 0.0 && 1.0 - rss / tss > MAX_DEVIANCE_RATIO;
        if stop_early && (nnz + 1 >= n || saturated) {
            break;
        }
    }
    out
}

fn binomial_deviance(y: &DVector<f64>, eta: &[f64]) -> f64 {
    y.iter()
        .zip(eta)
        .map(|(&yi, &e)| Family::Binomial.unit_deviance(yi, logistic(e)))
        .sum()
}

fn binomial_path(
    design: &StandardizedDesign,
    y: &DVector<f64>,
    lambdas: &[f64],
    stop_early: bool,
) -> LassoPath {
    let (n, p) = design.x.shape();
    let nf = n as f64;
    let ybar = y.mean().clamp(1e-10, 1.0 - 1e-10);
    let mut intercept = (ybar / (1.0 - ybar)).ln();
    let mut beta = vec![0.0; p];
    let mut eta = vec![intercept; n];
    let null_dev = binomial_deviance(y, &eta);
    let cols = usable_columns(design);
    let mut out = LassoPath {
        lambdas: Vec::new(),
        intercepts: Vec::new(),
        coefficients: Vec::new(),
        requested: lambdas.len(),
        converged: true,
    };

    let mut w = vec![0.0; n];
    let mut res = vec![0.0; n];
    let mut xw = vec![0.0; p];

    for &lambda in lambdas {
        let mut lambda_converged = false;
        for _outer in 0..MAX_IRLS_ITERATIONS {
            for i in 0..n {
                let mu = logistic(eta[i]);
                w[i] = (mu * (1.0 - mu)).max(MIN_IRLS_WEIGHT);
                res[i] = (y[i] - mu) / w[i];
            }
            let wsum: f64 = w.iter().sum();
            for &j in &cols {
                let xj = design.x.column(j);
                xw[j] = xj.iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / nf;
            }
            let beta_start = beta.clone();
            let intercept_start = intercept;

            let mut passes = 0;
            let update = |j: usize, beta: &mut [f64], res: &mut [f64]| -> f64 {
                let xj = design.x.column(j);
                let xj = xj.as_slice();
                let old = beta[j];
                let g: f64 = xj
                    .iter()
                    .zip(res.iter())
                    .zip(&w)
                    .map(|((x, r), wi)| wi * x * r)
                    .sum::<f64>()
                    / nf
                    + xw[j] * old;
                let new = soft_threshold(g, lambda) / xw[j];
                if new != old {
                    axpy(old - new, xj, res);
                    beta[j] = new;
                }
                (new - old).abs()
            };
            loop {
                let mut max_delta = 0.0f64;
                for &j in &cols {
                    max_delta = max_delta.max(update(j, &mut beta, &mut res));
                }
                let d0 = res.iter().zip(&w).map(|(r, wi)| r * wi).sum::<f64>() / wsum;
                for r in res.iter_mut() {
                    *r -= d0;
                }
                intercept += d0;
                max_delta = max_delta.max(d0.abs());
                passes += 1;
                if max_delta < CD_TOLERANCE || passes > MAX_PASSES {
                    break;
                }
                let active: Vec<usize> =
                    cols.iter().copied().filter(|&j| beta[j] != 0.0).collect();
                loop {
                    let mut max_delta = 0.0f64;
                    for &j in &active {
                        max_delta = max_delta.max(update(j, &mut beta, &mut res));
                    }
                    let d0 = res.iter().zip(&w).map(|(r, wi)| r * wi).sum::<f64>() / wsum;
                    for r in res.iter_mut() {
                        *r -= d0;
                    }
                    intercept += d0;
                    max_delta = max_delta.max(d0.abs());
                    passes += 1;
                    if max_delta < CD_TOLERANCE || passes > MAX_PASSES {
                        break;
                    }
                }
            }

            // eta = intercept + X beta
            eta.fill(intercept);
            for &j in &cols {
                if beta[j] != 0.0 {
                    axpy(beta[j], design.x.column(j).as_slice(), &mut eta);
                }
            }
            let change = beta
                .iter()
                .zip(&beta_start)
                .map(|(a, b)| (a - b).abs())
                .fold((intercept - intercept_start).abs(), f64::max);
            if change < CD_TOLERANCE {
                lambda_converged = true;
                break;
            }
        }
        if !lambda_converged {
            out.converged = false;
        }
        let (a, b) = design.unstandardize(intercept, &beta);
        out.lambdas.push(lambda);
        out.intercepts.push(a);
        out.coefficients.push(b);

        let nnz = beta.iter().filter(|b| **b != 0.0).count();
        let dev = binomial_deviance(y, &eta);
        let saturated = null_dev > 0.0 && 1.0 - dev / null_dev > MAX_DEVIANCE_RATIO;
        if stop_early && (nnz + 1 >= n || saturated) {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_data(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            2.0 * x[(i, 0)] - x[(i, 1)] + 0.5 + rng.sample::<f64, _>(StandardNormal)
        });
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn rejects_bad_sequences() {
        let d = gaussian_data(20, 3, 1);
        assert!(fit_lasso_path(&d, Family::Gaussian, &[]).is_err());
        assert!(fit_lasso_path(&d, Family::Gaussian, &[0.1, 0.2]).is_err());
        assert!(fit_lasso_path(&d, Family::Gaussian, &[0.1, 0.1]).is_err());
        assert!(fit_lasso_path(&d, Family::Gaussian, &[f64::NAN]).is_err());
    }

    #[test]
    fn huge_penalty_gives_mean_only_model() {
        let d = gaussian_data(40, 5, 2);
        let path = fit_lasso_path(&d, Family::Gaussian, &[1e6]).unwrap();
        assert!(path.coefficients[0].iter().all(|b| *b == 0.0));
        assert!((path.intercepts[0] - d.y.mean()).abs() < 1e-12);
    }

    #[test]
    fn kkt_conditions_hold_along_the_path() {
        let d = gaussian_data(80, 10, 3);
        let design = StandardizedDesign::new(&d.x);
        let lmax = lambda_max(&design, &d.y);
        let lambdas: Vec<f64> = (0..20).map(|k| lmax * 0.8f64.powi(k + 1)).collect();
        let path = fit_lasso_path(&d, Family::Gaussian, &lambdas).unwrap();
        let n = d.n() as f64;
        for k in 0..path.len() {
            let lambda = path.lambdas[k];
            let b = &path.coefficients[k];
            let fitted = &d.x * b + DVector::from_element(d.n(), path.intercepts[k]);
            let resid = &d.y - fitted;
            for j in 0..d.p() {
                // gradient w.r.t. the standardized coefficient
                let g = design.x.column(j).dot(&resid) / n;
                if b[j] == 0.0 {
                    assert!(g.abs() <= lambda + 1e-6, "j={j} g={g} lambda={lambda}");
                } else {
                    assert!((g - lambda * b[j].signum()).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn logistic_path_is_sparse_then_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200;
        let x = DMatrix::from_fn(n, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            let pr = logistic(1.5 * x[(i, 0)] - x[(i, 2)]);
            if rng.random::<f64>() < pr { 1.0 } else { 0.0 }
        });
        let d = Dataset::new(x, y).unwrap();
        let design = StandardizedDesign::new(&d.x);
        let lmax = lambda_max(&design, &d.y);
        let path = fit_lasso_path(&d, Family::Binomial, &[lmax * 1.0001, lmax * 0.3, lmax * 0.01])
            .unwrap();
        assert!(path.converged);
        assert!(path.coefficients[0].iter().all(|b| *b == 0.0));
        let b = &path.coefficients[2];
        assert!(b[0] > 0.8 && b[2] < -0.4, "{b}");
        // KKT for the weighted problem at the last lambda
        let lambda = path.lambdas[2];
        let eta = &d.x * b + DVector::from_element(n, path.intercepts[2]);
        let resid = DVector::from_fn(n, |i, _| d.y[i] - logistic(eta[i]));
        assert!(resid.sum().abs() / (n as f64) < 1e-5);
        for j in 0..d.p() {
            let g = design.x.column(j).dot(&resid) / n as f64;
            if b[j] == 0.0 {
                assert!(g.abs() <= lambda + 1e-5);
            } else {
                assert!((g - lambda * b[j].signum()).abs() < 1e-5, "j={j} g={g}");
            }
        }
    }
}
