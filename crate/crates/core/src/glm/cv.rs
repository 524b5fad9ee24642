//! K-fold cross-validation of the lasso penalty.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::family::Family;
use super::lasso::{lambda_max, path_on_design, LassoPath, StandardizedDesign};
use crate::data::Dataset;
use crate::error::{GofError, Result};

pub const DEFAULT_FOLDS: usize = 10;
pub const GRID_SIZE: usize = 100;
/// Smallest grid value as a fraction of the largest.
pub const GRID_RATIO: f64 = 1e-3;

/// Log-spaced penalties from `lmax` down to `ratio * lmax`.
pub fn log_grid(lmax: f64, size: usize, ratio: f64) -> Vec<f64> {
    if size == 1 {
        return vec![lmax];
    }
    let step = ratio.ln() / (size - 1) as f64;
    (0..size).map(|k| lmax * (step * k as f64).exp()).collect()
}

/// The penalty grid searched by [`cv_select_lambda`] for this dataset.
pub fn lambda_grid(data: &Dataset, family: Family) -> Result<Vec<f64>> {
    check_response(&data.y, family)?;
    let design = StandardizedDesign::new(&data.x);
    let lmax = lambda_max(&design, &data.y);
    if !(lmax > 0.0) {
        return Err(GofError::DegenerateResponse(
            "response is uncorrelated with every column".into(),
        ));
    }
    Ok(log_grid(lmax, GRID_SIZE, GRID_RATIO))
}

fn check_response(y: &DVector<f64>, family: Family) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GofError::NonFinite("response"));
    }
    match family {
        Family::Gaussian => {
            let first = y[0];
            if y.iter().all(|v| *v == first) {
                return Err(GofError::DegenerateResponse("zero variance".into()));
            }
        }
        Family::Binomial => {
            if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(GofError::InvalidArgument(
                    "binomial response must be 0/1".into(),
                ));
            }
            if !single_class_free(y.iter().copied()) {
                return Err(GofError::DegenerateResponse("single class".into()));
            }
        }
    }
    Ok(())
}

fn single_class_free(mut y: impl Iterator<Item = f64>) -> bool {
    let Some(first) = y.next() else {
        return false;
    };
    y.any(|v| v != first)
}

/// Outcome of a cross-validation run.
#[derive(Debug, Clone)]
pub struct CvFit {
    pub lambdas: Vec<f64>,
    /// Summed out-of-fold deviance per penalty; infinite where some fold's
    /// path stopped before reaching that penalty.
    pub deviance: Vec<f64>,
    pub best: usize,
}

impl CvFit {
    pub fn lambda(&self) -> f64 {
        self.lambdas[self.best]
    }
}

fn fold_assignment(n: usize, folds: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

fn folds_are_usable(y: &DVector<f64>, fold: &[usize], folds: usize) -> bool {
    (0..folds).all(|k| {
        single_class_free(
            y.iter()
                .zip(fold)
                .filter(|(_, &f)| f != k)
                .map(|(v, _)| *v),
        )
    })
}

fn held_out_deviance(
    path: &LassoPath,
    data: &Dataset,
    test_rows: &[usize],
    family: Family,
    grid_len: usize,
) -> Vec<f64> {
    let mut dev = vec![f64::INFINITY; grid_len];
    for (k, d) in dev.iter_mut().enumerate().take(path.len()) {
        let beta = &path.coefficients[k];
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let mut total = 0.0;
        for &i in test_rows {
            let mut eta = path.intercepts[k];
            for &j in &support {
                eta += data.x[(i, j)] * beta[j];
            }
            total += family.unit_deviance(data.y[i], family.mean(eta));
        }
        *d = total;
    }
    dev
}

/// Runs K-fold cross-validation over the standard grid.
pub fn cross_validate(data: &Dataset, family: Family, folds: usize, seed: u64) -> Result<CvFit> {
    if folds < 2 {
        return Err(GofError::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let n = data.n();
    if n < folds {
        return Err(GofError::InvalidArgument(format!(
            "{n} observations cannot fill {folds} folds"
        )));
    }
    let lambdas = lambda_grid(data, family)?;

    let mut fold = fold_assignment(n, folds, seed, 0);
    if family == Family::Binomial && !folds_are_usable(&data.y, &fold, folds) {
        fold = fold_assignment(n, folds, seed, 1);
        if !folds_are_usable(&data.y, &fold, folds) {
            return Err(GofError::DegenerateResponse(
                "a training fold contains a single class".into(),
            ));
        }
    }

    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let train: Vec<usize> = (0..n).filter(|&i| fold[i] != k).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold[i] == k).collect();
            let sub = data.select_rows(&train);
            let design = StandardizedDesign::new(&sub.x);
            let path = path_on_design(&design, &sub.y, family, &lambdas, true);
            held_out_deviance(&path, data, &test, family, lambdas.len())
        })
        .collect();

    let mut deviance = vec![0.0; lambdas.len()];
    for dev in &per_fold {
        for (acc, d) in deviance.iter_mut().zip(dev) {
            *acc += d;
        }
    }
    let best = deviance
        .iter()
        .enumerate()
        .fold(0, |b, (k, d)| if *d < deviance[b] { k } else { b });
    Ok(CvFit {
        lambdas,
        deviance,
        best,
    })
}

/// Penalty minimizing K-fold out-of-fold deviance.
pub fn cv_select_lambda(data: &Dataset, family: Family, folds: usize, seed: u64) -> Result<f64> {
    Ok(cross_validate(data, family, folds, seed)?.lambda())
}
