//! Monte Carlo oracles for the estimation and testing building blocks.

mod common;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use common::*;
use uhdgof::glm::fit_cv_post_lasso;
use uhdgof::kernel::{cv_bandwidth, estimate_nuisance_curves, BANDWIDTH_MULTIPLIERS};
use uhdgof::nulldist::cauchy_combine;
use uhdgof::process::project;
use uhdgof::projector::{dc_sis_screen, screening_size, sparse_sir};
use uhdgof::simlab::{gen_study1, Model, Scenario};
use uhdgof::transform::{projected_tcvm_test, ProjectedOptions};
use uhdgof::{Dataset, Family, Mode};

fn h11(a: f64, n: usize, p: usize, seed: u64) -> Dataset {
    gen_study1(&Scenario::new(Model::H11, a, n, p, 0.0, seed)).unwrap()
}

#[test]
fn post_lasso_keeps_pure_noise_sparse() {
    let counts: Vec<usize> = (0..100)
        .map(|seed| {
            let mut r = rng(seed);
            let x = gaussian_matrix(&mut r, 200, 50);
            let y = DVector::from_fn(200, |_, _| r.sample::<f64, _>(StandardNormal));
            let d = Dataset::new(x, y).unwrap();
            fit_cv_post_lasso(&d, Family::Gaussian, 10, seed).unwrap().support.len()
        })
        .collect();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    assert!(mean <= 5.0, "mean false positives {mean}");
}

#[test]
fn post_lasso_recovers_the_study1_support() {
    let fits: Vec<_> = (0..100)
        .map(|seed| fit_cv_post_lasso(&h11(0.0, 300, 50, 1000 + seed), Family::Gaussian, 10, seed).unwrap())
        .collect();
    let covered = fraction(&fits, |f| (0..5).all(|j| f.support.contains(&j)));
    assert!(covered >= 0.95, "support coverage {covered}");
    let close = fraction(&fits, |f| {
        (0..5).map(|j| (f.coefficients[j] - 1.0).powi(2)).sum::<f64>().sqrt() < 0.5
    });
    assert!(close >= 0.95, "estimation accuracy {close}");
}

#[test]
fn distance_correlation_screening_keeps_the_active_set() {
    let k = screening_size(300);
    assert_eq!(k, 29);
    let kept: Vec<bool> = (0..100)
        .map(|seed| {
            let top = dc_sis_screen(&h11(0.0, 300, 100, 2000 + seed), k).unwrap();
            (0..5).all(|j| top.contains(&j))
        })
        .collect();
    let rate = fraction(&kept, |b| *b);
    assert!(rate >= 0.95, "screening recall {rate}");
}

#[test]
fn sparse_sir_finds_a_cubic_single_index() {
    let dir = beta0_direction(50);
    let cosines: Vec<f64> = (0..100)
        .map(|seed| {
            let mut r = rng(3000 + seed);
            let x = gaussian_matrix(&mut r, 400, 50);
            let index = &x * &dir * 5f64.sqrt();
            let y = DVector::from_fn(400, |i, _| index[i].powi(3) + r.sample::<f64, _>(StandardNormal));
            let d = Dataset::new(x, y).unwrap();
            let all: Vec<usize> = (0..50).collect();
            let fit = sparse_sir(&d, &all, Family::Gaussian, 10, 5, seed).unwrap();
            fit.directions[0].dot(&dir).abs()
        })
        .collect();
    let rate = fraction(&cosines, |c| *c >= 0.9);
    assert!(rate >= 0.9, "share with |cos| >= 0.9: {rate}");
}

#[test]
fn bandwidth_choice_is_usually_interior() {
    let (lo, hi) = (BANDWIDTH_MULTIPLIERS[0], *BANDWIDTH_MULTIPLIERS.last().unwrap());
    let interior: Vec<bool> = (0..100)
        .map(|seed| {
            let mut r = rng(4000 + seed);
            let z: Vec<f64> = (0..300).map(|_| r.sample(StandardNormal)).collect();
            let w: Vec<f64> = z
                .iter()
                .map(|t| (2.0 * t).sin() + 0.3 * r.sample::<f64, _>(StandardNormal))
                .collect();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let c = cv_bandwidth(&z, &w).unwrap() / (sd * n.powf(-0.2));
            (c - lo).abs() > 1e-9 && (c - hi).abs() > 1e-9
        })
        .collect();
    let rate = fraction(&interior, |b| *b);
    assert!(rate >= 0.8, "interior share {rate}");
}

#[test]
fn variance_curve_is_consistent_under_homoscedasticity() {
    let sigma2: f64 = 2.0;
    let ok: Vec<bool> = (0..100)
        .map(|seed| {
            let mut r = rng(5000 + seed);
            let z: Vec<f64> = (0..500).map(|_| r.sample(StandardNormal)).collect();
            let eps: Vec<f64> = (0..500)
                .map(|_| sigma2.sqrt() * r.sample::<f64, _>(StandardNormal))
                .collect();
            let ones = vec![1.0; 500];
            let curves = estimate_nuisance_curves(&z, &eps, &ones, &z).unwrap();
            let mad = curves.sigma2.iter().map(|s| (s - sigma2).abs()).sum::<f64>() / 500.0;
            mad <= 0.15 * sigma2
        })
        .collect();
    let rate = fraction(&ok, |b| *b);
    assert!(rate >= 0.9, "consistent share {rate}");
}

fn projected_pvalue(a: f64, seed: u64) -> f64 {
    let d = h11(a, 300, 50, seed);
    let model = fit_cv_post_lasso(&d, Family::Gaussian, 10, seed).unwrap();
    let opts = ProjectedOptions::new(Mode::Homoscedastic);
    projected_tcvm_test(&d, &model, &beta0_direction(50), &opts, 0).unwrap().pvalue
}

#[test]
fn projected_test_is_calibrated_under_the_null() {
    let p: Vec<f64> = (0..500).map(|r| projected_pvalue(0.0, 6000 + r)).collect();
    let (d, pv) = ks_uniform(&p);
    assert!(pv > 0.01, "KS D = {d}, p = {pv}");
}

#[test]
fn projected_test_detects_the_oracle_alternative() {
    let mut p: Vec<f64> = (0..100).map(|r| projected_pvalue(1.0, 7000 + r)).collect();
    p.sort_by(f64::total_cmp);
    let median = 0.5 * (p[49] + p[50]);
    assert!(median < 0.01, "median p {median}");
}

#[test]
fn projection_is_a_plain_matrix_vector_product() {
    let d = h11(0.0, 40, 10, 1);
    let dir = beta0_direction(10);
    let z = project(&d.x, &dir).unwrap();
    for i in 0..40 {
        let expected: f64 = (0..10).map(|j| d.x[(i, j)] * dir[j]).sum();
        assert!((z[i] - expected).abs() < 1e-14);
    }
}

#[test]
fn cauchy_combination_is_exact_for_independent_uniforms() {
    let mut r = rng(8100);
    let weights = vec![0.1; 10];
    let reps = 100_000;
    let hits = (0..reps)
        .filter(|_| {
            let p: Vec<f64> = (0..10).map(|_| r.random::<f64>()).collect();
            cauchy_combine(&p, &weights).unwrap().1 <= 0.05
        })
        .count();
    let rate = hits as f64 / reps as f64;
    assert!((rate - 0.05).abs() <= 0.005, "rate {rate}");
}
