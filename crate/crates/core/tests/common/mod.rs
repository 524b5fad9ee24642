#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use uhdgof::Dataset;

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `sample` against `cdf`; returns `(D, p-value)`
/// with Stephens' small-sample correction.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let root = n.sqrt();
    (d, kolmogorov_sf((root + 0.12 + 0.11 / root) * d))
}

pub fn ks_uniform(sample: &[f64]) -> (f64, f64) {
    ks_test(sample, |x| x.clamp(0.0, 1.0))
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn ks_normal(sample: &[f64]) -> (f64, f64) {
    ks_test(sample, std_normal_cdf)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

/// Linear model `y = 1 + x1 + ... + x5 + eps` with independent columns.
pub fn sparse_linear(seed: u64, n: usize, p: usize) -> Dataset {
    let mut r = rng(seed);
    let x = gaussian_matrix(&mut r, n, p);
    let y = DVector::from_fn(n, |i, _| {
        1.0 + (0..5).map(|j| x[(i, j)]).sum::<f64>() + r.sample::<f64, _>(StandardNormal)
    });
    Dataset::new(x, y).unwrap()
}

/// `beta0 / |beta0|` in `p` dimensions.
pub fn beta0_direction(p: usize) -> DVector<f64> {
    DVector::from_fn(p, |j, _| if j < 5 { 1.0 / 5f64.sqrt() } else { 0.0 })
}

pub fn fraction<T>(items: &[T], pred: impl Fn(&T) -> bool) -> f64 {
    items.iter().filter(|v| pred(v)).count() as f64 / items.len() as f64
}
