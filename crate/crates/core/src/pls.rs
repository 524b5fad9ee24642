//! Projected local-smoothing statistic
//!
//! ```text
//! PLS = sum_{i != j} e_i e_j K((z_i - z_j) / h)
//!       / sqrt(2 sum_{i != j} e_i^2 e_j^2 K^2((z_i - z_j) / h))
//! ```
//!
//! which is asymptotically standard normal under the null.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};
use crate::kernel::epanechnikov;
use crate::nulldist::normal_pvalue;

/// Rows per parallel block; fixed so the summation order never depends on
/// the thread count.
const BLOCK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlsStatistic {
    pub value: f64,
    pub degenerate: bool,
}

/// Default bandwidth `sd(z) * n^{-2/9}`.
pub fn pls_bandwidth(z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    sd * n.powf(-2.0 / 9.0)
}

pub fn pls_statistic(z: &[f64], eps: &[f64], h: f64) -> Result<PlsStatistic> {
    let n = z.len();
    if eps.len() != n {
        return Err(GofError::DimensionMismatch(format!(
            "{n} projected points but {} residuals",
            eps.len()
        )));
    }
    if n < 2 {
        return Err(GofError::InvalidArgument(format!(
            "need at least 2 points, got {n}"
        )));
    }
    if !(h > 0.0) {
        return Err(GofError::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    let zs: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    let es: Vec<f64> = order.iter().map(|&i| eps[i]).collect();

    let blocks: Vec<(f64, f64)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let mut row_num = 0.0;
                let mut row_den = 0.0;
                for j in (i + 1)..n {
                    let u = (zs[j] - zs[i]) / h;
                    if u > 1.0 {
                        break;
                    }
                    let k = epanechnikov(u);
                    row_num += es[j] * k;
                    row_den += es[j] * es[j] * k * k;
                }
                num += es[i] * row_num;
                den += es[i] * es[i] * row_den;
            }
            (num, den)
        })
        .collect();
    let (num, den) = blocks
        .iter()
        .fold((0.0, 0.0), |acc, b| (acc.0 + b.0, acc.1 + b.1));
    // each unordered pair appears twice in the full double sum
    let (num, den) = (2.0 * num, 2.0 * den);
    let denom = (2.0 * den).sqrt();
    if !(denom > 0.0) {
        return Ok(PlsStatistic {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(PlsStatistic {
        value: num / denom,
        degenerate: false,
    })
}

/// Upper-tail normal p-value of the statistic.
pub fn pls_pvalue(stat: f64) -> f64 {
    normal_pvalue(stat)
}
