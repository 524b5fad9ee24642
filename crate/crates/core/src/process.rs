//! Projected residual-marked empirical processes.

use nalgebra::{DMatrix, DVector};

use crate::error::{GofError, Result};

/// `z_i = alpha' x_i` for every row; `alpha` must have unit length.
pub fn project(x: &DMatrix<f64>, alpha: &DVector<f64>) -> Result<DVector<f64>> {
    if x.ncols() != alpha.len() {
        return Err(GofError::DimensionMismatch(format!(
            "direction has {} entries, design has {} columns",
            alpha.len(),
            x.ncols()
        )));
    }
    let norm = alpha.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(GofError::InvalidArgument(format!(
            "projection direction has norm {norm}"
        )));
    }
    Ok(x * alpha)
}

/// 0-based position of the order statistic `z_(ceil(0.99 n))`.
pub fn t0_position(n: usize) -> usize {
    (99 * n).div_ceil(100) - 1
}

/// The truncation point `t0` and its 0-based position among the sorted
/// points.
pub fn t0_quantile(z: &[f64]) -> Result<(f64, usize)> {
    if z.len() < 2 {
        return Err(GofError::InvalidArgument(format!(
            "need at least 2 points, got {}",
            z.len()
        )));
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = t0_position(z.len());
    Ok((sorted[k], k))
}

/// The residual-marked process and its variance measure along one
/// projection, tabulated at the sorted projected points.
///
/// Cumulative entries use the `<=` convention: at a tied value every tied
/// observation is included, so tied positions share one value.
#[derive(Debug, Clone)]
pub struct ProcessTable {
    pub z_sorted: Vec<f64>,
    pub eps_sorted: Vec<f64>,
    /// Original index of each sorted entry (stable order).
    pub order: Vec<usize>,
    /// `n^{-1/2} * sum_{z_j <= z_(k)} eps_j`.
    pub r: Vec<f64>,
    /// `n^{-1} * sum_{z_j <= z_(k)} eps_j^2`.
    pub psi: Vec<f64>,
    /// 0-based position of `t0`.
    pub t0_index: usize,
    /// First and last sorted positions sharing `z_(k)`.
    pub group_start: Vec<usize>,
    pub group_end: Vec<usize>,
}

impl ProcessTable {
    pub fn len(&self) -> usize {
        self.z_sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_sorted.is_empty()
    }

    /// Last sorted position with `z <= t0`.
    pub fn last_index(&self) -> usize {
        self.group_end[self.t0_index]
    }

    pub fn t0(&self) -> f64 {
        self.z_sorted[self.t0_index]
    }

    fn position_at(&self, t: f64) -> Option<usize> {
        let k = self.z_sorted.partition_point(|z| *z <= t);
        k.checked_sub(1)
    }

    /// Right-continuous step evaluation of the process at `t`.
    pub fn r_at(&self, t: f64) -> f64 {
        self.position_at(t).map_or(0.0, |k| self.r[k])
    }

    pub fn psi_at(&self, t: f64) -> f64 {
        self.position_at(t).map_or(0.0, |k| self.psi[k])
    }

    /// Reorders a per-observation vector into sorted order.
    pub fn sorted<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| v[i]).collect()
    }
}

/// Tie groups of an ascending sequence.
pub fn tie_groups(z_sorted: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let n = z_sorted.len();
    let mut start = vec![0; n];
    let mut end = vec![0; n];
    let mut k = 0;
    while k < n {
        let mut e = k;
        while e + 1 < n && z_sorted[e + 1] == z_sorted[k] {
            e += 1;
        }
        for j in k..=e {
            start[j] = k;
            end[j] = e;
        }
        k = e + 1;
    }
    (start, end)
}

/// Cumulative sums evaluated with the tie convention of [`ProcessTable`].
pub fn grouped_cumsum(values: &[f64], group_end: &[usize]) -> Vec<f64> {
    let mut raw = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for v in values {
        acc += v;
        raw.push(acc);
    }
    group_end.iter().map(|&e| raw[e]).collect()
}

pub fn marked_process(z: &[f64], eps: &[f64]) -> Result<ProcessTable> {
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
    if z.iter().chain(eps).any(|v| !v.is_finite()) {
        return Err(GofError::NonFinite("process inputs"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    let z_sorted: Vec<f64> = order.iter().map(|&i| z[i]).collect();
    let eps_sorted: Vec<f64> = order.iter().map(|&i| eps[i]).collect();
    let (group_start, group_end) = tie_groups(&z_sorted);

    let scale = (n as f64).sqrt().recip();
    let inc: Vec<f64> = eps_sorted.iter().map(|e| e * scale).collect();
    let r = grouped_cumsum(&inc, &group_end);
    let sq: Vec<f64> = eps_sorted.iter().map(|e| e * e / n as f64).collect();
    let psi = grouped_cumsum(&sq, &group_end);

    Ok(ProcessTable {
        z_sorted,
        eps_sorted,
        order,
        r,
        psi,
        t0_index: t0_position(n),
        group_start,
        group_end,
    })
}
