//! Epanechnikov kernel smoothing of the nuisance curves along a projection.

use crate::error::{GofError, Result};

/// Bandwidth multipliers searched by [`cv_bandwidth`], in units of
/// `sd(z) * n^{-1/5}`.
pub const BANDWIDTH_MULTIPLIERS: [f64; 6] = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0];

pub fn epanechnikov(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        0.75 * (1.0 - x * x)
    } else {
        0.0
    }
}

fn nearest(z: &[f64], t: f64, skip: Option<usize>) -> usize {
    let mut best = usize::MAX;
    let mut dist = f64::INFINITY;
    for (i, &zi) in z.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = (zi - t).abs();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// Nadaraya-Watson estimate of `E[w | z = t]`, falling back to the value at
/// the nearest `z_i` when no point lies inside the kernel window.
pub fn nw_estimate(z: &[f64], w: &[f64], t: f64, h: f64) -> Result<f64> {
    if z.is_empty() {
        return Err(GofError::InvalidArgument("empty smoothing sample".into()));
    }
    if z.len() != w.len() {
        return Err(GofError::DimensionMismatch(format!(
            "{} points but {} values",
            z.len(),
            w.len()
        )));
    }
    if !(h > 0.0) {
        return Err(GofError::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (zi, wi) in z.iter().zip(w) {
        let k = epanechnikov((t - zi) / h) / h;
        num += k * wi;
        den += k;
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Ok(w[nearest(z, t, None)])
    }
}

/// Sorted view of a sample allowing windowed kernel sums.
struct SortedSample {
    z: Vec<f64>,
    w: Vec<Vec<f64>>,
    /// Position in the original input of each sorted entry.
    origin: Vec<usize>,
}

impl SortedSample {
    fn new(z: &[f64], series: &[&[f64]]) -> Self {
        let mut origin: Vec<usize> = (0..z.len()).collect();
        origin.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
        Self {
            z: origin.iter().map(|&i| z[i]).collect(),
            w: series
                .iter()
                .map(|s| origin.iter().map(|&i| s[i]).collect())
                .collect(),
            origin,
        }
    }

    /// Kernel-weighted sums at sorted position `k`, optionally leaving the
    /// point itself out. Returns the denominator and one numerator per series.
    fn sums(&self, k: usize, h: f64, leave_out: bool, out: &mut [f64]) -> f64 {
        let t = self.z[k];
        let lo = self.z.partition_point(|v| *v < t - h);
        let hi = self.z.partition_point(|v| *v <= t + h);
        out.fill(0.0);
        let mut den = 0.0;
        for j in lo..hi {
            if leave_out && j == k {
                continue;
            }
            let kern = epanechnikov((t - self.z[j]) / h);
            den += kern;
            for (o, s) in out.iter_mut().zip(&self.w) {
                *o += kern * s[j];
            }
        }
        den
    }

    fn fallback(&self, k: usize, leave_out: bool) -> usize {
        nearest(&self.z, self.z[k], leave_out.then_some(k))
    }
}

fn sample_sd(z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn base_bandwidth(z: &[f64]) -> Result<f64> {
    let sd = sample_sd(z);
    if !(sd > 0.0) {
        return Err(GofError::DegenerateResponse(
            "projected points have zero spread".into(),
        ));
    }
    Ok(sd * (z.len() as f64).powf(-0.2))
}

/// Leave-one-out squared prediction error of the smoother at bandwidth `h`.
fn loo_error(sample: &SortedSample, h: f64) -> f64 {
    let n = sample.z.len();
    let mut buf = [0.0];
    let mut total = 0.0;
    for k in 0..n {
        let den = sample.sums(k, h, true, &mut buf);
        let pred = if den > 0.0 {
            buf[0] / den
        } else {
            sample.w[0][sample.fallback(k, true)]
        };
        total += (sample.w[0][k] - pred).powi(2);
    }
    total
}

/// Bandwidth minimizing leave-one-out squared error over
/// `c * sd(z) * n^{-1/5}` for `c` in `multipliers`.
pub fn cv_bandwidth_over(z: &[f64], w: &[f64], multipliers: &[f64]) -> Result<f64> {
    if z.len() != w.len() {
        return Err(GofError::DimensionMismatch(format!(
            "{} points but {} values",
            z.len(),
            w.len()
        )));
    }
    if z.len() < 10 {
        return Err(GofError::InvalidArgument(format!(
            "bandwidth selection needs at least 10 points, got {}",
            z.len()
        )));
    }
    if multipliers.is_empty() || multipliers.iter().any(|c| !(*c > 0.0)) {
        return Err(GofError::InvalidArgument(
            "bandwidth multipliers must be positive".into(),
        ));
    }
    let base = base_bandwidth(z)?;
    if multipliers.len() == 1 {
        return Ok(multipliers[0] * base);
    }
    let sample = SortedSample::new(z, &[w]);
    let mut best = (f64::INFINITY, base);
    for &c in multipliers {
        let h = c * base;
        let err = loo_error(&sample, h);
        if err < best.0 {
            best = (err, h);
        }
    }
    Ok(best.1)
}

pub fn cv_bandwidth(z: &[f64], w: &[f64]) -> Result<f64> {
    cv_bandwidth_over(z, w, &BANDWIDTH_MULTIPLIERS)
}

/// Kernel estimates of the conditional residual variance and of the two
/// derivative curves, evaluated at every projected point.
#[derive(Debug, Clone)]
pub struct NuisanceCurves {
    pub eval_points: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub bandwidth: f64,
    /// Lower bound applied to `sigma2`.
    pub floor: f64,
}

/// Smooths `eps^2`, `muprime` and `index * muprime` against `z` with one
/// shared cross-validated bandwidth.
pub fn estimate_nuisance_curves(
    z: &[f64],
    eps: &[f64],
    muprime: &[f64],
    index_vals: &[f64],
) -> Result<NuisanceCurves> {
    estimate_nuisance_curves_with(z, eps, muprime, index_vals, &BANDWIDTH_MULTIPLIERS)
}

pub fn estimate_nuisance_curves_with(
    z: &[f64],
    eps: &[f64],
    muprime: &[f64],
    index_vals: &[f64],
    multipliers: &[f64],
) -> Result<NuisanceCurves> {
    let n = z.len();
    if eps.len() != n || muprime.len() != n || index_vals.len() != n {
        return Err(GofError::DimensionMismatch(
            "nuisance inputs differ in length".into(),
        ));
    }
    if n == 0 {
        return Err(GofError::InvalidArgument("empty smoothing sample".into()));
    }
    let eps2: Vec<f64> = eps.iter().map(|e| e * e).collect();
    let weighted: Vec<f64> = index_vals.iter().zip(muprime).map(|(b, m)| b * m).collect();
    let bandwidth = if n >= 10 {
        cv_bandwidth_over(z, &eps2, multipliers)?
    } else {
        base_bandwidth(z)?
    };

    let sample = SortedSample::new(z, &[&eps2, muprime, &weighted]);
    let floor = 1e-4 * eps2.iter().sum::<f64>() / n as f64 + 1e-12;
    let mut sigma2 = vec![0.0; n];
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    let mut buf = [0.0; 3];
    for k in 0..n {
        let den = sample.sums(k, bandwidth, false, &mut buf);
        let vals = if den > 0.0 {
            [buf[0] / den, buf[1] / den, buf[2] / den]
        } else {
            let j = sample.fallback(k, false);
            [sample.w[0][j], sample.w[1][j], sample.w[2][j]]
        };
        let i = sample.origin[k];
        sigma2[i] = vals[0].max(floor);
        g1[i] = vals[1];
        g2[i] = vals[2];
    }
    Ok(NuisanceCurves {
        eval_points: z.to_vec(),
        sigma2,
        g1,
        g2,
        bandwidth,
        floor,
    })
}
