//! Reference laws: the distribution of the integrated squared Brownian
//! motion, the normal and Cauchy tails, and Cauchy p-value combination.
//!
//! `int_0^1 B(t)^2 dt` has the Karhunen-Loeve representation
//! `sum_k lambda_k Z_k^2` with `lambda_k = 4 / ((2k - 1)^2 pi^2)`. The series
//! is truncated after [`EIGEN_COUNT`] terms, the mean of the remainder is added
//! as a constant shift, and the CDF is recovered by Imhof's inversion
//!
//! ```text
//! P(Q <= x) = 1/2 - (1/pi) int_0^inf sin(theta(u) - (x - c) u / 2) / (u rho(u)) du
//! theta(u) = 1/2 sum_k atan(lambda_k u),  rho(u) = prod_k (1 + lambda_k^2 u^2)^{1/4}
//! ```
//!
//! evaluated with composite Gauss-Legendre panels on a node set that is
//! computed once per process.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use statrs::function::erf::erfc;

use crate::error::{GofError, Result};

pub const EIGEN_COUNT: usize = 200;
/// Bounds applied to every p-value before it is used.
pub const P_MIN: f64 = 1e-15;
pub const P_MAX: f64 = 1.0 - 1e-15;
/// Spacing of the cached quantile table.
pub const TABLE_STEP: f64 = 1e-4;
pub const TABLE_HEADER: &str = "# cvm-bm-law K=200 v1";

const PANEL_WIDTH: f64 = 1.0;
const PANEL_COUNT: usize = 3000;
/// Beyond this point the upper tail is below 1e-20.
const UPPER_LIMIT: f64 = 40.0;

pub fn clip_p(p: f64) -> f64 {
    p.clamp(P_MIN, P_MAX)
}

/// 20-point Gauss-Legendre nodes and weights on [-1, 1] (positive half).
const GL_NODES: [f64; 10] = [
    0.076_526_521_133_497_33,
    0.227_785_851_141_645_08,
    0.373_706_088_715_419_56,
    0.510_867_001_950_827_1,
    0.636_053_680_726_515,
    0.746_331_906_460_150_8,
    0.839_116_971_822_218_8,
    0.912_234_428_251_325_9,
    0.963_971_927_277_913_8,
    0.993_128_599_185_094_9,
];
const GL_WEIGHTS: [f64; 10] = [
    0.152_753_387_130_725_85,
    0.149_172_986_472_603_75,
    0.142_096_109_318_382_05,
    0.131_688_638_449_176_63,
    0.118_194_531_961_518_42,
    0.101_930_119_817_240_44,
    0.083_276_741_576_704_75,
    0.062_672_048_334_109_06,
    0.040_601_429_800_386_94,
    0.017_614_007_139_152_12,
];

/// Law of `int_0^1 B(t)^2 dt` for standard Brownian motion `B`.
#[derive(Debug)]
pub struct CvmBmLaw {
    weights: Vec<f64>,
    shift: f64,
    /// Offsets of the quadrature nodes within a panel.
    offsets: Vec<f64>,
    /// Per node: `w / (u rho) * exp(i theta)` for the CDF and
    /// `w / rho * exp(i theta)` for the density, as (re, im) pairs.
    cdf_terms: Vec<(f64, f64)>,
    pdf_terms: Vec<(f64, f64)>,
    table: OnceLock<Vec<(f64, f64)>>,
}

impl CvmBmLaw {
    pub fn new(eigen_count: usize) -> Self {
        let weights: Vec<f64> = (1..=eigen_count)
            .map(|k| {
                let odd = (2 * k - 1) as f64;
                4.0 / (odd * odd * PI * PI)
            })
            .collect();
        let shift = 0.5 - weights.iter().sum::<f64>();

        let mut offsets = Vec::with_capacity(20);
        let mut offset_weights = Vec::with_capacity(20);
        for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS).rev() {
            offsets.push(0.5 * PANEL_WIDTH * (1.0 - x));
            offset_weights.push(0.5 * PANEL_WIDTH * w);
        }
        for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            offsets.push(0.5 * PANEL_WIDTH * (1.0 + x));
            offset_weights.push(0.5 * PANEL_WIDTH * w);
        }

        let mut cdf_terms = Vec::with_capacity(PANEL_COUNT * offsets.len());
        let mut pdf_terms = Vec::with_capacity(PANEL_COUNT * offsets.len());
        for p in 0..PANEL_COUNT {
            for (o, w) in offsets.iter().zip(&offset_weights) {
                let u = p as f64 * PANEL_WIDTH + o;
                let mut theta = 0.0;
                let mut log_rho = 0.0;
                for l in &weights {
                    theta += (l * u).atan();
                    log_rho += (l * l * u * u).ln_1p();
                }
                theta *= 0.5;
                let amp = w * (-0.25 * log_rho).exp();
                let (s, c) = theta.sin_cos();
                cdf_terms.push((amp * c / u, amp * s / u));
                pdf_terms.push((amp * c, amp * s));
            }
        }
        Self {
            weights,
            shift,
            offsets,
            cdf_terms,
            pdf_terms,
            table: OnceLock::new(),
        }
    }

    /// Shared instance with the default truncation.
    pub fn global() -> &'static CvmBmLaw {
        static LAW: OnceLock<CvmBmLaw> = OnceLock::new();
        LAW.get_or_init(|| CvmBmLaw::new(EIGEN_COUNT))
    }

    pub fn eigen_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean of the discarded eigen-terms, added as a constant.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `sum_i terms_i * exp(-i omega u_i)`, using per-panel rotations.
    fn rotated_sum(&self, terms: &[(f64, f64)], omega: f64) -> (f64, f64) {
        let m = self.offsets.len();
        let q: Vec<(f64, f64)> = self
            .offsets
            .iter()
            .map(|o| {
                let (s, c) = (omega * o).sin_cos();
                (c, -s)
            })
            .collect();
        let (sw, cw) = (omega * PANEL_WIDTH).sin_cos();
        let step = (cw, -sw);
        let mut rot = (1.0, 0.0);
        let mut total = (0.0, 0.0);
        for (p, panel) in terms.chunks_exact(m).enumerate() {
            if p % 64 == 0 {
                let (s, c) = (omega * p as f64 * PANEL_WIDTH).sin_cos();
                rot = (c, -s);
            }
            let mut acc = (0.0, 0.0);
            for (t, r) in panel.iter().zip(&q) {
                acc.0 += t.0 * r.0 - t.1 * r.1;
                acc.1 += t.0 * r.1 + t.1 * r.0;
            }
            total.0 += acc.0 * rot.0 - acc.1 * rot.1;
            total.1 += acc.0 * rot.1 + acc.1 * rot.0;
            rot = (rot.0 * step.0 - rot.1 * step.1, rot.0 * step.1 + rot.1 * step.0);
        }
        total
    }

    /// `P(Q <= x)`.
    pub fn try_cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(GofError::NonFinite("CDF argument"));
        }
        if x <= self.shift {
            return Ok(0.0);
        }
        if x >= UPPER_LIMIT {
            return Ok(1.0);
        }
        let omega = 0.5 * (x - self.shift);
        let (_, im) = self.rotated_sum(&self.cdf_terms, omega);
        let value = 0.5 - im / PI;
        if !value.is_finite() || !(-1e-7..=1.0 + 1e-7).contains(&value) {
            return Err(GofError::Quadrature(format!(
                "CDF at {x} evaluated to {value}"
            )));
        }
        Ok(value.clamp(0.0, 1.0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.try_cdf(x).expect("CDF quadrature on the fixed node set")
    }

    /// Density of the law.
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= self.shift || x >= UPPER_LIMIT {
            return 0.0;
        }
        let omega = 0.5 * (x - self.shift);
        let (re, _) = self.rotated_sum(&self.pdf_terms, omega);
        (re / (2.0 * PI)).max(0.0)
    }

    /// Inverse CDF by bisection to 1e-8.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(GofError::InvalidArgument(format!(
                "quantile level {q} outside (0, 1)"
            )));
        }
        let (mut lo, mut hi) = match self.table.get() {
            Some(table) => bracket(table, q).unwrap_or((self.shift, UPPER_LIMIT)),
            None => (self.shift, UPPER_LIMIT),
        };
        while hi - lo > 1e-8 {
            let mid = 0.5 * (lo + hi);
            if self.try_cdf(mid)? < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Quantiles at probabilities `k * 1e-4`, `k = 1..9999`, computed on
    /// first use.
    pub fn quantile_table(&self) -> &[(f64, f64)] {
        self.table.get_or_init(|| self.build_table())
    }

    fn build_table(&self) -> Vec<(f64, f64)> {
        let count = (1.0 / TABLE_STEP).round() as usize;
        let mut out = Vec::with_capacity(count - 1);
        let mut x = self.quantile_by_bisection(TABLE_STEP);
        for k in 1..count {
            let q = k as f64 * TABLE_STEP;
            x = self.newton_quantile(q, x);
            out.push((q, x));
        }
        out
    }

    fn quantile_by_bisection(&self, q: f64) -> f64 {
        let (mut lo, mut hi) = (self.shift, UPPER_LIMIT);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Newton iterations from `start`, falling back to bisection when a
    /// step leaves the support or fails to converge.
    fn newton_quantile(&self, q: f64, start: f64) -> f64 {
        let mut x = start;
        for _ in 0..20 {
            let f = self.cdf(x) - q;
            let d = self.pdf(x);
            if !(d > 0.0) {
                break;
            }
            let step = f / d;
            x -= step;
            if x <= self.shift || x >= UPPER_LIMIT {
                break;
            }
            if step.abs() < 1e-11 * x.max(1.0) {
                return x;
            }
        }
        self.quantile_by_bisection(q)
    }

    /// Writes the quantile table in the plain-text exchange format.
    pub fn write_table(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, format_table(self.quantile_table()))?;
        Ok(())
    }
}

fn bracket(table: &[(f64, f64)], q: f64) -> Option<(f64, f64)> {
    let k = table.partition_point(|(p, _)| *p < q);
    if k == 0 || k >= table.len() {
        return None;
    }
    // widen by a hair so rounding in the table cannot exclude the root
    Some((table[k - 1].1 - 1e-9, table[k].1 + 1e-9))
}

pub fn format_table(table: &[(f64, f64)]) -> String {
    let mut s = String::with_capacity(table.len() * 32);
    s.push_str(TABLE_HEADER);
    s.push('\n');
    for (p, v) in table {
        writeln!(s, "{p:.4} {v:.12e}").expect("writing to a String");
    }
    s
}

/// Reads a table written by [`CvmBmLaw::write_table`].
pub fn read_table(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TABLE_HEADER) {
        return Err(GofError::InvalidArgument(format!(
            "quantile table must start with '{TABLE_HEADER}'"
        )));
    }
    let mut out = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut field = |name: &str| -> Result<f64> {
            let token = parts.next().unwrap_or("");
            token.parse().map_err(|_| GofError::Parse {
                row: row + 2,
                column: name.to_string(),
                value: token.to_string(),
            })
        };
        let p = field("prob")?;
        let v = field("value")?;
        out.push((p, v));
    }
    Ok(out)
}

pub fn cvm_bm_cdf(x: f64) -> f64 {
    CvmBmLaw::global().cdf(x)
}

pub fn cvm_bm_quantile(q: f64) -> Result<f64> {
    CvmBmLaw::global().quantile(q)
}

/// Clipped upper-tail p-value `1 - Psi(stat)`.
pub fn cvm_bm_pvalue(stat: f64) -> Result<f64> {
    Ok(clip_p(1.0 - CvmBmLaw::global().try_cdf(stat)?))
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Clipped upper-tail normal p-value.
pub fn normal_pvalue(stat: f64) -> f64 {
    clip_p(0.5 * erfc(stat / std::f64::consts::SQRT_2))
}

/// Survival function of the standard Cauchy law.
pub fn cauchy_sf(x: f64) -> f64 {
    if x > 1.0 {
        (1.0 / x).atan() / PI
    } else {
        0.5 - x.atan() / PI
    }
}

/// Weighted Cauchy combination of p-values. Returns the statistic
/// `sum w_i tan((1/2 - p_i) pi)` and its Cauchy tail probability.
pub fn cauchy_combine(pvals: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    if pvals.is_empty() || pvals.len() != weights.len() {
        return Err(GofError::DimensionMismatch(format!(
            "{} p-values with {} weights",
            pvals.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(GofError::InvalidArgument(format!(
            "weights must be non-negative and sum to 1 (sum {total})"
        )));
    }
    if pvals.iter().any(|p| !p.is_finite()) {
        return Err(GofError::NonFinite("p-values"));
    }
    let stat: f64 = pvals
        .iter()
        .zip(weights)
        .map(|(p, w)| w * ((0.5 - clip_p(*p)) * PI).tan())
        .sum();
    Ok((stat, cauchy_sf(stat)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `Psi(x) = sqrt(2) sum_k binom(-1/2, k) erfc((2k + 1/2) / sqrt(2x))`,
    /// from inverting the Laplace transform `cosh(sqrt(2s))^{-1/2}`.
    fn series_cdf(x: f64) -> f64 {
        let mut coef = 1.0;
        let mut sum = 0.0;
        for k in 0..400 {
            if k > 0 {
                coef *= -(2.0 * k as f64 - 1.0) / (2.0 * k as f64);
            }
            sum += coef * erfc((2.0 * k as f64 + 0.5) / (2.0 * x).sqrt());
        }
        std::f64::consts::SQRT_2 * sum
    }

    #[test]
    fn cdf_matches_the_laplace_series() {
        let law = CvmBmLaw::global();
        for x in [0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.2, 2.0, 3.5] {
            let a = law.cdf(x);
            let b = series_cdf(x);
            assert!((a - b).abs() < 1e-5, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn cdf_edges_and_monotonicity() {
        let law = CvmBmLaw::global();
        assert_eq!(law.cdf(0.0), 0.0);
        assert_eq!(law.cdf(-1.0), 0.0);
        assert!(law.cdf(20.0) > 1.0 - 1e-6);
        let mut prev = 0.0;
        for k in 0..1000 {
            let v = law.cdf(k as f64 * 0.01);
            assert!(v >= prev - 1e-12, "not monotone at {}", k as f64 * 0.01);
            prev = v;
        }
    }

    #[test]
    fn eigenvalue_partial_sum() {
        let law = CvmBmLaw::global();
        let s: f64 = law.weights().iter().sum();
        assert!((0.5 - s) < 1.0 / (2.0 * EIGEN_COUNT as f64));
        assert!(law.weights().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn density_integrates_to_the_cdf() {
        let law = CvmBmLaw::global();
        let (a, b) = (0.2, 1.0);
        let m = 400;
        let h = (b - a) / m as f64;
        let mut s = law.pdf(a) + law.pdf(b);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * law.pdf(a + i as f64 * h);
        }
        let integral = s * h / 3.0;
        assert!((integral - (law.cdf(b) - law.cdf(a))).abs() < 1e-7);
    }

    #[test]
    fn quantile_round_trip() {
        let law = CvmBmLaw::global();
        for q in [0.01, 0.5, 0.9, 0.95, 0.99] {
            let x = law.quantile(q).unwrap();
            assert!((law.cdf(x) - q).abs() < 1e-6);
        }
        assert!(law.quantile(0.9).unwrap() < law.quantile(0.99).unwrap());
        assert!(law.quantile(0.0).is_err());
        assert!(law.quantile(1.0).is_err());
    }

    #[test]
    fn table_format_round_trip() {
        let table = vec![(0.0001, 0.0123), (0.5, 0.4), (0.9999, 7.5)];
        let text = format_table(&table);
        assert!(text.starts_with(TABLE_HEADER));
        let back = parse_table(&text).unwrap();
        assert_eq!(back, table);
        assert!(parse_table("prob value\n0.1 0.2\n").is_err());
        assert!(parse_table(&format!("{TABLE_HEADER}\n0.1 abc\n")).is_err());
    }

    #[test]
    fn normal_and_cauchy_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.96) - 0.9750).abs() < 1e-4);
        assert!((normal_pvalue(1.6449) - 0.05).abs() < 1e-4);
        assert_eq!(normal_pvalue(0.0), 0.5);
        assert_eq!(normal_pvalue(-10.0), P_MAX);
        assert_eq!(cauchy_sf(0.0), 0.5);
        assert!((cauchy_sf(1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cauchy_combination_identities() {
        assert_eq!(cauchy_combine(&[0.5], &[1.0]).unwrap(), (0.0, 0.5));
        let (t, p) = cauchy_combine(&[0.3], &[1.0]).unwrap();
        assert!((t - (0.2 * PI).tan()).abs() < 1e-14);
        assert!((p - 0.3).abs() < 1e-14);
        let (t, p) = cauchy_combine(&[0.01, 0.99], &[0.5, 0.5]).unwrap();
        assert!(t.abs() < 1e-12);
        assert!((p - 0.5).abs() < 1e-12);
        let (_, p) = cauchy_combine(&[0.2; 4], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!((p - 0.2).abs() < 1e-14);
        assert!(cauchy_combine(&[0.2, 0.3], &[0.5, 0.6]).is_err());
        assert!(cauchy_combine(&[0.2], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn combination_is_monotone_in_each_input() {
        let w = [0.25; 4];
        let base = [0.1, 0.4, 0.6, 0.8];
        let (t0, p0) = cauchy_combine(&base, &w).unwrap();
        for i in 0..4 {
            let mut q = base;
            q[i] *= 0.9;
            let (t, p) = cauchy_combine(&q, &w).unwrap();
            assert!(t > t0 && p < p0);
        }
    }
}
