//! Datasets: CSV ingestion, column standardization and the quadratic
//! feature expansion used for polynomial working models.
//!
//! A [`Dataset`] is the universal input of the crate. Its design matrix is
//! stored column-major (`nalgebra::DMatrix`) because every heavy consumer
//! (coordinate descent, screening) walks whole columns.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GofError, Result};
use crate::glm::Family;

/// Default upper bound on the number of columns after quadratic expansion.
pub const DEFAULT_EXPANSION_CAP: usize = 200_000;

/// Tokens treated as a missing cell by [`load_csv`].
const MISSING_TOKENS: [&str; 6] = ["", "NA", "na", "NaN", "nan", "?"];

/// Per-column centering/scaling applied by [`standardize`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Names of constant columns removed during standardization.
    pub dropped: Vec<String>,
    /// Amount subtracted from the response (0 for binomial data).
    pub response_shift: f64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub column_names: Vec<String>,
    pub response_name: String,
    pub family_hint: Option<Family>,
    pub standardization: Option<Standardization>,
}

impl Dataset {
    /// Builds a dataset with default column names `x1..xp`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, names, "y".to_string())
    }

    pub fn with_names(
        x: DMatrix<f64>,
        y: DVector<f64>,
        column_names: Vec<String>,
        response_name: String,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(GofError::DimensionMismatch(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if column_names.len() != x.ncols() {
            return Err(GofError::DimensionMismatch(format!(
                "{} column names for {} columns",
                column_names.len(),
                x.ncols()
            )));
        }
        if x.nrows() < 2 {
            return Err(GofError::InvalidArgument(format!(
                "need at least 2 observations, got {}",
                x.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GofError::NonFinite("design matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GofError::NonFinite("response"));
        }
        Ok(Self {
            x,
            y,
            column_names,
            response_name,
            family_hint: None,
            standardization: None,
        })
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family_hint = Some(family);
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Copies the given rows (in the given order) into a new dataset.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let p = self.p();
        let x = DMatrix::from_fn(rows.len(), p, |i, j| self.x[(rows[i], j)]);
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        Dataset {
            x,
            y,
            column_names: self.column_names.clone(),
            response_name: self.response_name.clone(),
            family_hint: self.family_hint,
            standardization: self.standardization.clone(),
        }
    }

    /// Copies the given columns into a new dataset.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let x = self.x.select_columns(cols);
        Dataset {
            x,
            y: self.y.clone(),
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            response_name: self.response_name.clone(),
            family_hint: self.family_hint,
            standardization: None,
        }
    }
}

/// Bookkeeping returned alongside a loaded dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell.trim())
}

/// Reads a headed CSV file. Rows with a missing cell are dropped and
/// counted; any other non-numeric cell is an error.
pub fn load_csv(
    path: impl AsRef<Path>,
    response_column: &str,
    family: Family,
) -> Result<(Dataset, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let response_idx = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| {
            GofError::InvalidArgument(format!("response column '{response_column}' not found"))
        })?;

    let p = headers.len() - 1;
    let mut values: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut report = LoadReport::default();

    for (r, record) in reader.records().enumerate() {
        let record = record?;
        report.rows_read += 1;
        if record.len() != headers.len() {
            return Err(GofError::DimensionMismatch(format!(
                "row {} has {} fields, header has {}",
                r + 1,
                record.len(),
                headers.len()
            )));
        }
        if record.iter().any(is_missing) {
            report.rows_dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(p);
        let mut y = 0.0;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| GofError::Parse {
                row: r + 1,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(GofError::Parse {
                    row: r + 1,
                    column: headers[c].clone(),
                    value: cell.to_string(),
                });
            }
            if c == response_idx {
                y = v;
            } else {
                row.push(v);
            }
        }
        if family == Family::Binomial && y != 0.0 && y != 1.0 {
            return Err(GofError::InvalidArgument(format!(
                "binomial response must be 0 or 1, row {} has {y}",
                r + 1
            )));
        }
        values.extend(row);
        ys.push(y);
    }

    if ys.is_empty() {
        return Err(GofError::InvalidArgument("no usable rows".into()));
    }
    if report.rows_dropped > 0 {
        log::warn!("dropped {} rows with missing values", report.rows_dropped);
    }
    let n = ys.len();
    let x = DMatrix::from_row_slice(n, p, &values);
    let names = headers
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let ds = Dataset::with_names(x, DVector::from_vec(ys), names, response_column.to_string())?
        .with_family(family);
    Ok((ds, report))
}

/// Writes a dataset (covariates then response) with 17 significant digits,
/// enough for an exact round trip through [`load_csv`].
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    let mut header: Vec<&str> = d.column_names.iter().map(String::as_str).collect();
    header.push(&d.response_name);
    writeln!(f, "{}", header.join(","))?;
    for i in 0..d.n() {
        let mut line = String::new();
        for j in 0..d.p() {
            line.push_str(&format!("{:.16e},", d.x[(i, j)]));
        }
        line.push_str(&format!("{:.16e}", d.y[i]));
        writeln!(f, "{line}")?;
    }
    f.flush()?;
    Ok(())
}

fn column_mean_sd(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let ss = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn is_constant(sd: f64, mean: f64) -> bool {
    sd <= 1e-12 * mean.abs().max(1.0)
}

/// Centers and scales every column by its sample mean and sample standard
/// deviation, centers a gaussian response, and drops constant columns.
pub fn standardize(d: &Dataset) -> Result<Dataset> {
    let n = d.n();
    let mut keep = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..d.p() {
        let (mean, sd) = column_mean_sd(d.x.column(j).as_slice());
        if is_constant(sd, mean) {
            log::warn!("dropping constant column '{}'", d.column_names[j]);
            dropped.push(d.column_names[j].clone());
        } else {
            keep.push(j);
            means.push(mean);
            scales.push(sd);
        }
    }
    if keep.is_empty() {
        return Err(GofError::InvalidArgument("all columns are constant".into()));
    }
    let mut x = DMatrix::zeros(n, keep.len());
    for (k, &j) in keep.iter().enumerate() {
        let src = d.x.column(j);
        let mut dst = x.column_mut(k);
        for i in 0..n {
            dst[i] = (src[i] - means[k]) / scales[k];
        }
    }
    let binomial = d.family_hint == Some(Family::Binomial);
    let shift = if binomial { 0.0 } else { d.y.mean() };
    let y = d.y.map(|v| v - shift);
    let names = keep.iter().map(|&j| d.column_names[j].clone()).collect();
    let mut out = Dataset::with_names(x, y, names, d.response_name.clone())?;
    out.family_hint = d.family_hint;
    out.standardization = Some(Standardization {
        means,
        scales,
        dropped,
        response_shift: shift,
    });
    Ok(out)
}

/// Appends every product `x_i * x_j` with `i <= j` (squares included) and
/// standardizes the new columns. Constant products are dropped.
pub fn quadratic_expand(d: &Dataset, cap: usize) -> Result<Dataset> {
    let p = d.p();
    if p == 0 {
        return Err(GofError::InvalidArgument("no columns to expand".into()));
    }
    let total = p * (p + 3) / 2;
    if total > cap {
        return Err(GofError::InvalidArgument(format!(
            "quadratic expansion would create {total} columns (cap {cap})"
        )));
    }
    let n = d.n();
    let mut names: Vec<String> = d.column_names.clone();
    let mut seen: HashSet<String> = names.iter().cloned().collect();
    let mut data: Vec<f64> = Vec::with_capacity(n * total);
    data.extend_from_slice(d.x.as_slice());
    let mut prod = vec![0.0; n];
    for i in 0..p {
        let ci = d.x.column(i);
        for j in i..p {
            let cj = d.x.column(j);
            for r in 0..n {
                prod[r] = ci[r] * cj[r];
            }
            let (mean, sd) = column_mean_sd(&prod);
            let name = format!("{}*{}", d.column_names[i], d.column_names[j]);
            if is_constant(sd, mean) {
                log::warn!("dropping constant product column '{name}'");
                continue;
            }
            if !seen.insert(name.clone()) {
                return Err(GofError::InvalidArgument(format!(
                    "duplicate column name '{name}' after expansion"
                )));
            }
            data.extend(prod.iter().map(|v| (v - mean) / sd));
            names.push(name);
        }
    }
    let cols = names.len();
    let x = DMatrix::from_vec(n, cols, data);
    let mut out = Dataset::with_names(x, d.y.clone(), names, d.response_name.clone())?;
    out.family_hint = d.family_hint;
    out.standardization = d.standardization.clone();
    Ok(out)
}
