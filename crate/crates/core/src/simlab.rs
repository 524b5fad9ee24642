//! Data generators for the two simulation studies and a Monte Carlo harness
//! for rejection rates.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GofError, Result};
use crate::glm::{logistic, Family};
use crate::orchestrator::{run_test, Config, Method};

/// Replications per checkpoint.
pub const CHECKPOINT_EVERY: usize = 25;
/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Study {
    S1,
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    H11,
    H12,
    H13,
    H21,
    H22,
}

impl Model {
    pub fn study(self) -> Study {
        match self {
            Model::H11 | Model::H12 | Model::H13 => Study::S1,
            Model::H21 | Model::H22 => Study::S2,
        }
    }

    pub fn family(self) -> Family {
        match self.study() {
            Study::S1 => Family::Gaussian,
            Study::S2 => Family::Binomial,
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "H11" => Ok(Model::H11),
            "H12" => Ok(Model::H12),
            "H13" => Ok(Model::H13),
            "H21" => Ok(Model::H21),
            "H22" => Ok(Model::H22),
            other => Err(format!("unknown model '{other}'")),
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub study: Study,
    pub model: Model,
    /// Deviation strength; 0 gives the null model.
    pub a: f64,
    pub n: usize,
    pub p: usize,
    /// AR(1) correlation of the covariates.
    pub rho: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(model: Model, a: f64, n: usize, p: usize, rho: f64, seed: u64) -> Self {
        Self {
            study: model.study(),
            model,
            a,
            n,
            p,
            rho,
            seed,
        }
    }

    fn check(&self) -> Result<()> {
        if self.model.study() != self.study {
            return Err(GofError::InvalidArgument(format!(
                "model {} does not belong to study {:?}",
                self.model, self.study
            )));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(GofError::InvalidArgument(format!("rho {} outside (-1, 1)", self.rho)));
        }
        if self.n < 2 {
            return Err(GofError::InvalidArgument("need n >= 2".into()));
        }
        if !self.a.is_finite() {
            return Err(GofError::NonFinite("deviation strength"));
        }
        Ok(())
    }
}

/// Rows of `N(0, Sigma)` with `Sigma_ij = rho^|i-j|`, drawn by the AR(1)
/// recursion along each row.
pub fn ar1_design<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> DMatrix<f64> {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let xi: f64 = rng.sample(StandardNormal);
            prev = if j == 0 { xi } else { rho * prev + innovation * xi };
            x[(i, j)] = prev;
        }
    }
    x
}

pub fn gen_study1(s: &Scenario) -> Result<Dataset> {
    gen_study1_with(s, &mut ChaCha8Rng::seed_from_u64(s.seed))
}

pub fn gen_study1_with<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Result<Dataset> {
    s.check()?;
    if s.study != Study::S1 {
        return Err(GofError::InvalidArgument(format!("{} is not a study 1 model", s.model)));
    }
    if s.p < 10 {
        return Err(GofError::InvalidArgument(format!("study 1 needs p >= 10, got {}", s.p)));
    }
    let x = ar1_design(s.n, s.p, s.rho, rng);
    let y = DVector::from_fn(s.n, |i, _| {
        let row = x.row(i);
        let index: f64 = (0..5).map(|j| row[j]).sum();
        let deviation = match s.model {
            Model::H11 => 0.1 * index * index,
            Model::H12 => (0.6 * std::f64::consts::PI * index).cos(),
            _ => (0.25 * (0..10).map(|j| row[j]).sum::<f64>()).exp(),
        };
        index + s.a * deviation
    });
    let noise: Vec<f64> = (0..s.n).map(|_| rng.sample(StandardNormal)).collect();
    let y = y + DVector::from_vec(noise);
    Ok(Dataset::new(x, y)?.with_family(Family::Gaussian))
}

pub fn gen_study2(s: &Scenario) -> Result<Dataset> {
    gen_study2_with(s, &mut ChaCha8Rng::seed_from_u64(s.seed))
}

pub fn gen_study2_with<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Result<Dataset> {
    s.check()?;
    if s.study != Study::S2 {
        return Err(GofError::InvalidArgument(format!("{} is not a study 2 model", s.model)));
    }
    if s.p < 5 {
        return Err(GofError::InvalidArgument(format!("study 2 needs p >= 5, got {}", s.p)));
    }
    let x = ar1_design(s.n, s.p, s.rho, rng);
    let mut y = DVector::zeros(s.n);
    for i in 0..s.n {
        let row = x.row(i);
        let index: f64 = (0..5).map(|j| row[j]).sum();
        let g = match s.model {
            Model::H21 => 0.2 * index * index,
            _ => (0..4).map(|j| row[j] * row[j + 1]).sum(),
        };
        let mu = logistic(index + s.a * g);
        y[i] = if rng.random::<f64>() < mu { 1.0 } else { 0.0 };
    }
    Ok(Dataset::new(x, y)?.with_family(Family::Binomial))
}

/// Draws a dataset for any scenario.
pub fn generate<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Result<Dataset> {
    match s.study {
        Study::S1 => gen_study1_with(s, rng),
        Study::S2 => gen_study2_with(s, rng),
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub test_seed: u64,
    pub pvalue: Option<f64>,
    pub reject: Option<bool>,
    pub error: Option<String>,
}

/// Replication `rep` of an experiment: its own ChaCha stream keyed by the
/// experiment seed and the replication index.
pub fn run_replication(
    s: &Scenario,
    cfg: &Config,
    level: f64,
    seed: u64,
    rep: usize,
) -> RepRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    let test_seed = rng.next_u64();
    let outcome = generate(s, &mut rng).and_then(|data| {
        let cfg = Config {
            seed: test_seed,
            ..cfg.clone()
        };
        run_test(&data, &cfg)
    });
    match outcome {
        Ok(report) => RepRecord {
            rep,
            test_seed,
            pvalue: Some(report.pvalue),
            reject: Some(report.pvalue <= level),
            error: None,
        },
        Err(e) => RepRecord {
            rep,
            test_seed,
            pvalue: None,
            reject: None,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub scenario: Scenario,
    pub method: Method,
    pub level: f64,
    pub rejection_rate: f64,
    /// Binomial standard error of the rate.
    pub mc_se: f64,
    /// Replications that produced a p-value.
    pub completed: usize,
    pub failures: usize,
    pub records: Vec<RepRecord>,
}

impl Experiment {
    pub fn row(&self) -> ExperimentRow {
        ExperimentRow {
            model: self.scenario.model.to_string(),
            rho: self.scenario.rho,
            n: self.scenario.n,
            p: self.scenario.p,
            a: self.scenario.a,
            method: self.method.name().to_string(),
            reps: self.completed,
            rate: self.rejection_rate,
            se: self.mc_se,
        }
    }
}

/// One CSV row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub model: String,
    pub rho: f64,
    pub n: usize,
    pub p: usize,
    pub a: f64,
    pub method: String,
    pub reps: usize,
    pub rate: f64,
    pub se: f64,
}

pub fn write_rows(path: impl AsRef<Path>, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<ExperimentRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(GofError::from))
        .collect()
}

fn summarize(records: &[RepRecord]) -> (usize, usize, f64, f64) {
    let done: Vec<bool> = records.iter().filter_map(|r| r.reject).collect();
    let failures = records.len() - done.len();
    let m = done.len();
    let rate = if m == 0 {
        f64::NAN
    } else {
        done.iter().filter(|r| **r).count() as f64 / m as f64
    };
    let se = (rate * (1.0 - rate) / m as f64).sqrt();
    (m, failures, rate, se)
}

/// Monte Carlo rejection rate of `cfg.method` on a scenario.
pub fn mc_experiment(
    s: &Scenario,
    cfg: &Config,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<Experiment> {
    mc_experiment_with(s, cfg, reps, level, seed, |_| Ok(()))
}

/// As [`mc_experiment`], calling `checkpoint` with the records gathered so
/// far after every block of replications.
pub fn mc_experiment_with(
    s: &Scenario,
    cfg: &Config,
    reps: usize,
    level: f64,
    seed: u64,
    mut checkpoint: impl FnMut(&[RepRecord]) -> Result<()>,
) -> Result<Experiment> {
    s.check()?;
    if reps < 50 {
        return Err(GofError::InvalidArgument(format!("need at least 50 replications, got {reps}")));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(GofError::InvalidArgument(format!("level {level} outside (0, 1]")));
    }
    if cfg.family != s.model.family() {
        return Err(GofError::InvalidArgument(format!(
            "model {} needs the {} family, got {}",
            s.model,
            s.model.family(),
            cfg.family
        )));
    }
    let mut records = Vec::with_capacity(reps);
    for start in (0..reps).step_by(CHECKPOINT_EVERY) {
        let end = (start + CHECKPOINT_EVERY).min(reps);
        let mut block: Vec<RepRecord> = (start..end)
            .into_par_iter()
            .map(|rep| run_replication(s, cfg, level, seed, rep))
            .collect();
        records.append(&mut block);
        checkpoint(&records)?;
    }
    let (completed, failures, rate, se) = summarize(&records);
    if failures as f64 > MAX_FAILURE_SHARE * reps as f64 {
        let first = records
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(GofError::Experiment(format!(
            "{failures} of {reps} replications failed (first: {first})"
        )));
    }
    Ok(Experiment {
        scenario: *s,
        method: cfg.method,
        level,
        rejection_rate: rate,
        mc_se: se,
        completed,
        failures,
        records,
    })
}

/// Writes replication records as CSV, used for checkpoints.
pub fn write_records(path: impl AsRef<Path>, records: &[RepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
