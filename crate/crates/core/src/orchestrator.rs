//! The split-sample tests: projections are estimated on one half and the
//! projected statistics evaluated on the other, then all p-values are merged
//! by Cauchy combination.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GofError, Result};
use crate::glm::{fit_cv_post_lasso, residuals, Family, FittedModel, DEFAULT_FOLDS};
use crate::nulldist::cauchy_combine;
use crate::pls::{pls_bandwidth, pls_pvalue, pls_statistic};
use crate::process::project;
use crate::projector::{
    estimate_projections, split_data, DirectionSource, Half, ProjectionSet, ProjectorConfig,
    SplitPlan,
};
use crate::transform::{tcvm_from_parts, Mode, ProjectedOptions};

/// Smallest sample the split tests accept.
pub const MIN_OBSERVATIONS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Projections from the first half, statistics on the second.
    TcvmC,
    /// Both split directions.
    TcvmCf,
    /// Both split directions plus local-smoothing terms.
    HybridCf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TcvmC => "tcvm-c",
            Method::TcvmCf => "tcvm-cf",
            Method::HybridCf => "hybrid-cf",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "tcvm-c" => Ok(Method::TcvmC),
            "tcvm-cf" => Ok(Method::TcvmCf),
            "hybrid-cf" => Ok(Method::HybridCf),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub method: Method,
    pub family: Family,
    pub seed: u64,
    pub folds: usize,
    pub projector: ProjectorConfig,
    pub level: f64,
    /// Overrides the family's default mode.
    pub mode: Option<Mode>,
    /// Include the constant score component in the transformation.
    pub intercept_score: bool,
}

impl Config {
    pub fn new(method: Method, family: Family, seed: u64) -> Self {
        Self {
            method,
            family,
            seed,
            folds: DEFAULT_FOLDS,
            projector: ProjectorConfig::default(),
            level: 0.05,
            mode: None,
            intercept_score: true,
        }
    }

    /// Homoscedastic for gaussian data, general otherwise, unless overridden.
    pub fn effective_mode(&self) -> Mode {
        self.mode.unwrap_or(match self.family {
            Family::Gaussian => Mode::Homoscedastic,
            Family::Binomial => Mode::General,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(GofError::InvalidArgument(format!(
                "level {} outside (0, 1)",
                self.level
            )));
        }
        if self.folds < 2 {
            return Err(GofError::InvalidArgument("need at least 2 folds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Tcvm,
    Pls,
}

/// One combined p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    /// Half on which the direction was estimated.
    pub half: Half,
    /// Half on which the statistic was computed.
    pub evaluated_on: Half,
    /// Position in that half's projection set; 0 is the coefficient
    /// direction when present.
    pub direction_index: usize,
    pub source: DirectionSource,
    pub kind: TermKind,
    pub stat: f64,
    pub p: f64,
    pub weight: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedProjection {
    pub half: Half,
    pub direction_index: usize,
    pub kind: TermKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: Method,
    pub family: Family,
    pub mode: Mode,
    pub n: usize,
    pub p: usize,
    /// Cauchy combination statistic.
    pub statistic: f64,
    pub pvalue: f64,
    pub level: f64,
    pub reject: bool,
    pub per_projection: Vec<ProjectionResult>,
    /// Inverse-regression directions kept on each half; absent when the
    /// half supplied no projections.
    pub d_hat_1: Option<usize>,
    pub d_hat_2: Option<usize>,
    pub dropped_projections: Vec<DroppedProjection>,
    pub seed: u64,
    pub split_checksum: u64,
    /// The residuals of every statistic come from a fit on the half where
    /// the statistic is computed.
    pub refit_on_statistic_half: bool,
    /// Set when one cross-fitting direction failed entirely.
    pub single_direction: bool,
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// SplitMix64 mixing of a seed with a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn half_tag(half: Half) -> u64 {
    match half {
        Half::D1 => 1,
        Half::D2 => 2,
    }
}

/// Everything estimated on one half: the model refit there and, when
/// requested, the projections it contributes to the other half.
#[derive(Debug, Clone)]
pub struct HalfFit {
    pub half: Half,
    pub data: Dataset,
    pub model: FittedModel,
    pub projections: Option<std::result::Result<ProjectionSet, String>>,
}

pub fn fit_half(
    data: &Dataset,
    plan: &SplitPlan,
    half: Half,
    cfg: &Config,
    with_projections: bool,
) -> Result<HalfFit> {
    let sub = data.select_rows(plan.indices(half));
    let tag = half_tag(half);
    let model = fit_cv_post_lasso(&sub, cfg.family, cfg.folds, derive_seed(cfg.seed, tag))?;
    let projections = with_projections.then(|| {
        estimate_projections(
            &sub,
            &model,
            cfg.family,
            half,
            &cfg.projector,
            derive_seed(cfg.seed, 10 + tag),
        )
        .map_err(|e| e.to_string())
    });
    Ok(HalfFit {
        half,
        data: sub,
        model,
        projections,
    })
}

/// Outcome of evaluating one half's projections on the other half.
#[derive(Debug, Clone)]
pub struct DirectionOutcome {
    pub terms: Vec<ProjectionResult>,
    pub dropped: Vec<DroppedProjection>,
}

/// Statistics for every projection of `source`, computed on `target` with
/// the model refit there. Untransformable projections are dropped.
pub fn evaluate_direction(
    source: &ProjectionSet,
    target: &HalfFit,
    cfg: &Config,
    with_pls: bool,
) -> Result<DirectionOutcome> {
    use rayon::prelude::*;

    let options = ProjectedOptions {
        intercept_score: cfg.intercept_score,
        ..ProjectedOptions::new(cfg.effective_mode())
    };
    let eps = residuals(&target.model, &target.data)?;
    let eta = target.model.linear_predictor(&target.data)?;
    let id_base = match source.source_half {
        Half::D1 => 0,
        Half::D2 => 1000,
    };

    type Row = (TermKind, f64, f64, bool);
    // the TCvM term may be untransformable while the PLS term is still usable
    let outcomes: Vec<Result<(std::result::Result<Row, String>, Option<Row>)>> = source
        .directions
        .par_iter()
        .zip(source.sources.par_iter())
        .enumerate()
        .map(|(idx, (dir, src))| {
            let z = project(&target.data.x, dir)?;
            let tcvm = match tcvm_from_parts(
                z.as_slice(),
                eps.as_slice(),
                Some((eta.as_slice(), &target.model)),
                &options,
                id_base + idx,
            ) {
                Ok(t) => Ok((TermKind::Tcvm, t.statistic, t.pvalue, t.degenerate)),
                Err(GofError::Untransformable(_, reason)) => Err(reason),
                Err(e) => return Err(e),
            };
            let pls = if with_pls && matches!(src, DirectionSource::Sir(_)) {
                let s = pls_statistic(z.as_slice(), eps.as_slice(), pls_bandwidth(z.as_slice()))?;
                Some((TermKind::Pls, s.value, pls_pvalue(s.value), s.degenerate))
            } else {
                None
            };
            Ok((tcvm, pls))
        })
        .collect();

    let mut terms = Vec::new();
    let mut dropped = Vec::new();
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        let (tcvm, pls) = outcome?;
        let rows = match tcvm {
            Ok(row) => Some(row),
            Err(reason) => {
                dropped.push(DroppedProjection {
                    half: source.source_half,
                    direction_index: idx,
                    kind: TermKind::Tcvm,
                    reason,
                });
                None
            }
        };
        for (kind, stat, p, degenerate) in rows.into_iter().chain(pls) {
            terms.push(ProjectionResult {
                half: source.source_half,
                evaluated_on: target.half,
                direction_index: idx,
                source: source.sources[idx],
                kind,
                stat,
                p,
                weight: 0.0,
                degenerate,
            });
        }
    }
    Ok(DirectionOutcome { terms, dropped })
}

fn check_input(data: &Dataset, cfg: &Config) -> Result<()> {
    cfg.validate()?;
    if data.n() < MIN_OBSERVATIONS {
        return Err(GofError::InvalidArgument(format!(
            "the split tests need at least {MIN_OBSERVATIONS} observations, got {}",
            data.n()
        )));
    }
    if cfg.family == Family::Binomial && data.y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(GofError::InvalidArgument(
            "binomial response must be 0/1".into(),
        ));
    }
    Ok(())
}

struct Assembly {
    terms: Vec<ProjectionResult>,
    d_hat: [Option<usize>; 2],
    dropped: Vec<DroppedProjection>,
    warnings: Vec<String>,
    single_direction: bool,
}

fn combine(data: &Dataset, cfg: &Config, plan: &SplitPlan, a: Assembly) -> Result<TestReport> {
    let mut terms = a.terms;
    if terms.is_empty() {
        return Err(GofError::NoUsableProjection);
    }
    let mut weights = vec![1.0 / terms.len() as f64; terms.len()];
    // absorb rounding so the weights sum to one
    let excess: f64 = weights.iter().sum::<f64>() - 1.0;
    weights[0] -= excess;
    let pvals: Vec<f64> = terms.iter().map(|t| t.p).collect();
    let (statistic, pvalue) = cauchy_combine(&pvals, &weights)?;
    for (t, w) in terms.iter_mut().zip(&weights) {
        t.weight = *w;
    }
    Ok(TestReport {
        method: cfg.method,
        family: cfg.family,
        mode: cfg.effective_mode(),
        n: data.n(),
        p: data.p(),
        statistic,
        pvalue,
        level: cfg.level,
        reject: pvalue <= cfg.level,
        per_projection: terms,
        d_hat_1: a.d_hat[0],
        d_hat_2: a.d_hat[1],
        dropped_projections: a.dropped,
        seed: cfg.seed,
        split_checksum: plan.checksum(),
        refit_on_statistic_half: true,
        single_direction: a.single_direction,
        warnings: a.warnings,
    })
}

fn projections_of(fit: &HalfFit) -> std::result::Result<&ProjectionSet, String> {
    match &fit.projections {
        Some(Ok(set)) => Ok(set),
        Some(Err(e)) => Err(e.clone()),
        None => Err("projections were not estimated".into()),
    }
}

/// Projections from the first half, statistics on the second.
pub fn run_tcvm_c(data: &Dataset, cfg: &Config) -> Result<TestReport> {
    check_input(data, cfg)?;
    let plan = split_data(data.n(), cfg.seed)?;
    let (d1, d2) = rayon::join(
        || fit_half(data, &plan, Half::D1, cfg, true),
        || fit_half(data, &plan, Half::D2, cfg, false),
    );
    let (d1, d2) = (d1?, d2?);
    let set = projections_of(&d1).map_err(GofError::Experiment)?;
    let out = evaluate_direction(set, &d2, cfg, false)?;
    combine(
        data,
        cfg,
        &plan,
        Assembly {
            terms: out.terms,
            d_hat: [Some(set.d_hat()), None],
            dropped: out.dropped,
            warnings: set.warnings.clone(),
            single_direction: false,
        },
    )
}

fn run_cross_fit(data: &Dataset, cfg: &Config, with_pls: bool) -> Result<TestReport> {
    check_input(data, cfg)?;
    let plan = split_data(data.n(), cfg.seed)?;
    let (d1, d2) = rayon::join(
        || fit_half(data, &plan, Half::D1, cfg, true),
        || fit_half(data, &plan, Half::D2, cfg, true),
    );
    let (d1, d2) = (d1?, d2?);
    let mut a = Assembly {
        terms: Vec::new(),
        d_hat: [None, None],
        dropped: Vec::new(),
        warnings: Vec::new(),
        single_direction: false,
    };
    let mut survivors = 0;
    for (slot, (src, dst)) in [(&d1, &d2), (&d2, &d1)].into_iter().enumerate() {
        let outcome = projections_of(src).and_then(|set| {
            a.warnings.extend(set.warnings.iter().cloned());
            a.d_hat[slot] = Some(set.d_hat());
            evaluate_direction(set, dst, cfg, with_pls).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(mut out) => {
                if !out.terms.is_empty() {
                    survivors += 1;
                }
                a.terms.append(&mut out.terms);
                a.dropped.append(&mut out.dropped);
            }
            Err(e) => a.warnings.push(format!(
                "projections of {} evaluated on {} failed: {e}",
                src.half, dst.half
            )),
        }
    }
    a.single_direction = survivors == 1;
    if a.single_direction {
        a.warnings
            .push("only one split direction survived; weights renormalized over it".into());
    }
    combine(data, cfg, &plan, a)
}

/// Cross-fitted combination over both split directions.
pub fn run_tcvm_cf(data: &Dataset, cfg: &Config) -> Result<TestReport> {
    run_cross_fit(data, cfg, false)
}

/// Cross-fitted combination with local-smoothing terms for the
/// inverse-regression directions.
pub fn run_hybrid_cf(data: &Dataset, cfg: &Config) -> Result<TestReport> {
    run_cross_fit(data, cfg, true)
}

pub fn run_test(data: &Dataset, cfg: &Config) -> Result<TestReport> {
    match cfg.method {
        Method::TcvmC => run_tcvm_c(data, cfg),
        Method::TcvmCf => run_tcvm_cf(data, cfg),
        Method::HybridCf => run_hybrid_cf(data, cfg),
    }
}

/// Single-projection test on a whole dataset with a given model, for
/// diagnostics and simulations with a known parameter.
pub fn single_projection_test(
    data: &Dataset,
    model: &FittedModel,
    alpha: &DVector<f64>,
    mode: Mode,
) -> Result<crate::transform::ProjectedTest> {
    crate::transform::projected_tcvm_test(data, model, alpha, &ProjectedOptions::new(mode), 0)
}
