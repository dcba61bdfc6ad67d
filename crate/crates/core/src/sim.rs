//! Generative models and replicated coverage / selection experiments.
//!
//! Three families are available:
//!
//! * `gaussian_homo`: `X ~ N(0, Σ_ρ)` with unit variances and constant
//!   correlation `ρ`, `Y = Xᵀβ + ε` in ℝ^s with `β` all ones.
//! * `gaussian_hetero`: same, with noise `‖X‖₂ ε`.
//! * `distributional`: each subject contributes a series
//!   `Z_j = intercept + slope · Σ_{l ≤ active} X_l + ε_j` whose empirical
//!   quantile function on the midpoint grid is the response.
//!
//! Replicates run in parallel; each one draws from its own stream of the
//! master seed and results are reduced in replicate order, so reports are
//! identical regardless of the thread count.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{check_alpha, Error, Result};
use crate::frechet::{GlobalFrechetModel, PredictorMatrix};
use crate::metric::{empirical_quantiles, D2Choice, MetricPoint, Space, SpaceKind};
use crate::region::{
    fit_heteroscedastic_conformal, fit_homoscedastic, order_statistic, residuals, split, Center,
    PredictionRegion, QuantileConvention, RadiusRule, DEFAULT_THREE_WAY_SPLIT,
};
use crate::rng::{self, StreamRng};
use crate::selection::{select_variables, SelectionConfig};

/// Generative model of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    GaussianHomo {
        p: usize,
        s: usize,
        rho: f64,
    },
    GaussianHetero {
        p: usize,
        s: usize,
        rho: f64,
    },
    Distributional {
        p: usize,
        rho: f64,
        series_length: usize,
        intercept: f64,
        slope: f64,
        /// The first `active` predictors enter the series mean.
        active: usize,
        grid_size: usize,
    },
}

impl ModelSpec {
    pub fn p(&self) -> usize {
        match self {
            ModelSpec::GaussianHomo { p, .. }
            | ModelSpec::GaussianHetero { p, .. }
            | ModelSpec::Distributional { p, .. } => *p,
        }
    }

    fn rho(&self) -> f64 {
        match self {
            ModelSpec::GaussianHomo { rho, .. }
            | ModelSpec::GaussianHetero { rho, .. }
            | ModelSpec::Distributional { rho, .. } => *rho,
        }
    }

    /// Number of predictors with a nonzero effect.
    pub fn active(&self) -> usize {
        match self {
            ModelSpec::Distributional { active, .. } => *active,
            _ => self.p(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.p() == 0 {
            return bad("p must be ≥ 1".into());
        }
        let rho = self.rho();
        if !(0.0..1.0).contains(&rho) {
            return bad(format!("rho must lie in [0, 1), got {rho}"));
        }
        match self {
            ModelSpec::GaussianHomo { s, .. } | ModelSpec::GaussianHetero { s, .. } if *s == 0 => {
                bad("s must be ≥ 1".into())
            }
            ModelSpec::Distributional {
                p,
                series_length,
                active,
                grid_size,
                intercept,
                slope,
                ..
            } => {
                if *series_length == 0 || *grid_size == 0 {
                    return bad("series_length and grid_size must be ≥ 1".into());
                }
                if active > p {
                    return bad(format!("active = {active} exceeds p = {p}"));
                }
                if !intercept.is_finite() || !slope.is_finite() {
                    return bad("intercept and slope must be finite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Response space with `d2` as given.
    pub fn space(&self, d2: D2Choice) -> Result<Space> {
        let kind = match self {
            ModelSpec::GaussianHomo { s, .. } | ModelSpec::GaussianHetero { s, .. } => {
                SpaceKind::Euclidean { dim: *s }
            }
            ModelSpec::Distributional { grid_size, .. } => SpaceKind::Wasserstein {
                grid: crate::metric::midpoint_grid(*grid_size),
                bounds: None,
            },
        };
        Space::new(kind, d2)
    }

    /// The `d2` used when a configuration does not say: the Euclidean norm
    /// for vectors and for quantile grids.
    pub fn default_d2(&self) -> D2Choice {
        match self {
            ModelSpec::Distributional { .. } => D2Choice::Euclidean,
            _ => D2Choice::SameAsD1,
        }
    }

    /// True regression function of the Gaussian models, `x ↦ Xᵀβ`.
    pub fn oracle_center(&self) -> Option<Center> {
        match self {
            ModelSpec::GaussianHomo { p, s, .. } | ModelSpec::GaussianHetero { p, s, .. } => {
                Some(Center::Affine {
                    intercept: vec![0.0; *s],
                    coefficients: vec![1.0; p * s],
                })
            }
            ModelSpec::Distributional { .. } => None,
        }
    }

    /// Radius of the smallest ball around `m(x)` holding `1 - α` of the
    /// conditional law, for the homoscedastic Gaussian model under the
    /// Euclidean norm: the `1 - α` quantile of a χ distribution with `s`
    /// degrees of freedom.
    pub fn oracle_radius(&self, alpha: f64) -> Option<f64> {
        match self {
            ModelSpec::GaussianHomo { s, .. } => {
                let chi2 = ChiSquared::new(*s as f64).ok()?;
                Some(chi2.inverse_cdf(1.0 - alpha).sqrt())
            }
            _ => None,
        }
    }
}

/// Lower Cholesky factor (row-major) of the equicorrelation matrix.
pub fn equicorrelated_cholesky(p: usize, rho: f64) -> Result<Vec<f64>> {
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
    let chol = sigma.cholesky().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "equicorrelation matrix with p = {p}, rho = {rho} is not positive definite"
        ))
    })?;
    let l = chol.l();
    Ok((0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect())
}

fn draw_predictor_row(chol: &[f64], p: usize, rng: &mut StreamRng) -> Vec<f64> {
    let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    (0..p)
        .map(|i| (0..=i).map(|j| chol[i * p + j] * z[j]).sum())
        .collect()
}

impl ModelSpec {
    /// Number of standard-normal noise draws per observation.
    pub fn noise_len(&self) -> usize {
        match self {
            ModelSpec::GaussianHomo { s, .. } | ModelSpec::GaussianHetero { s, .. } => *s,
            ModelSpec::Distributional { series_length, .. } => *series_length,
        }
    }

    /// Response for predictor row `x` and standard-normal `noise` of length
    /// [`noise_len`](Self::noise_len).
    pub fn response(&self, x: &[f64], noise: &[f64]) -> Result<MetricPoint> {
        if x.len() != self.p() || noise.len() != self.noise_len() {
            return Err(crate::error::shape_mismatch(
                format!("{} predictors and {} noise draws", self.p(), self.noise_len()),
                format!("{} and {}", x.len(), noise.len()),
            ));
        }
        match self {
            ModelSpec::GaussianHomo { .. } | ModelSpec::GaussianHetero { .. } => {
                let signal: f64 = x.iter().sum();
                let scale = match self {
                    ModelSpec::GaussianHetero { .. } => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    _ => 1.0,
                };
                Ok(MetricPoint::Euclidean(crate::metric::EuclideanPoint::new(
                    noise.iter().map(|e| signal + scale * e).collect(),
                )?))
            }
            ModelSpec::Distributional {
                intercept,
                slope,
                active,
                grid_size,
                ..
            } => {
                let mean = intercept + slope * x[..*active].iter().sum::<f64>();
                let series: Vec<f64> = noise.iter().map(|e| mean + e).collect();
                let q = empirical_quantiles(&series, &crate::metric::midpoint_grid(*grid_size))?;
                Ok(MetricPoint::Quantile(crate::metric::QuantileFunction::new(q)?))
            }
        }
    }
}

/// Draws `n` pairs from a model using `rng`.
pub fn generate_with(model: &ModelSpec, n: usize, rng: &mut StreamRng) -> Result<(PredictorMatrix, Vec<MetricPoint>)> {
    model.validate()?;
    let p = model.p();
    let chol = equicorrelated_cholesky(p, model.rho())?;
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut noise = vec![0.0; model.noise_len()];
    for _ in 0..n {
        let row = draw_predictor_row(&chol, p, rng);
        for e in noise.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        y.push(model.response(&row, &noise)?);
        x.extend(row);
    }
    Ok((PredictorMatrix::new(n, p, x)?, y))
}

/// Gaussian model draw (homoscedastic or heteroscedastic).
pub fn generate_gaussian(model: &ModelSpec, n: usize, seed: u64) -> Result<(PredictorMatrix, Vec<MetricPoint>)> {
    if matches!(model, ModelSpec::Distributional { .. }) {
        return Err(Error::InvalidParameter("not a Gaussian model".into()));
    }
    generate_with(model, n, &mut rng::seeded(seed))
}

/// Distributional model draw: responses are empirical quantile functions.
pub fn generate_distributional(model: &ModelSpec, n: usize, seed: u64) -> Result<(PredictorMatrix, Vec<MetricPoint>)> {
    if !matches!(model, ModelSpec::Distributional { .. }) {
        return Err(Error::InvalidParameter("not a distributional model".into()));
    }
    generate_with(model, n, &mut rng::seeded(seed))
}

/// Region-fitting algorithm of a coverage experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Homoscedastic,
    Knn,
    ConformalKnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub n_values: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    /// Neighbor counts for the kNN methods.
    pub k_values: Vec<usize>,
    pub method: Method,
    pub replications: usize,
    pub eval_size: usize,
    pub seed: u64,
    pub d2: D2Choice,
    /// Level of the per-variable tests in selection experiments.
    pub selection_alpha: f64,
}

impl ExperimentConfig {
    /// Desk-scale defaults around `model`: 100 replicates, 2000 evaluation
    /// points, `α ∈ {0.05, 0.1, 0.2, 0.5}`.
    pub fn new(model: ModelSpec) -> Self {
        let method = match model {
            ModelSpec::GaussianHetero { .. } => Method::Knn,
            _ => Method::Homoscedastic,
        };
        let d2 = model.default_d2();
        Self {
            model,
            n_values: vec![500, 1000],
            alpha_grid: vec![0.05, 0.1, 0.2, 0.5],
            k_values: if method == Method::Knn { vec![10, 20, 50, 100] } else { vec![] },
            method,
            replications: 100,
            eval_size: 2000,
            seed: 0,
            d2,
            selection_alpha: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n_values must be a non-empty list of positive counts");
        }
        if self.alpha_grid.is_empty() {
            return bad("alpha_grid must not be empty");
        }
        for &a in &self.alpha_grid {
            check_alpha(a)?;
        }
        check_alpha(self.selection_alpha)?;
        if self.replications == 0 || self.eval_size == 0 {
            return bad("replications and eval_size must be positive");
        }
        if self.method != Method::Homoscedastic && (self.k_values.is_empty() || self.k_values.contains(&0)) {
            return bad("kNN methods need a non-empty list of positive k_values");
        }
        self.model.space(self.d2)?;
        Ok(())
    }

    fn replicate_seed(&self, n_index: usize, replicate: usize) -> u64 {
        rng::child_seed(self.seed, ((n_index as u64) << 32) | replicate as u64)
    }
}

/// Coverage of one replicate in one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: usize,
    pub alpha: f64,
    pub k: Option<usize>,
    pub replicate: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub n: usize,
    pub alpha: f64,
    pub k: Option<usize>,
    pub replicates: usize,
    pub mean: f64,
    /// Sample standard deviation across replicates.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub summary: Vec<CoverageSummary>,
    pub runtime: Duration,
}

fn fmt_k(k: Option<usize>) -> String {
    k.map(|v| v.to_string()).unwrap_or_default()
}

impl CoverageReport {
    pub fn cell(&self, n: usize, alpha: f64, k: Option<usize>) -> Option<&CoverageSummary> {
        self.summary.iter().find(|s| s.n == n && s.alpha == alpha && s.k == k)
    }

    pub fn coverages(&self, n: usize, alpha: f64, k: Option<usize>) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n && r.alpha == alpha && r.k == k)
            .map(|r| r.coverage)
            .collect()
    }

    /// One row per (n, α, k, replicate); shortest round-trip float format.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("n,alpha,k,replicate,coverage\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.n, r.alpha, fmt_k(r.k), r.replicate, r.coverage);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("n,alpha,k,replicates,mean_coverage,sd_coverage\n");
        for s in &self.summary {
            let _ = writeln!(out, "{},{},{},{},{},{}", s.n, s.alpha, fmt_k(s.k), s.replicates, s.mean, s.sd);
        }
        out
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Coverages of one replicate: one entry per (α, k) cell in config order.
fn coverage_replicate(config: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<(f64, Option<usize>, f64)>> {
    let space = config.model.space(config.d2)?;
    let mut data_rng = rng::substream(seed, 0);
    let (x, y) = generate_with(&config.model, n, &mut data_rng)?;
    let (x_eval, y_eval) = generate_with(&config.model, config.eval_size, &mut data_rng)?;

    let fractions: &[f64] = match config.method {
        Method::ConformalKnn => &DEFAULT_THREE_WAY_SPLIT,
        _ => &[0.5, 0.5],
    };
    let parts = split(n, fractions, rng::child_seed(seed, 1))?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i].clone()).collect::<Vec<_>>();
    let model = GlobalFrechetModel::fit(&x.select_rows(&parts.train), &pick(&parts.train), &space)?;
    let sample = residuals(&model, &x.select_rows(&parts.test), &pick(&parts.test), rng::child_seed(seed, 2))?;

    // Distances from fresh responses to their predicted centers do not
    // depend on α or k.
    let eval_dist: Vec<f64> = x_eval
        .iter_rows()
        .zip(&y_eval)
        .map(|(row, yi)| Ok(space.d2_values(yi.values(), model.predict(row)?.values())))
        .collect::<Result<_>>()?;
    let fraction_inside = |radii: &mut dyn Iterator<Item = f64>| {
        let inside = eval_dist.iter().zip(radii).filter(|(d, r)| **d <= *r).count();
        inside as f64 / eval_dist.len() as f64
    };

    let mut out = Vec::new();
    match config.method {
        Method::Homoscedastic => {
            for &alpha in &config.alpha_grid {
                let radius = fit_homoscedastic(&sample, alpha)?.radius_at(&[]);
                out.push((alpha, None, fraction_inside(&mut std::iter::repeat(radius))));
            }
        }
        Method::Knn => {
            let k_max = *config.k_values.iter().max().unwrap();
            if k_max > sample.len() {
                return Err(Error::KOutOfRange { k: k_max, n: sample.len() });
            }
            let widest = match crate::region::fit_heteroscedastic_knn(&sample, 0.5, k_max)? {
                RadiusRule::Knn(knn) => knn,
                _ => unreachable!(),
            };
            // Sorted neighbor lists of the widest rule contain every smaller k as a prefix.
            let neighbors: Vec<Vec<usize>> = x_eval.iter_rows().map(|row| widest.neighbors(row)).collect();
            for &alpha in &config.alpha_grid {
                for &k in &config.k_values {
                    let rank = QuantileConvention::PlugIn.rank(k, alpha);
                    let mut radii = neighbors.iter().map(|nb| {
                        let values: Vec<f64> = nb[..k].iter().map(|&i| sample.residuals()[i]).collect();
                        let keys: Vec<f64> = nb[..k].iter().map(|&i| sample.tiebreak()[i]).collect();
                        order_statistic(&values, &keys, rank)
                    });
                    out.push((alpha, Some(k), fraction_inside(&mut radii)));
                }
            }
        }
        Method::ConformalKnn => {
            let calib_idx = parts.calib.as_ref().expect("three-way split");
            let calib = residuals(&model, &x.select_rows(calib_idx), &pick(calib_idx), rng::child_seed(seed, 3))?;
            for &alpha in &config.alpha_grid {
                for &k in &config.k_values {
                    let rule = fit_heteroscedastic_conformal(&sample, &calib, alpha, k)?;
                    let mut radii = x_eval.iter_rows().map(|row| rule.radius_at(row));
                    out.push((alpha, Some(k), fraction_inside(&mut radii)));
                }
            }
        }
    }
    Ok(out)
}

/// Replicated coverage experiment: for every `n`, each replicate splits `n`
/// draws into training and held-out halves (three ways for the conformal
/// kNN method), fits the model and the region, and measures coverage on
/// `eval_size` fresh draws.
pub fn run_coverage_experiment(config: &ExperimentConfig) -> Result<CoverageReport> {
    config.validate()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for (ni, &n) in config.n_values.iter().enumerate() {
        let per_rep: Vec<Vec<(f64, Option<usize>, f64)>> = (0..config.replications)
            .into_par_iter()
            .map(|r| coverage_replicate(config, n, config.replicate_seed(ni, r)))
            .collect::<Result<_>>()?;
        let cells = per_rep[0].len();
        for c in 0..cells {
            for (r, rep) in per_rep.iter().enumerate() {
                let (alpha, k, coverage) = rep[c];
                rows.push(CoverageRow {
                    n,
                    alpha,
                    k,
                    replicate: r,
                    coverage,
                });
            }
        }
    }
    let mut summary: Vec<CoverageSummary> = Vec::new();
    for chunk in rows.chunk_by(|a, b| a.n == b.n && a.alpha == b.alpha && a.k == b.k) {
        let values: Vec<f64> = chunk.iter().map(|r| r.coverage).collect();
        let (mean, sd) = mean_sd(&values);
        summary.push(CoverageSummary {
            n: chunk[0].n,
            alpha: chunk[0].alpha,
            k: chunk[0].k,
            replicates: values.len(),
            mean,
            sd,
        });
    }
    Ok(CoverageReport {
        rows,
        summary,
        runtime: start.elapsed(),
    })
}

/// Oracle-versus-fitted symmetric-difference error for the homoscedastic
/// Gaussian model at one `n`, averaged over `replications` replicates.
/// Returns the per-replicate errors.
pub fn symmetric_difference_experiment(
    config: &ExperimentConfig,
    n: usize,
    alpha: f64,
) -> Result<Vec<f64>> {
    config.validate()?;
    let (Some(center), Some(oracle_radius)) = (config.model.oracle_center(), config.model.oracle_radius(alpha))
    else {
        return Err(Error::InvalidParameter(
            "an oracle region is only available for the homoscedastic Gaussian model".into(),
        ));
    };
    if config.d2 != D2Choice::SameAsD1 && config.d2 != D2Choice::Euclidean {
        return Err(Error::InvalidParameter("the oracle radius assumes the Euclidean d2".into()));
    }
    let space = config.model.space(config.d2)?;
    let oracle = PredictionRegion::new(center, RadiusRule::Constant { radius: oracle_radius }, alpha, space.clone())?;
    (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let seed = config.replicate_seed(n, r);
            let mut data_rng = rng::substream(seed, 0);
            let (x, y) = generate_with(&config.model, n, &mut data_rng)?;
            let (x_eval, y_eval) = generate_with(&config.model, config.eval_size, &mut data_rng)?;
            let parts = split(n, &[0.5, 0.5], rng::child_seed(seed, 1))?;
            let pick = |idx: &[usize]| idx.iter().map(|&i| y[i].clone()).collect::<Vec<_>>();
            let model = GlobalFrechetModel::fit(&x.select_rows(&parts.train), &pick(&parts.train), &space)?;
            let sample = residuals(&model, &x.select_rows(&parts.test), &pick(&parts.test), rng::child_seed(seed, 2))?;
            let rule = fit_homoscedastic(&sample, alpha)?;
            let fitted = PredictionRegion::new(Center::Model(model), rule, alpha, space.clone())?;
            crate::region::symmetric_difference_error(&oracle, &fitted, &x_eval, &y_eval)
        })
        .collect()
}

/// Outcome of one selection replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub n: usize,
    pub replicate: usize,
    /// Every active predictor was selected.
    pub detected: bool,
    pub false_positives: usize,
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub n: usize,
    pub replicates: usize,
    pub detect_rate: f64,
    /// Share of replicates with at least one false positive.
    pub false_positive_rate: f64,
    /// Share of replicates with at least two false positives.
    pub two_false_positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
    pub summary: Vec<SelectionSummary>,
    pub runtime: Duration,
}

impl SelectionReport {
    pub fn at(&self, n: usize) -> Option<&SelectionSummary> {
        self.summary.iter().find(|s| s.n == n)
    }

    pub fn rows_csv(&self) -> String {
        let p = self.rows.first().map_or(0, |r| r.p_values.len());
        let mut out = String::from("n,replicate,detected,false_positives");
        for j in 1..=p {
            let _ = write!(out, ",p_value_x{j}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{}", r.n, r.replicate, r.detected, r.false_positives);
            for v in &r.p_values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("n,replicates,detect_pct,one_or_more_false_positive_pct,two_or_more_false_positive_pct\n");
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.n,
                s.replicates,
                100.0 * s.detect_rate,
                100.0 * s.false_positive_rate,
                100.0 * s.two_false_positive_rate
            );
        }
        out
    }
}

/// Replicated variable-selection experiment with a half/half split, the
/// one-sided signed-rank test and Bonferroni at `selection_alpha`.
pub fn run_selection_experiment(config: &ExperimentConfig) -> Result<SelectionReport> {
    config.validate()?;
    let start = Instant::now();
    let space = config.model.space(config.d2)?;
    let active = config.model.active();
    let mut rows = Vec::new();
    for (ni, &n) in config.n_values.iter().enumerate() {
        let reps: Vec<SelectionRow> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let seed = config.replicate_seed(ni, r);
                let (x, y) = generate_with(&config.model, n, &mut rng::substream(seed, 0))?;
                let sel = SelectionConfig {
                    alpha: config.selection_alpha,
                    seed: rng::child_seed(seed, 1),
                    ..SelectionConfig::default()
                };
                let reports = select_variables(&x, &y, &space, &sel)?;
                Ok(SelectionRow {
                    n,
                    replicate: r,
                    detected: reports[..active].iter().all(|v| v.selected),
                    false_positives: reports[active..].iter().filter(|v| v.selected).count(),
                    p_values: reports.iter().map(|v| v.p_value_raw).collect(),
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(reps);
    }
    let summary = config
        .n_values
        .iter()
        .map(|&n| {
            let of_n: Vec<&SelectionRow> = rows.iter().filter(|r| r.n == n).collect();
            let total = of_n.len() as f64;
            let rate = |f: &dyn Fn(&SelectionRow) -> bool| of_n.iter().filter(|r| f(r)).count() as f64 / total;
            SelectionSummary {
                n,
                replicates: of_n.len(),
                detect_rate: rate(&|r| r.detected),
                false_positive_rate: rate(&|r| r.false_positives >= 1),
                two_false_positive_rate: rate(&|r| r.false_positives >= 2),
            }
        })
        .collect();
    Ok(SelectionReport {
        rows,
        summary,
        runtime: start.elapsed(),
    })
}
