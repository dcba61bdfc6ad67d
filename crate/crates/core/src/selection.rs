//! Variable importance by leave-one-predictor-out comparison.
//!
//! For predictor `j`, `W_j(x, y) = d1²(y, m₋ⱼ(x)) - d1²(y, m(x))` compares the
//! reduced fit without `j` to the full fit on held-out pairs; positive values
//! mean `j` improves the fit. Significance is assessed globally with a
//! one-sided Wilcoxon signed-rank test (Bonferroni over the `p` predictors)
//! and locally with scalar prediction intervals for `W_j` given `x`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_alpha, shape_mismatch, Error, Result};
use crate::frechet::{GlobalFrechetModel, PredictorMatrix};
use crate::metric::{MetricPoint, Space};
use crate::region::{fit_homoscedastic, split, ResidualSample};
use crate::rng;

/// Minimum sample size for the normal approximation of the signed-rank test.
pub const MIN_WILCOXON_SAMPLE: usize = 10;

/// `d1²(y, second(x_second)) - d1²(y, first(x_first))` for every held-out pair.
pub fn loss_differences(
    first: &GlobalFrechetModel,
    x_first: &PredictorMatrix,
    second: &GlobalFrechetModel,
    x_second: &PredictorMatrix,
    y: &[MetricPoint],
) -> Result<Vec<f64>> {
    if x_first.rows() != y.len() || x_second.rows() != y.len() {
        return Err(shape_mismatch(
            format!("{} rows", y.len()),
            format!("{} and {} rows", x_first.rows(), x_second.rows()),
        ));
    }
    let space = first.space();
    x_first
        .iter_rows()
        .zip(x_second.iter_rows())
        .zip(y)
        .map(|((a, b), yi)| {
            space.validate(yi)?;
            let pa = first.predict(a)?;
            let pb = second.predict(b)?;
            Ok(space.d1_squared_values(yi.values(), pb.values())
                - space.d1_squared_values(yi.values(), pa.values()))
        })
        .collect()
}

/// `W_j` on held-out pairs `(x, y)`; the reduced model is refit on the
/// training sample of `full` without predictor `j`.
pub fn w_statistics(
    full: &GlobalFrechetModel,
    j: usize,
    x: &PredictorMatrix,
    y: &[MetricPoint],
) -> Result<Vec<f64>> {
    let reduced = full.without_variable(j)?;
    let x_reduced = x.without_column(j)?;
    loss_differences(full, x, &reduced, &x_reduced, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive values.
    pub statistic: f64,
    pub z: f64,
    pub p_value: f64,
    /// Number of non-zero values that entered the test.
    pub n_used: usize,
}

/// Average ranks (1-based) of `values`.
fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = avg;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    (ranks, tie_term)
}

/// One-sided signed-rank test of `H0: location ≤ 0` against `location > 0`.
///
/// Zeros are dropped, tied absolute values get average ranks, and the
/// normal approximation uses tie-corrected variance and a 0.5 continuity
/// correction. Returns `p = 1` when every value is zero.
pub fn wilcoxon_signed_rank_greater(values: &[f64]) -> Result<WilcoxonResult> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value in signed-rank test".into()));
    }
    let nonzero: Vec<f64> = values.iter().copied().filter(|&v| v != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            z: 0.0,
            p_value: 1.0,
            n_used: 0,
        });
    }
    let abs: Vec<f64> = nonzero.iter().map(|v| v.abs()).collect();
    let (ranks, tie_term) = average_ranks(&abs);
    let statistic: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (statistic - mean - 0.5) / var.sqrt();
    let normal = Normal::standard();
    Ok(WilcoxonResult {
        statistic,
        z,
        p_value: normal.sf(z),
        n_used: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalTest {
    pub p_value: f64,
    /// `p_value ≤ alpha / p` (Bonferroni).
    pub selected: bool,
}

pub fn global_test(w_values: &[f64], alpha: f64, p: usize) -> Result<GlobalTest> {
    check_alpha(alpha)?;
    if p == 0 {
        return Err(Error::InvalidParameter("number of variables must be ≥ 1".into()));
    }
    if w_values.len() < MIN_WILCOXON_SAMPLE {
        return Err(Error::InvalidParameter(format!(
            "signed-rank test needs at least {MIN_WILCOXON_SAMPLE} values, got {}",
            w_values.len()
        )));
    }
    let p_value = wilcoxon_signed_rank_greater(w_values)?.p_value;
    Ok(GlobalTest {
        p_value,
        selected: p_value <= alpha / p as f64,
    })
}

/// Scalar prediction interval for `W` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalInterval {
    pub center: f64,
    pub radius: f64,
    pub lower: f64,
    pub upper: f64,
    /// The interval lies inside `(0, ∞)`.
    pub important: bool,
}

/// Local importance intervals for `W` at every row of `x`.
///
/// The `(x, W)` pairs are split in half: a scalar global Fréchet (linear)
/// fit on the first half, a constant conformal radius on the second. The
/// interval `[m_W(x) - q, m_W(x) + q]` is reported for every row of `x`.
pub fn local_importance(
    w_values: &[f64],
    x: &PredictorMatrix,
    alpha: f64,
    seed: u64,
) -> Result<Vec<LocalInterval>> {
    check_alpha(alpha)?;
    if w_values.len() != x.rows() {
        return Err(shape_mismatch(
            format!("{} W values", x.rows()),
            format!("{} W values", w_values.len()),
        ));
    }
    let insufficient = || {
        Error::InvalidParameter(format!(
            "{} points are too few for local intervals with {} predictors",
            w_values.len(),
            x.cols()
        ))
    };
    let halves = split(w_values.len(), &[0.5, 0.5], seed).map_err(|_| insufficient())?;
    if halves.train.len() <= x.cols() {
        return Err(insufficient());
    }
    let space = Space::euclidean(1);
    let points = |idx: &[usize]| -> Result<Vec<MetricPoint>> {
        idx.iter().map(|&i| space.point(vec![w_values[i]])).collect()
    };
    let model = GlobalFrechetModel::fit(&x.select_rows(&halves.train), &points(&halves.train)?, &space)?;
    let x_cal = x.select_rows(&halves.test);
    let residuals: Vec<f64> = halves
        .test
        .iter()
        .zip(x_cal.iter_rows())
        .map(|(&i, row)| Ok((w_values[i] - model.predict(row)?.values()[0]).abs()))
        .collect::<Result<_>>()?;
    let sample = ResidualSample::with_seed(residuals, x_cal, rng::child_seed(seed, 1))?;
    let radius = fit_homoscedastic(&sample, alpha)?.radius_at(&[]);
    x.iter_rows()
        .map(|row| {
            let center = model.predict(row)?.values()[0];
            let (lower, upper) = (center - radius, center + radius);
            Ok(LocalInterval {
                center,
                radius,
                lower,
                upper,
                important: lower > 0.0,
            })
        })
        .collect()
}

/// Per-variable outcome of [`select_variables`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableReport {
    pub variable_index: usize,
    pub name: Option<String>,
    pub w_values: Vec<f64>,
    pub mean_w: f64,
    pub p_value_raw: f64,
    pub selected: bool,
    pub local_intervals: Option<Vec<LocalInterval>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub alpha: f64,
    /// Train / test fractions.
    pub split: [f64; 2],
    pub seed: u64,
    /// Also compute local intervals for `W_j` at level `alpha`.
    pub local: bool,
    pub names: Option<Vec<String>>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            split: [0.5, 0.5],
            seed: 0,
            local: false,
            names: None,
        }
    }
}

/// Full pipeline: split, fit the full and all `p` reduced models on the
/// training part, compute `W_j` on the test part, then test each `j`.
pub fn select_variables(
    x: &PredictorMatrix,
    y: &[MetricPoint],
    space: &Space,
    config: &SelectionConfig,
) -> Result<Vec<VariableReport>> {
    check_alpha(config.alpha)?;
    let p = x.cols();
    if p < 2 {
        return Err(Error::NeedTwoPredictors { p });
    }
    if y.len() != x.rows() {
        return Err(shape_mismatch(format!("{} responses", x.rows()), format!("{} responses", y.len())));
    }
    if let Some(names) = &config.names {
        if names.len() != p {
            return Err(shape_mismatch(format!("{p} names"), format!("{} names", names.len())));
        }
    }
    let halves = split(x.rows(), &config.split, config.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i].clone()).collect::<Vec<_>>();
    let x_train = x.select_rows(&halves.train);
    let x_test = x.select_rows(&halves.test);
    let y_test = pick(&halves.test);
    let full = GlobalFrechetModel::fit(&x_train, &pick(&halves.train), space)?;

    (0..p)
        .into_par_iter()
        .map(|j| {
            let w = w_statistics(&full, j, &x_test, &y_test)?;
            let test = global_test(&w, config.alpha, p)?;
            let local_intervals = if config.local {
                Some(local_importance(
                    &w,
                    &x_test,
                    config.alpha,
                    rng::child_seed(config.seed, j as u64 + 1),
                )?)
            } else {
                None
            };
            Ok(VariableReport {
                variable_index: j,
                name: config.names.as_ref().map(|n| n[j].clone()),
                mean_w: w.iter().sum::<f64>() / w.len() as f64,
                w_values: w,
                p_value_raw: test.p_value,
                selected: test.selected,
                local_intervals,
            })
        })
        .collect()
}
