//! Global Fréchet regression.
//!
//! The conditional Fréchet mean at `x` is the barycenter of the training
//! responses under the signed weights
//! `w_i(x) = 1 + (X_i - X̄)ᵀ Σ̂⁻¹ (x - X̄)`, with `Σ̂` the predictor
//! covariance. With the default denominator `n` a scalar response gives
//! exactly ordinary least squares with an intercept; the unbiased `n - 1`
//! variant shrinks every slope by `(n - 1) / n`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::metric::{weighted_barycenter, MetricPoint, Space};

/// Largest accepted condition number of the predictor covariance.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

/// Row-major `n × p` matrix of predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PredictorMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Empty("predictor columns"));
        }
        if data.len() != rows * cols {
            return Err(shape_mismatch(
                format!("{rows}x{cols} = {} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("predictors contain non-finite values".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(shape_mismatch(
                format!("{cols} columns"),
                format!("{} columns", bad.len()),
            ));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copy of the matrix with column `j` removed.
    pub fn without_column(&self, j: usize) -> Result<Self> {
        if self.cols < 2 {
            return Err(Error::NeedTwoPredictors { p: self.cols });
        }
        if j >= self.cols {
            return Err(shape_mismatch(
                format!("column index < {}", self.cols),
                format!("column index {j}"),
            ));
        }
        let data = self
            .iter_rows()
            .flat_map(|r| r.iter().enumerate().filter(move |(c, _)| *c != j).map(|(_, v)| *v))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols - 1,
            data,
        })
    }
}

/// Denominator of the predictor covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceDenominator {
    /// `n`: the fit reduces to least squares.
    #[default]
    Population,
    /// `n - 1`.
    Unbiased,
}

impl CovarianceDenominator {
    fn divisor(self, n: usize) -> f64 {
        match self {
            CovarianceDenominator::Population => n as f64,
            CovarianceDenominator::Unbiased => (n - 1) as f64,
        }
    }
}

/// Signed global Fréchet weights; their mean is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FrechetWeights(Vec<f64>);

impl FrechetWeights {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// A fitted global Fréchet regression.
///
/// Besides the sufficient statistics (`X̄`, `Σ̂⁻¹`) and the training sample,
/// the model caches the response mean and the slope `Σ̂⁻¹ Σᵢ (Xᵢ - X̄) Yᵢᵀ / n`
/// so predictions cost `O(p · dim)` instead of `O(n · dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFrechetModel {
    mean: Vec<f64>,
    cov_inverse: Vec<f64>,
    training_predictors: PredictorMatrix,
    training_responses: Vec<MetricPoint>,
    space: Space,
    response_mean: Vec<f64>,
    slope: Vec<f64>,
    #[serde(default)]
    denominator: CovarianceDenominator,
}

impl GlobalFrechetModel {
    /// Fit with the default covariance denominator `n`.
    pub fn fit(x: &PredictorMatrix, y: &[MetricPoint], space: &Space) -> Result<Self> {
        Self::fit_with(x, y, space, CovarianceDenominator::default())
    }

    pub fn fit_with(
        x: &PredictorMatrix,
        y: &[MetricPoint],
        space: &Space,
        denominator: CovarianceDenominator,
    ) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        if y.len() != n {
            return Err(shape_mismatch(format!("{n} responses"), format!("{} responses", y.len())));
        }
        if n <= p {
            return Err(Error::TooFewObservations { n, p });
        }
        for point in y {
            space.validate(point)?;
        }

        let mut mean = vec![0.0; p];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = DMatrix::<f64>::zeros(p, p);
        for row in x.iter_rows() {
            for a in 0..p {
                let da = row[a] - mean[a];
                for b in a..p {
                    cov[(a, b)] += da * (row[b] - mean[b]);
                }
            }
        }
        for a in 0..p {
            for b in a..p {
                let v = cov[(a, b)] / denominator.divisor(n);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let cov_inverse = symmetric_inverse(cov)?;

        let dim = space.flat_len();
        let mut response_mean = vec![0.0; dim];
        let mut cross = vec![0.0; p * dim];
        for (row, point) in x.iter_rows().zip(y) {
            let values = point.values();
            for (m, v) in response_mean.iter_mut().zip(values) {
                *m += v;
            }
            for a in 0..p {
                let da = row[a] - mean[a];
                let out = &mut cross[a * dim..(a + 1) * dim];
                for (c, v) in out.iter_mut().zip(values) {
                    *c += da * v;
                }
            }
        }
        response_mean.iter_mut().for_each(|m| *m /= n as f64);
        cross.iter_mut().for_each(|c| *c /= n as f64);

        let mut slope = vec![0.0; p * dim];
        for a in 0..p {
            for b in 0..p {
                let s = cov_inverse[a * p + b];
                let src = &cross[b * dim..(b + 1) * dim];
                for (o, c) in slope[a * dim..(a + 1) * dim].iter_mut().zip(src) {
                    *o += s * c;
                }
            }
        }

        Ok(Self {
            mean,
            cov_inverse,
            training_predictors: x.clone(),
            training_responses: y.to_vec(),
            space: space.clone(),
            response_mean,
            slope,
            denominator,
        })
    }

    pub fn n(&self) -> usize {
        self.training_predictors.rows()
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major `p × p` inverse sample covariance.
    pub fn cov_inverse(&self) -> &[f64] {
        &self.cov_inverse
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn training_predictors(&self) -> &PredictorMatrix {
        &self.training_predictors
    }

    pub fn training_responses(&self) -> &[MetricPoint] {
        &self.training_responses
    }

    pub fn denominator(&self) -> CovarianceDenominator {
        self.denominator
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p() {
            return Err(shape_mismatch(
                format!("{} predictors", self.p()),
                format!("{} predictors", x.len()),
            ));
        }
        Ok(())
    }

    fn whitened_offset(&self, x: &[f64]) -> Vec<f64> {
        let p = self.p();
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        (0..p)
            .map(|a| {
                self.cov_inverse[a * p..(a + 1) * p]
                    .iter()
                    .zip(&centered)
                    .map(|(s, c)| s * c)
                    .sum()
            })
            .collect()
    }

    pub fn weights_at(&self, x: &[f64]) -> Result<FrechetWeights> {
        self.check_query(x)?;
        let v = self.whitened_offset(x);
        let weights = self
            .training_predictors
            .iter_rows()
            .map(|row| {
                1.0 + row
                    .iter()
                    .zip(&self.mean)
                    .zip(&v)
                    .map(|((xi, m), vi)| (xi - m) * vi)
                    .sum::<f64>()
            })
            .collect();
        Ok(FrechetWeights(weights))
    }

    /// Weighted average of the training responses before projection.
    pub(crate) fn raw_prediction(&self, x: &[f64]) -> Vec<f64> {
        let dim = self.space.flat_len();
        let mut out = self.response_mean.clone();
        for (a, (xa, m)) in x.iter().zip(&self.mean).enumerate() {
            let d = xa - m;
            for (o, s) in out.iter_mut().zip(&self.slope[a * dim..(a + 1) * dim]) {
                *o += d * s;
            }
        }
        out
    }

    /// Conditional Fréchet mean at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<MetricPoint> {
        self.check_query(x)?;
        Ok(self.space.project(self.raw_prediction(x)))
    }

    /// Same value as [`predict`](Self::predict), computed by forming the
    /// `n` weights and calling [`weighted_barycenter`] directly.
    pub fn predict_by_barycenter(&self, x: &[f64]) -> Result<MetricPoint> {
        let w = self.weights_at(x)?;
        weighted_barycenter(&self.training_responses, w.values(), &self.space)
    }

    pub fn predict_rows(&self, x: &PredictorMatrix) -> Result<Vec<MetricPoint>> {
        x.iter_rows().map(|row| self.predict(row)).collect()
    }

    /// Refits on the training sample with predictor `j` removed.
    pub fn without_variable(&self, j: usize) -> Result<Self> {
        let reduced = self.training_predictors.without_column(j)?;
        Self::fit_with(&reduced, &self.training_responses, &self.space, self.denominator)
    }

    /// Prediction of the reduced model that excludes predictor `j`; `x` is a
    /// full-length query whose `j`-th coordinate is dropped.
    pub fn predict_without_variable(&self, j: usize, x: &[f64]) -> Result<MetricPoint> {
        self.check_query(x)?;
        let reduced = self.without_variable(j)?;
        reduced.predict(&drop_coordinate(x, j))
    }
}

pub(crate) fn drop_coordinate(x: &[f64], j: usize) -> Vec<f64> {
    x.iter()
        .enumerate()
        .filter(|(c, _)| *c != j)
        .map(|(_, v)| *v)
        .collect()
}

fn symmetric_inverse(cov: DMatrix<f64>) -> Result<Vec<f64>> {
    let p = cov.nrows();
    let eig = SymmetricEigen::new(cov);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition_number = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(max > 0.0) || !(condition_number <= MAX_CONDITION_NUMBER) {
        return Err(Error::SingularCovariance { condition_number });
    }
    let v = &eig.eigenvectors;
    let mut inv = vec![0.0; p * p];
    for a in 0..p {
        for b in a..p {
            let s: f64 = (0..p).map(|k| v[(a, k)] * v[(b, k)] / eig.eigenvalues[k]).sum();
            inv[a * p + b] = s;
            inv[b * p + a] = s;
        }
    }
    Ok(inv)
}
