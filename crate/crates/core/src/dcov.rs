//! Distance-covariance test of independence between predictors and
//! pseudo-residuals, used to choose between the constant-radius and the
//! kNN-radius algorithms.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::frechet::PredictorMatrix;
use crate::rng;

/// Default number of permutations.
pub const DEFAULT_PERMUTATIONS: usize = 999;

/// Outcome of the permutation test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcovResult {
    /// `n · dCov²`.
    pub statistic: f64,
    pub dcov_squared: f64,
    /// `(1 + #{permuted ≥ observed}) / (B + 1)`.
    pub p_value: f64,
    pub permutations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Homoscedastic,
    Heteroscedastic,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Homoscedastic => "homoscedastic",
            Algorithm::Heteroscedastic => "heteroscedastic",
        })
    }
}

fn check_inputs(x: &PredictorMatrix, r: &[f64]) -> Result<()> {
    if x.rows() != r.len() {
        return Err(shape_mismatch(
            format!("{} residuals", x.rows()),
            format!("{} residuals", r.len()),
        ));
    }
    if r.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "distance covariance needs at least 2 observations, got {}",
            r.len()
        )));
    }
    Ok(())
}

/// Double-centered distance matrix, row-major `n × n`.
fn centered(n: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for j in 0..n {
        for k in (j + 1)..n {
            let d = dist(j, k);
            m[j * n + k] = d;
            m[k * n + j] = d;
        }
    }
    let row_means: Vec<f64> = m.chunks_exact(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    // Symmetric, so column means equal row means.
    for j in 0..n {
        for k in 0..n {
            m[j * n + k] += grand - row_means[j] - row_means[k];
        }
    }
    m
}

fn predictor_matrix(x: &PredictorMatrix) -> Vec<f64> {
    centered(x.rows(), |j, k| {
        x.row(j)
            .iter()
            .zip(x.row(k))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

fn residual_matrix(r: &[f64]) -> Vec<f64> {
    centered(r.len(), |j, k| (r[j] - r[k]).abs())
}

fn mean_product(a: &[f64], b: &[f64], n: usize) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (n * n) as f64
}

/// `Σ_jk A[j,k] B[π(j), π(k)] / n²`. Double-centering commutes with
/// relabeling, so this is dCov² of the permuted sample.
fn permuted_statistic(a: &[f64], b: &[f64], perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut total = 0.0;
    for (a_row, &pj) in a.chunks_exact(n).zip(perm) {
        let b_row = &b[pj * n..(pj + 1) * n];
        total += a_row.iter().zip(perm).map(|(av, &pk)| av * b_row[pk]).sum::<f64>();
    }
    total / (n * n) as f64
}

/// Squared sample distance covariance between predictor rows (Euclidean
/// distance) and residuals (absolute difference).
pub fn dcov_squared(x: &PredictorMatrix, r: &[f64]) -> Result<f64> {
    check_inputs(x, r)?;
    let n = r.len();
    Ok(mean_product(&predictor_matrix(x), &residual_matrix(r), n))
}

/// Permutation test with `permutations` relabelings of the residuals.
///
/// Permutation `b` draws from its own stream of `seed`, so the result does
/// not depend on how the replicates are scheduled.
pub fn test(x: &PredictorMatrix, r: &[f64], permutations: usize, seed: u64) -> Result<DcovResult> {
    check_inputs(x, r)?;
    if permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let n = r.len();
    let a = predictor_matrix(x);
    let b = residual_matrix(r);
    let identity: Vec<usize> = (0..n).collect();
    let observed = permuted_statistic(&a, &b, &identity);

    let exceed = (0..permutations)
        .into_par_iter()
        .map(|rep| {
            let mut perm = identity.clone();
            perm.shuffle(&mut rng::substream(seed, rep as u64));
            usize::from(permuted_statistic(&a, &b, &perm) >= observed)
        })
        .sum::<usize>();

    Ok(DcovResult {
        statistic: n as f64 * observed,
        dcov_squared: observed,
        p_value: (1 + exceed) as f64 / (permutations + 1) as f64,
        permutations,
    })
}

/// `Heteroscedastic` iff `p_value ≤ level`.
pub fn decide(p_value: f64, level: f64) -> Algorithm {
    if p_value <= level {
        Algorithm::Heteroscedastic
    } else {
        Algorithm::Homoscedastic
    }
}

pub fn decide_algorithm(
    x: &PredictorMatrix,
    r: &[f64],
    level: f64,
    permutations: usize,
    seed: u64,
) -> Result<(Algorithm, DcovResult)> {
    let result = test(x, r, permutations, seed)?;
    Ok((decide(result.p_value, level), result))
}
