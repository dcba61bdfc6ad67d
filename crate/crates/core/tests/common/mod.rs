//! Invariant checks and independent oracles shared by the property tests
//! and the acceptance suite. Each check returns `Err(description)` on a
//! violation.
#![allow(dead_code)]

use metric_uq::metric::{laplacian_violation, weighted_barycenter};
use metric_uq::region::{
    fit_heteroscedastic_knn, fit_homoscedastic, fit_homoscedastic_with,
    QuantileConvention, RadiusRule,
};
use metric_uq::{GlobalFrechetModel, MetricPoint, PredictorMatrix, ResidualSample, Space};
use nalgebra::{DMatrix, DVector};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

/// Valid `nodes × nodes` Laplacian from raw draws in `[0, 1]`, one per
/// off-diagonal pair (upper triangle, row order).
pub fn laplacian_from(nodes: usize, raw: &[f64], edge_bound: f64) -> Vec<f64> {
    let mut m = vec![0.0; nodes * nodes];
    let mut it = raw.iter().cycle();
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            let v = -edge_bound * it.next().unwrap();
            m[i * nodes + j] = v;
            m[j * nodes + i] = v;
        }
    }
    for i in 0..nodes {
        let off: f64 = (0..nodes).filter(|&j| j != i).map(|j| m[i * nodes + j]).sum();
        m[i * nodes + i] = -off;
    }
    m
}

/// Non-decreasing grid from a start value and non-negative increments.
pub fn quantile_from(start: f64, increments: &[f64]) -> Vec<f64> {
    let mut acc = start;
    increments
        .iter()
        .map(|d| {
            acc += d.abs();
            acc
        })
        .collect()
}

pub fn check_metric_axioms(space: &Space, a: &MetricPoint, b: &MetricPoint, c: &MetricPoint, tol: f64) -> Check {
    for dist in [Space::distance_d1, Space::distance_d2] {
        let ab = dist(space, a, b).map_err(|e| e.to_string())?;
        let ba = dist(space, b, a).map_err(|e| e.to_string())?;
        ensure!(ab == ba, "asymmetric distance: {ab} vs {ba}");
        ensure!(dist(space, a, a).unwrap() == 0.0, "d(a, a) != 0");
        let ac = dist(space, a, c).unwrap();
        let cb = dist(space, c, b).unwrap();
        ensure!(ab <= ac + cb + tol, "triangle violated: {ab} > {ac} + {cb}");
    }
    Ok(())
}

/// Minimizer of `Σ wᵢ ‖y - Yᵢ‖²` over a box, by repeated grid refinement.
pub fn grid_search_barycenter(points: &[[f64; 2]], weights: &[f64]) -> [f64; 2] {
    let objective = |y: [f64; 2]| -> f64 {
        points
            .iter()
            .zip(weights)
            .map(|(p, w)| w * ((y[0] - p[0]).powi(2) + (y[1] - p[1]).powi(2)))
            .sum()
    };
    let span = points.iter().flat_map(|p| p.iter()).fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut center = [0.0, 0.0];
    let mut half = 10.0 * span;
    let steps = 200;
    for _ in 0..12 {
        let h = 2.0 * half / steps as f64;
        let mut best = (f64::INFINITY, center);
        for i in 0..=steps {
            for j in 0..=steps {
                let y = [center[0] - half + i as f64 * h, center[1] - half + j as f64 * h];
                let v = objective(y);
                if v < best.0 {
                    best = (v, y);
                }
            }
        }
        center = best.1;
        half = 2.0 * h;
    }
    center
}

pub fn check_barycenter_grid(points: &[[f64; 2]], weights: &[f64], tol: f64) -> Check {
    let space = Space::euclidean(2);
    let pts: Vec<MetricPoint> = points.iter().map(|p| space.point(p.to_vec()).unwrap()).collect();
    let bary = weighted_barycenter(&pts, weights, &space).map_err(|e| e.to_string())?;
    let oracle = grid_search_barycenter(points, weights);
    for (b, o) in bary.values().iter().zip(oracle) {
        ensure!((b - o).abs() <= tol, "barycenter {:?} vs grid search {oracle:?}", bary.values());
    }
    Ok(())
}

pub fn check_equal_weight_mean(points: &[Vec<f64>], tol: f64) -> Check {
    let dim = points[0].len();
    let space = Space::euclidean(dim);
    let pts: Vec<MetricPoint> = points.iter().map(|p| space.point(p.clone()).unwrap()).collect();
    let bary = weighted_barycenter(&pts, &vec![0.7; pts.len()], &space).map_err(|e| e.to_string())?;
    for d in 0..dim {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / points.len() as f64;
        ensure!((bary.values()[d] - mean).abs() <= tol, "coordinate {d}: {} vs mean {mean}", bary.values()[d]);
    }
    Ok(())
}

pub fn check_weight_mean(x: &PredictorMatrix, y: &[MetricPoint], space: &Space, query: &[f64], tol: f64) -> Check {
    let model = GlobalFrechetModel::fit(x, y, space).map_err(|e| e.to_string())?;
    let mean = model.weights_at(query).unwrap().mean();
    ensure!((mean - 1.0).abs() <= tol, "weight mean {mean}");
    Ok(())
}

/// Fitted value of ordinary least squares with intercept at `query`,
/// solved from the normal equations.
pub fn ols_oracle(x: &PredictorMatrix, y: &[f64], query: &[f64]) -> f64 {
    let (n, p) = (x.rows(), x.cols());
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.row(i)[j - 1] });
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * DVector::from_column_slice(y);
    let beta = gram.lu().solve(&rhs).expect("full-rank design");
    beta[0] + query.iter().zip(beta.iter().skip(1)).map(|(a, b)| a * b).sum::<f64>()
}

pub fn check_ols(x: &PredictorMatrix, y: &[f64], query: &[f64], tol: f64) -> Check {
    let space = Space::euclidean(1);
    let pts: Vec<MetricPoint> = y.iter().map(|v| space.point(vec![*v]).unwrap()).collect();
    let model = GlobalFrechetModel::fit(x, &pts, &space).map_err(|e| e.to_string())?;
    let fitted = model.predict(query).unwrap().values()[0];
    let by_weights = model.predict_by_barycenter(query).unwrap().values()[0];
    let oracle = ols_oracle(x, y, query);
    ensure!((fitted - oracle).abs() <= tol, "predict {fitted} vs OLS {oracle}");
    ensure!((by_weights - oracle).abs() <= tol, "weighted barycenter {by_weights} vs OLS {oracle}");
    Ok(())
}

pub fn check_permutation_invariance(x: &PredictorMatrix, y: &[MetricPoint], space: &Space, perm: &[usize], query: &[f64], tol: f64) -> Check {
    let a = GlobalFrechetModel::fit(x, y, space).map_err(|e| e.to_string())?;
    let y_perm: Vec<MetricPoint> = perm.iter().map(|&i| y[i].clone()).collect();
    let b = GlobalFrechetModel::fit(&x.select_rows(perm), &y_perm, space).unwrap();
    let (pa, pb) = (a.predict(query).unwrap(), b.predict(query).unwrap());
    for (u, v) in pa.values().iter().zip(pb.values()) {
        ensure!((u - v).abs() <= tol * (1.0 + u.abs()), "permuted fit differs: {u} vs {v}");
    }
    Ok(())
}

pub fn check_affine_equivariance(x: &PredictorMatrix, y: &[Vec<f64>], shift: &[f64], query: &[f64], tol: f64) -> Check {
    let space = Space::euclidean(shift.len());
    let pts: Vec<MetricPoint> = y.iter().map(|v| space.point(v.clone()).unwrap()).collect();
    let shifted: Vec<MetricPoint> = y
        .iter()
        .map(|v| space.point(v.iter().zip(shift).map(|(a, c)| a + c).collect()).unwrap())
        .collect();
    let a = GlobalFrechetModel::fit(x, &pts, &space).map_err(|e| e.to_string())?;
    let b = GlobalFrechetModel::fit(x, &shifted, &space).unwrap();
    let (pa, pb) = (a.predict(query).unwrap(), b.predict(query).unwrap());
    for ((u, v), c) in pa.values().iter().zip(pb.values()).zip(shift) {
        ensure!((u + c - v).abs() <= tol * (1.0 + v.abs()), "shifted prediction {v} vs {u} + {c}");
    }
    Ok(())
}

pub fn check_knn_full_reduction(sample: &ResidualSample, alpha: f64, queries: &[Vec<f64>]) -> Check {
    let n = sample.len();
    let knn = fit_heteroscedastic_knn(sample, alpha, n).map_err(|e| e.to_string())?;
    let homo = fit_homoscedastic_with(sample, alpha, QuantileConvention::PlugIn).unwrap();
    for q in queries {
        let (a, b) = (knn.radius_at(q), homo.radius_at(q));
        ensure!(a == b, "k = n radius {a} vs constant {b} at {q:?}");
    }
    Ok(())
}

/// Rules whose radius is a single order statistic. The conformalized kNN
/// radius adds an α-dependent offset and is not monotone in α.
fn radius_rules(sample: &ResidualSample, alpha: f64, k: usize) -> Vec<(&'static str, RadiusRule)> {
    vec![
        ("homoscedastic", fit_homoscedastic(sample, alpha).unwrap()),
        (
            "plug-in",
            fit_homoscedastic_with(sample, alpha, QuantileConvention::PlugIn).unwrap(),
        ),
        ("knn", fit_heteroscedastic_knn(sample, alpha, k).unwrap()),
    ]
}

pub fn check_alpha_monotone(
    sample: &ResidualSample,
    alpha_small: f64,
    alpha_large: f64,
    k: usize,
    queries: &[Vec<f64>],
) -> Check {
    assert!(alpha_small <= alpha_large);
    let wide = radius_rules(sample, alpha_small, k);
    let narrow = radius_rules(sample, alpha_large, k);
    for ((name, w), (_, s)) in wide.iter().zip(&narrow) {
        for q in queries {
            let (rw, rs) = (w.radius_at(q), s.radius_at(q));
            ensure!(rw >= rs, "{name}: radius {rw} at α = {alpha_small} below {rs} at α = {alpha_large}");
        }
    }
    Ok(())
}

pub fn check_wasserstein_barycenter(space: &Space, points: &[Vec<f64>], weights: &[f64]) -> Check {
    let pts: Vec<MetricPoint> = points.iter().map(|p| space.point(p.clone()).unwrap()).collect();
    let bary = match weighted_barycenter(&pts, weights, space) {
        Ok(b) => b,
        Err(metric_uq::Error::DegenerateWeights) => return Ok(()),
        Err(e) => return Err(e.to_string()),
    };
    ensure!(bary.values().windows(2).all(|w| w[0] <= w[1]), "barycenter not monotone");
    space.validate(&bary).map_err(|e| e.to_string())
}

pub fn check_laplacian_barycenter(space: &Space, nodes: usize, edge_bound: f64, points: &[Vec<f64>], weights: &[f64]) -> Check {
    let pts: Vec<MetricPoint> = points.iter().map(|p| space.point(p.clone()).unwrap()).collect();
    let bary = match weighted_barycenter(&pts, weights, space) {
        Ok(b) => b,
        Err(metric_uq::Error::DegenerateWeights) => return Ok(()),
        Err(e) => return Err(e.to_string()),
    };
    match laplacian_violation(nodes, bary.values(), edge_bound, 1e-8) {
        None => Ok(()),
        Some(v) => Err(v),
    }
}

/// Squared sample distance covariance from the expanded V-statistic
/// `S1 + S2 - 2 S3` on raw (uncentered) distances.
pub fn naive_dcov_squared(x: &PredictorMatrix, r: &[f64]) -> f64 {
    let n = r.len();
    let a = |j: usize, k: usize| -> f64 {
        x.row(j).iter().zip(x.row(k)).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };
    let b = |j: usize, k: usize| (r[j] - r[k]).abs();
    let nf = n as f64;
    let (mut s1, mut sa, mut sb, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            s1 += a(j, k) * b(j, k);
            sa += a(j, k);
            sb += b(j, k);
            for l in 0..n {
                s3 += a(j, k) * b(j, l);
            }
        }
    }
    s1 / (nf * nf) + (sa / (nf * nf)) * (sb / (nf * nf)) - 2.0 * s3 / (nf * nf * nf)
}
