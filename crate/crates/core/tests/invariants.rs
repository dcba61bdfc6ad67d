mod common;

use common::*;
use metric_uq::dcov::{dcov_squared, test as dcov_test};
use metric_uq::metric::{D2Choice, SpaceKind};
use metric_uq::region::{split, QuantileConvention};
use metric_uq::selection::loss_differences;
use metric_uq::{GlobalFrechetModel, MetricPoint, PredictorMatrix, ResidualSample, Space};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = PredictorMatrix> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| PredictorMatrix::new(rows, cols, v).unwrap())
}

fn euclid_points(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, dim), n)
}

fn quantile_points(n: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        (-5.0..5.0f64, prop::collection::vec(0.0..0.5f64, m)).prop_map(|(s, inc)| quantile_from(s, &inc)),
        n,
    )
}

fn laplacian_points(n: usize, nodes: usize, edge_bound: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    let pairs = nodes * (nodes - 1) / 2;
    prop::collection::vec(
        prop::collection::vec(0.0..=1.0f64, pairs).prop_map(move |raw| laplacian_from(nodes, &raw, edge_bound)),
        n,
    )
}

fn sample(n: usize, p: usize) -> impl Strategy<Value = ResidualSample> {
    (prop::collection::vec(0.0..5.0f64, n), matrix(n, p), any::<u64>()).prop_map(|(r, x, seed)| {
        // Coarse rounding creates ties among residuals.
        let r = r.iter().map(|v| (v * 4.0).round() / 4.0).collect();
        ResidualSample::with_seed(r, x, seed).unwrap()
    })
}

fn as_points(space: &Space, v: &[Vec<f64>]) -> Vec<MetricPoint> {
    v.iter().map(|p| space.point(p.clone()).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euclidean_metric_axioms(pts in euclid_points(3, 3)) {
        for d2 in [D2Choice::SameAsD1, D2Choice::SupNorm] {
            let space = Space::euclidean(3).with_d2(d2).unwrap();
            let p = as_points(&space, &pts);
            check_metric_axioms(&space, &p[0], &p[1], &p[2], 1e-12).unwrap();
        }
    }

    #[test]
    fn wasserstein_metric_axioms(pts in quantile_points(3, 100)) {
        for d2 in [D2Choice::SameAsD1, D2Choice::SupNorm, D2Choice::Euclidean] {
            let space = Space::wasserstein(100).with_d2(d2).unwrap();
            let p = as_points(&space, &pts);
            check_metric_axioms(&space, &p[0], &p[1], &p[2], 1e-9).unwrap();
        }
    }

    #[test]
    fn laplacian_metric_axioms(pts in laplacian_points(3, 4, 2.0)) {
        let space = Space::laplacian(4, 2.0);
        let p = as_points(&space, &pts);
        check_metric_axioms(&space, &p[0], &p[1], &p[2], 1e-12).unwrap();
    }

    #[test]
    fn barycenter_matches_grid_search(pts in euclid_points(3, 2), scale in 0.5..2.0f64) {
        let points: Vec<[f64; 2]> = pts.iter().map(|p| [p[0], p[1]]).collect();
        let weights: Vec<f64> = [1.5, -0.2, 0.7].iter().map(|w| w * scale).collect();
        check_barycenter_grid(&points, &weights, 1e-6).unwrap();
    }

    #[test]
    fn equal_weights_give_arithmetic_mean(pts in euclid_points(5, 3)) {
        check_equal_weight_mean(&pts, 1e-12).unwrap();
    }

    #[test]
    fn wasserstein_barycenter_is_monotone(
        pts in quantile_points(4, 20),
        weights in prop::collection::vec(-2.0..2.0f64, 4),
    ) {
        check_wasserstein_barycenter(&Space::wasserstein(20), &pts, &weights).unwrap();
    }

    #[test]
    fn bounded_wasserstein_barycenter_respects_bounds(
        pts in quantile_points(4, 20),
        weights in prop::collection::vec(-2.0..2.0f64, 4),
    ) {
        let pts: Vec<Vec<f64>> = pts.iter().map(|q| q.iter().map(|v| v.clamp(-3.0, 8.0)).collect()).collect();
        let kind = SpaceKind::Wasserstein { grid: metric_uq::metric::midpoint_grid(20), bounds: Some((-3.0, 8.0)) };
        let space = Space::new(kind, D2Choice::SameAsD1).unwrap();
        check_wasserstein_barycenter(&space, &pts, &weights).unwrap();
    }

    #[test]
    fn nonnegative_weights_need_no_projection(
        pts in quantile_points(3, 20),
        weights in prop::collection::vec(0.1..2.0f64, 3),
    ) {
        let space = Space::wasserstein(20);
        let p = as_points(&space, &pts);
        let bary = metric_uq::metric::weighted_barycenter(&p, &weights, &space).unwrap();
        let total: f64 = weights.iter().sum();
        for (g, v) in bary.values().iter().enumerate() {
            let avg: f64 = pts.iter().zip(&weights).map(|(q, w)| w * q[g]).sum::<f64>() / total;
            prop_assert!((v - avg).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_barycenter_is_valid(
        pts in laplacian_points(4, 5, 1.5),
        weights in prop::collection::vec(-2.0..2.0f64, 4),
    ) {
        check_laplacian_barycenter(&Space::laplacian(5, 1.5), 5, 1.5, &pts, &weights).unwrap();
    }

    #[test]
    fn weights_average_to_one(x in matrix(30, 3), query in prop::collection::vec(-5.0..5.0f64, 3)) {
        let space = Space::euclidean(1);
        let y: Vec<MetricPoint> = (0..30).map(|i| space.point(vec![i as f64]).unwrap()).collect();
        check_weight_mean(&x, &y, &space, &query, 1e-12).unwrap();
    }

    #[test]
    fn scalar_fit_is_ols(
        x in matrix(25, 3),
        y in prop::collection::vec(-10.0..10.0f64, 25),
        query in prop::collection::vec(-3.0..3.0f64, 3),
    ) {
        check_ols(&x, &y, &query, 1e-8).unwrap();
    }

    #[test]
    fn fit_is_permutation_invariant(
        x in matrix(20, 2),
        pts in quantile_points(20, 10),
        perm in Just((0..20).collect::<Vec<usize>>()).prop_shuffle(),
        query in prop::collection::vec(-3.0..3.0f64, 2),
    ) {
        let space = Space::wasserstein(10);
        check_permutation_invariance(&x, &as_points(&space, &pts), &space, &perm, &query, 1e-10).unwrap();
    }

    #[test]
    fn fit_is_shift_equivariant(
        x in matrix(20, 2),
        y in euclid_points(20, 2),
        shift in prop::collection::vec(-50.0..50.0f64, 2),
        query in prop::collection::vec(-3.0..3.0f64, 2),
    ) {
        check_affine_equivariance(&x, &y, &shift, &query, 1e-10).unwrap();
    }

    #[test]
    fn knn_with_all_neighbors_is_constant_radius(
        s in sample(40, 2),
        alpha in 0.01..0.99f64,
        queries in prop::collection::vec(prop::collection::vec(-4.0..4.0f64, 2), 5),
    ) {
        check_knn_full_reduction(&s, alpha, &queries).unwrap();
    }

    #[test]
    fn radii_shrink_as_alpha_grows(
        s in sample(40, 2),
        a in 0.01..0.99f64,
        b in 0.01..0.99f64,
        k in 1usize..=40,
        queries in prop::collection::vec(prop::collection::vec(-4.0..4.0f64, 2), 5),
    ) {
        check_alpha_monotone(&s, a.min(b), a.max(b), k, &queries).unwrap();
    }

    #[test]
    fn conformal_rank_is_at_least_plug_in(n in 1usize..2000, alpha in 0.001..0.999f64) {
        let c = QuantileConvention::Conformal.rank(n, alpha);
        let p = QuantileConvention::PlugIn.rank(n, alpha);
        prop_assert!(c >= p && p >= 1 && p <= n);
    }

    #[test]
    fn split_is_a_partition(n in 3usize..300, seed in any::<u64>()) {
        let s = split(n, &[0.4, 0.4, 0.2], seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).chain(s.calib.as_ref().unwrap()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn dcov_matches_naive_oracle(x in matrix(12, 2), r in prop::collection::vec(-3.0..3.0f64, 12)) {
        let fast = dcov_squared(&x, &r).unwrap();
        prop_assert!((fast - naive_dcov_squared(&x, &r)).abs() <= 1e-12);
        prop_assert!(fast >= -1e-12);
    }

    #[test]
    fn dcov_relabel_and_shift_invariant(
        x in matrix(15, 2),
        r in prop::collection::vec(-3.0..3.0f64, 15),
        perm in Just((0..15).collect::<Vec<usize>>()).prop_shuffle(),
        shift in -100i32..100,
    ) {
        let base = dcov_squared(&x, &r).unwrap();
        let r_perm: Vec<f64> = perm.iter().map(|&i| r[i]).collect();
        let relabeled = dcov_squared(&x.select_rows(&perm), &r_perm).unwrap();
        prop_assert!((base - relabeled).abs() <= 1e-12 * (1.0 + base));
        let shifted: Vec<f64> = r.iter().map(|v| v + shift as f64).collect();
        prop_assert!((base - dcov_squared(&x, &shifted).unwrap()).abs() <= 1e-12 * (1.0 + base));
    }

    #[test]
    fn swapping_models_negates_w(
        x in matrix(30, 3),
        y in euclid_points(30, 2),
    ) {
        let space = Space::euclidean(2);
        let pts = as_points(&space, &y);
        let full = GlobalFrechetModel::fit(&x, &pts, &space).unwrap();
        let reduced = full.without_variable(1).unwrap();
        let xr = x.without_column(1).unwrap();
        let w = loss_differences(&full, &x, &reduced, &xr, &pts).unwrap();
        let swapped = loss_differences(&reduced, &xr, &full, &x, &pts).unwrap();
        for (a, b) in w.iter().zip(&swapped) {
            prop_assert_eq!(*a, -*b);
        }
    }
}

#[test]
fn conformal_knn_offset_can_break_alpha_monotonicity() {
    use metric_uq::region::fit_heteroscedastic_conformal;
    // k = 2. Near the origin the local quantile is 2 at α = 0.4 and 1 at
    // α = 0.6; four calibration residuals of 10 there give scores 8 and 9,
    // and ranks 3 and 2 of 4 pick exactly those. At x = 5 the local
    // quantile is 10 for both levels, so the radii are 18 and 19.
    let x = PredictorMatrix::new(4, 1, vec![0.0, 0.1, 5.0, 5.1]).unwrap();
    let s = ResidualSample::new(vec![1.0, 2.0, 10.0, 10.0], x, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let cx = PredictorMatrix::new(4, 1, vec![0.05; 4]).unwrap();
    let calib = ResidualSample::new(vec![10.0; 4], cx, vec![0.5, 0.6, 0.7, 0.8]).unwrap();
    let wide = fit_heteroscedastic_conformal(&s, &calib, 0.4, 2).unwrap().radius_at(&[5.0]);
    let narrow = fit_heteroscedastic_conformal(&s, &calib, 0.6, 2).unwrap().radius_at(&[5.0]);
    assert_eq!((wide, narrow), (18.0, 19.0));
}

#[test]
fn null_p_values_are_super_uniform() {
    // Independent residuals: P(p ≤ u) ≤ u + 1/(B + 1) up to binomial noise.
    let runs = 200;
    let b = 99;
    let mut p_values = Vec::new();
    for run in 0..runs {
        let mut rng = metric_uq::rng::seeded(run);
        let x = PredictorMatrix::new(40, 2, metric_uq::rng::uniform_draws(80, &mut rng)).unwrap();
        let r = metric_uq::rng::uniform_draws(40, &mut rng);
        p_values.push(dcov_test(&x, &r, b, run + 1000).unwrap().p_value);
    }
    for u in [0.05, 0.1, 0.25, 0.5] {
        let frac = p_values.iter().filter(|&&p| p <= u).count() as f64 / runs as f64;
        let se = (u * (1.0 - u) / runs as f64).sqrt();
        assert!(frac <= u + 1.0 / (b as f64 + 1.0) + 3.0 * se, "P(p ≤ {u}) = {frac}");
    }
}
