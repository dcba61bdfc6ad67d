//! Ball-shaped prediction regions `B(center(x), radius(x))` under `d2`.
//!
//! Radii come from order statistics of pseudo-residuals
//! `r_i = d2(Y_i, m(X_i))` computed on data not used to fit the center:
//!
//! * [`fit_homoscedastic`]: one constant radius, the
//!   `ceil((1 - α)(n + 1))`-th smallest residual. Marginal coverage is at
//!   least `1 - α` for exchangeable data, whatever the center model.
//! * [`fit_heteroscedastic_knn`]: the `ceil((1 - α) k)`-th smallest residual
//!   among the `k` nearest held-out predictors of the query.
//! * [`fit_heteroscedastic_conformal`]: the kNN radius shifted by a
//!   conformal offset estimated on a third split.
//! * [`fit_unconditional`]: no predictors; a ball around the Fréchet mean.
//!
//! Residual ties are broken by independent uniform keys attached to every
//! residual, so order statistics behave as if the scores were continuous.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, shape_mismatch, Error, Result};
use crate::frechet::{GlobalFrechetModel, PredictorMatrix};
use crate::metric::{weighted_barycenter, MetricPoint, Space};
use crate::rng;

/// Default fractions for the three-way split of the conformalized kNN rule.
pub const DEFAULT_THREE_WAY_SPLIT: [f64; 3] = [0.4, 0.4, 0.2];

/// Disjoint index sets of a random data split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub calib: Option<Vec<usize>>,
}

/// Uniformly random split of `0..n` into two or three disjoint sets.
///
/// Set sizes are `floor(fraction * n)`; when the fractions sum to one the
/// last set absorbs the rounding remainder. Each set is returned sorted.
pub fn split(n: usize, fractions: &[f64], seed: u64) -> Result<SplitIndices> {
    if !(fractions.len() == 2 || fractions.len() == 3) {
        return Err(Error::InvalidParameter(format!(
            "expected 2 or 3 split fractions, got {}",
            fractions.len()
        )));
    }
    let total: f64 = fractions.iter().sum();
    if fractions.iter().any(|&f| !(f > 0.0)) || total > 1.0 + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split fractions must be positive and sum to at most 1, got {fractions:?}"
        )));
    }
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| (f * n as f64 + 1e-9).floor() as usize)
        .collect();
    if (total - 1.0).abs() <= 1e-9 {
        let head: usize = sizes[..sizes.len() - 1].iter().sum();
        *sizes.last_mut().unwrap() = n.saturating_sub(head);
    }
    if sizes.contains(&0) {
        return Err(Error::Empty("split set"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut sets = Vec::with_capacity(3);
    let mut start = 0;
    for size in sizes {
        let mut set = order[start..start + size].to_vec();
        set.sort_unstable();
        sets.push(set);
        start += size;
    }
    let calib = if sets.len() == 3 { sets.pop() } else { None };
    let test = sets.pop().unwrap();
    let train = sets.pop().unwrap();
    Ok(SplitIndices { train, test, calib })
}

/// Pseudo-residuals with their predictors and tie-breaking keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    residuals: Vec<f64>,
    predictors: PredictorMatrix,
    tiebreak: Vec<f64>,
}

impl ResidualSample {
    pub fn new(residuals: Vec<f64>, predictors: PredictorMatrix, tiebreak: Vec<f64>) -> Result<Self> {
        if residuals.len() != predictors.rows() || residuals.len() != tiebreak.len() {
            return Err(shape_mismatch(
                format!("{} residuals, predictor rows and tiebreak keys", residuals.len()),
                format!("{} predictor rows, {} keys", predictors.rows(), tiebreak.len()),
            ));
        }
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter("residuals must be finite".into()));
        }
        Ok(Self {
            residuals,
            predictors,
            tiebreak,
        })
    }

    /// Attaches uniform tiebreak keys drawn from `seed`.
    pub fn with_seed(residuals: Vec<f64>, predictors: PredictorMatrix, seed: u64) -> Result<Self> {
        let keys = rng::uniform_draws(residuals.len(), &mut rng::seeded(seed));
        Self::new(residuals, predictors, keys)
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn predictors(&self) -> &PredictorMatrix {
        &self.predictors
    }

    pub fn tiebreak(&self) -> &[f64] {
        &self.tiebreak
    }
}

/// `r_i = d2(Y_i, m(X_i))` on held-out data, with tiebreak keys from `seed`.
pub fn residuals(
    model: &GlobalFrechetModel,
    x: &PredictorMatrix,
    y: &[MetricPoint],
    seed: u64,
) -> Result<ResidualSample> {
    if x.rows() != y.len() {
        return Err(shape_mismatch(
            format!("{} responses", x.rows()),
            format!("{} responses", y.len()),
        ));
    }
    let space = model.space();
    let r = x
        .iter_rows()
        .zip(y)
        .map(|(row, yi)| {
            let center = model.predict(row)?;
            space.distance_d2(yi, &center)
        })
        .collect::<Result<Vec<_>>>()?;
    ResidualSample::with_seed(r, x.clone(), seed)
}

/// Which order statistic represents the empirical `1 - α` quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileConvention {
    /// `ceil((1 - α)(n + 1))`, finite-sample valid.
    #[default]
    Conformal,
    /// `ceil((1 - α) n)`, the plain empirical quantile.
    PlugIn,
}

impl QuantileConvention {
    /// 1-based rank of the order statistic; may exceed `n`.
    pub fn rank(self, n: usize, alpha: f64) -> usize {
        let level = 1.0 - alpha;
        let raw = match self {
            QuantileConvention::Conformal => level * (n as f64 + 1.0),
            QuantileConvention::PlugIn => level * n as f64,
        };
        ((raw - 1e-9).ceil() as usize).max(1)
    }
}

fn by_value_then_key(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

/// `rank`-th smallest value (1-based) under the lexicographic order
/// (value, key); `+∞` when `rank` exceeds the sample size.
pub fn order_statistic(values: &[f64], keys: &[f64], rank: usize) -> f64 {
    if rank == 0 || rank > values.len() {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(keys.iter().copied()).collect();
    let (_, nth, _) = pairs.select_nth_unstable_by(rank - 1, |a, b| by_value_then_key(*a, *b));
    nth.0
}

mod radius_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid radius {t:?}"))),
        }
    }
}

/// Local radius: order statistic of the residuals of the `k` nearest
/// held-out predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRadius {
    k: usize,
    alpha: f64,
    sample: ResidualSample,
}

impl KnnRadius {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sample(&self) -> &ResidualSample {
        &self.sample
    }

    /// Indices of the `k` nearest predictors to `x`, ordered by
    /// (Euclidean distance, tiebreak key, index).
    pub fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        let sample = &self.sample;
        let mut keyed: Vec<(f64, f64, usize)> = sample
            .predictors
            .iter_rows()
            .enumerate()
            .map(|(i, row)| {
                let d: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, sample.tiebreak[i], i)
            })
            .collect();
        let cmp = |a: &(f64, f64, usize), b: &(f64, f64, usize)| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
        };
        if self.k < keyed.len() {
            keyed.select_nth_unstable_by(self.k - 1, cmp);
            keyed.truncate(self.k);
        }
        keyed.sort_unstable_by(cmp);
        keyed.into_iter().map(|t| t.2).collect()
    }

    pub fn radius_at(&self, x: &[f64]) -> f64 {
        let idx = self.neighbors(x);
        let values: Vec<f64> = idx.iter().map(|&i| self.sample.residuals[i]).collect();
        let keys: Vec<f64> = idx.iter().map(|&i| self.sample.tiebreak[i]).collect();
        order_statistic(&values, &keys, QuantileConvention::PlugIn.rank(self.k, self.alpha))
    }
}

/// How the radius of a region is obtained at a query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RadiusRule {
    /// Same radius everywhere; `+∞` means the whole space.
    Constant {
        #[serde(with = "radius_serde")]
        radius: f64,
    },
    Knn(KnnRadius),
    /// kNN radius plus a calibrated offset, floored at zero.
    ConformalKnn {
        knn: KnnRadius,
        #[serde(with = "radius_serde")]
        offset: f64,
    },
}

impl RadiusRule {
    pub fn radius_at(&self, x: &[f64]) -> f64 {
        match self {
            RadiusRule::Constant { radius } => *radius,
            RadiusRule::Knn(knn) => knn.radius_at(x),
            RadiusRule::ConformalKnn { knn, offset } => (knn.radius_at(x) + offset).max(0.0),
        }
    }

    /// The constant radius, if the rule does not depend on `x`.
    pub fn constant(&self) -> Option<f64> {
        match self {
            RadiusRule::Constant { radius } => Some(*radius),
            _ => None,
        }
    }
}

/// Constant radius at level `alpha` with the conformal index.
pub fn fit_homoscedastic(sample: &ResidualSample, alpha: f64) -> Result<RadiusRule> {
    fit_homoscedastic_with(sample, alpha, QuantileConvention::Conformal)
}

pub fn fit_homoscedastic_with(
    sample: &ResidualSample,
    alpha: f64,
    convention: QuantileConvention,
) -> Result<RadiusRule> {
    check_alpha(alpha)?;
    if sample.is_empty() {
        return Err(Error::Empty("residual sample"));
    }
    let rank = convention.rank(sample.len(), alpha);
    Ok(RadiusRule::Constant {
        radius: order_statistic(&sample.residuals, &sample.tiebreak, rank),
    })
}

pub fn fit_heteroscedastic_knn(sample: &ResidualSample, alpha: f64, k: usize) -> Result<RadiusRule> {
    Ok(RadiusRule::Knn(knn_radius(sample, alpha, k)?))
}

fn knn_radius(sample: &ResidualSample, alpha: f64, k: usize) -> Result<KnnRadius> {
    check_alpha(alpha)?;
    if k == 0 || k > sample.len() {
        return Err(Error::KOutOfRange { k, n: sample.len() });
    }
    Ok(KnnRadius {
        k,
        alpha,
        sample: sample.clone(),
    })
}

/// kNN radius fitted on `sample`, shifted by the conformal quantile of the
/// scores `r_i - r̃(X_i)` over the calibration residuals `calib`.
pub fn fit_heteroscedastic_conformal(
    sample: &ResidualSample,
    calib: &ResidualSample,
    alpha: f64,
    k: usize,
) -> Result<RadiusRule> {
    let knn = knn_radius(sample, alpha, k)?;
    if calib.is_empty() {
        return Err(Error::Empty("calibration split"));
    }
    if calib.predictors.cols() != sample.predictors.cols() {
        return Err(shape_mismatch(
            format!("{} calibration predictors", sample.predictors.cols()),
            format!("{}", calib.predictors.cols()),
        ));
    }
    let scores: Vec<f64> = calib
        .residuals
        .iter()
        .zip(calib.predictors.iter_rows())
        .map(|(r, x)| r - knn.radius_at(x))
        .collect();
    let rank = QuantileConvention::Conformal.rank(scores.len(), alpha);
    let offset = order_statistic(&scores, &calib.tiebreak, rank);
    Ok(RadiusRule::ConformalKnn { knn, offset })
}

/// Center of a prediction ball as a function of the predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    Model(GlobalFrechetModel),
    /// Same center for every query (no predictors).
    Fixed(MetricPoint),
    /// Known affine map `x ↦ intercept + Bᵀ x` with `B` row-major `p × dim`.
    /// Used for oracle regions of simulated linear models.
    Affine {
        intercept: Vec<f64>,
        coefficients: Vec<f64>,
    },
}

impl Center {
    pub fn at(&self, x: &[f64], space: &Space) -> Result<MetricPoint> {
        match self {
            Center::Model(m) => m.predict(x),
            Center::Fixed(p) => Ok(p.clone()),
            Center::Affine {
                intercept,
                coefficients,
            } => {
                let dim = intercept.len();
                if coefficients.len() != x.len() * dim {
                    return Err(shape_mismatch(
                        format!("{} predictors", coefficients.len() / dim.max(1)),
                        format!("{} predictors", x.len()),
                    ));
                }
                let mut out = intercept.clone();
                for (a, xa) in x.iter().enumerate() {
                    for (o, b) in out.iter_mut().zip(&coefficients[a * dim..(a + 1) * dim]) {
                        *o += xa * b;
                    }
                }
                space.point(out)
            }
        }
    }
}

/// A fitted ball-shaped prediction region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRegion {
    center: Center,
    radius: RadiusRule,
    alpha: f64,
    space: Space,
}

impl PredictionRegion {
    pub fn new(center: Center, radius: RadiusRule, alpha: f64, space: Space) -> Result<Self> {
        check_alpha(alpha)?;
        match &center {
            Center::Model(m) if m.space() != &space => {
                return Err(Error::InvalidParameter(
                    "region space differs from the model space".into(),
                ))
            }
            Center::Fixed(p) => space.validate(p)?,
            _ => {}
        }
        Ok(Self {
            center,
            radius,
            alpha,
            space,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn center(&self) -> &Center {
        &self.center
    }

    pub fn radius_rule(&self) -> &RadiusRule {
        &self.radius
    }

    pub fn center_at(&self, x: &[f64]) -> Result<MetricPoint> {
        self.center.at(x, &self.space)
    }

    pub fn radius_at(&self, x: &[f64]) -> f64 {
        self.radius.radius_at(x)
    }

    /// Closed-ball membership `d2(y, center(x)) ≤ radius(x)`.
    pub fn contains(&self, x: &[f64], y: &MetricPoint) -> Result<bool> {
        let radius = self.radius_at(x);
        if radius == f64::INFINITY {
            self.space.validate(y)?;
            return Ok(true);
        }
        let center = self.center_at(x)?;
        Ok(self.space.distance_d2(y, &center)? <= radius)
    }

    fn memberships(&self, x: &PredictorMatrix, y: &[MetricPoint]) -> Result<Vec<bool>> {
        if x.rows() != y.len() {
            return Err(shape_mismatch(
                format!("{} responses", x.rows()),
                format!("{} responses", y.len()),
            ));
        }
        if y.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        x.iter_rows().zip(y).map(|(row, yi)| self.contains(row, yi)).collect()
    }

    /// Fraction of evaluation pairs inside the region. The evaluation data
    /// must not have been used to fit the region.
    pub fn coverage(&self, x: &PredictorMatrix, y: &[MetricPoint]) -> Result<f64> {
        let inside = self.memberships(x, y)?;
        Ok(inside.iter().filter(|&&b| b).count() as f64 / inside.len() as f64)
    }
}

/// Monte Carlo estimate of the expected symmetric-difference mass between
/// two regions: fraction of pairs inside exactly one of them.
pub fn symmetric_difference_error(
    a: &PredictionRegion,
    b: &PredictionRegion,
    x: &PredictorMatrix,
    y: &[MetricPoint],
) -> Result<f64> {
    if a.space != b.space {
        return Err(Error::InvalidParameter("regions live in different spaces".into()));
    }
    let ia = a.memberships(x, y)?;
    let ib = b.memberships(x, y)?;
    Ok(ia.iter().zip(&ib).filter(|(p, q)| p != q).count() as f64 / ia.len() as f64)
}

/// Tolerance region without predictors: ball around the equal-weight
/// Fréchet mean whose radius is the conformal order statistic of the
/// `d2`-distances to that mean. The center is estimated on the same sample,
/// which makes the radius slightly optimistic; see
/// [`fit_unconditional_split`] for the held-out variant.
pub fn fit_unconditional(y: &[MetricPoint], alpha: f64, space: &Space, seed: u64) -> Result<PredictionRegion> {
    if y.is_empty() {
        return Err(Error::Empty("responses"));
    }
    if y.len() < 2 {
        return Err(Error::InvalidParameter("need at least two responses".into()));
    }
    unconditional_from(y, y, alpha, space, seed)
}

/// Held-out tolerance region: the center is estimated on a `center_fraction`
/// share of the sample and the radius on the rest.
pub fn fit_unconditional_split(
    y: &[MetricPoint],
    alpha: f64,
    space: &Space,
    center_fraction: f64,
    seed: u64,
) -> Result<PredictionRegion> {
    if !(center_fraction > 0.0 && center_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "center fraction must lie in (0, 1), got {center_fraction}"
        )));
    }
    let s = split(y.len(), &[center_fraction, 1.0 - center_fraction], seed)?;
    let center: Vec<MetricPoint> = s.train.iter().map(|&i| y[i].clone()).collect();
    let held: Vec<MetricPoint> = s.test.iter().map(|&i| y[i].clone()).collect();
    unconditional_from(&center, &held, alpha, space, rng::child_seed(seed, 1))
}

fn unconditional_from(
    center_sample: &[MetricPoint],
    radius_sample: &[MetricPoint],
    alpha: f64,
    space: &Space,
    seed: u64,
) -> Result<PredictionRegion> {
    check_alpha(alpha)?;
    let center = weighted_barycenter(center_sample, &vec![1.0; center_sample.len()], space)?;
    let distances = radius_sample
        .iter()
        .map(|yi| space.distance_d2(yi, &center))
        .collect::<Result<Vec<_>>>()?;
    let keys = rng::uniform_draws(distances.len(), &mut rng::seeded(seed));
    let rank = QuantileConvention::Conformal.rank(distances.len(), alpha);
    let radius = order_statistic(&distances, &keys, rank);
    PredictionRegion::new(Center::Fixed(center), RadiusRule::Constant { radius }, alpha, space.clone())
}
