//! Country-weight schemes, nowcast aggregation and forecast combination.

use crate::error::{Error, Result};
use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

/// Ridge term stabilizing the projection weights.
const PROJECTION_RIDGE: f64 = 1e-7;
const PROJECTION_TOL: f64 = 1e-10;
const PROJECTION_MAX_ITER: usize = 100_000;

/// The available aggregation schemes. `Fixed` is the equal-weight scheme
/// used in simulations; the others follow the four weighting rules for
/// combining unit nowcasts into an aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Fixed,
    W1,
    W2,
    W3,
    W4,
}

impl WeightScheme {
    pub fn label(&self) -> &'static str {
        match self {
            WeightScheme::Fixed => "fixed",
            WeightScheme::W1 => "w1",
            WeightScheme::W2 => "w2",
            WeightScheme::W3 => "w3",
            WeightScheme::W4 => "w4",
        }
    }

    pub fn parse(label: &str) -> Result<WeightScheme> {
        match label.to_ascii_lowercase().as_str() {
            "fixed" => Ok(WeightScheme::Fixed),
            "w1" => Ok(WeightScheme::W1),
            "w2" => Ok(WeightScheme::W2),
            "w3" => Ok(WeightScheme::W3),
            "w4" => Ok(WeightScheme::W4),
            other => Err(Error::Config(format!("unknown weight scheme `{other}`"))),
        }
    }
}

/// Per-period aggregation weights over the panel units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    /// Target period the weights apply to.
    pub period: usize,
    pub scheme: WeightScheme,
    pub weights: Vec<f64>,
}

impl WeightVector {
    fn checked(period: usize, scheme: WeightScheme, weights: Vec<f64>) -> WeightVector {
        debug_assert!(
            (weights.iter().sum::<f64>() - 1.0).abs() < 1e-10,
            "weights must sum to one"
        );
        WeightVector {
            period,
            scheme,
            weights,
        }
    }

    /// Equal weights `1/N`.
    pub fn fixed(period: usize, n: usize) -> WeightVector {
        WeightVector::checked(period, WeightScheme::Fixed, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Historical shares of absolute target growth: unit `i` receives
/// `sum_{s<t} |y_is| / sum_i sum_{s<t} |y_is|`.
pub fn weights_w1(period: usize, history: ArrayView2<f64>) -> Result<WeightVector> {
    if history.ncols() == 0 {
        return Err(Error::DegenerateWeights(
            "no history periods for the historical-share weights".into(),
        ));
    }
    let sums: Vec<f64> = history
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum())
        .collect();
    normalize_shares(period, WeightScheme::W1, sums)
}

/// Most recent shares of absolute target growth.
pub fn weights_w2(period: usize, last: &[f64]) -> Result<WeightVector> {
    let sums: Vec<f64> = last.iter().map(|v| v.abs()).collect();
    normalize_shares(period, WeightScheme::W2, sums)
}

/// Most recent shares of the level series; levels must be positive.
pub fn weights_w3(period: usize, levels_last: &[f64]) -> Result<WeightVector> {
    if levels_last.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::DegenerateWeights(
            "level weights require strictly positive levels".into(),
        ));
    }
    normalize_shares(period, WeightScheme::W3, levels_last.to_vec())
}

fn normalize_shares(
    period: usize,
    scheme: WeightScheme,
    mut shares: Vec<f64>,
) -> Result<WeightVector> {
    let total: f64 = shares.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateWeights(format!(
            "{} weights have a zero denominator",
            scheme.label()
        )));
    }
    for s in &mut shares {
        *s /= total;
    }
    Ok(WeightVector::checked(period, scheme, shares))
}

/// Exact Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            rho = j + 1;
            theta = candidate;
        }
    }
    debug_assert!(rho > 0);
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection weights: the simplex-constrained least-squares regression of
/// the aggregate target history on the unit target histories,
/// `min_w sum_s (y_agg_s - w . y_s)^2 + 1e-7 |w|^2` with `w >= 0`,
/// `sum w = 1`, solved by projected gradient from the equal-weight start.
pub fn weights_w4(
    period: usize,
    aggregate_history: &[f64],
    unit_histories: ArrayView2<f64>,
) -> Result<WeightVector> {
    let n = unit_histories.nrows();
    let s = unit_histories.ncols();
    if s == 0 {
        return Err(Error::DegenerateWeights(
            "no history periods for the projection weights".into(),
        ));
    }
    if aggregate_history.len() != s {
        return Err(Error::Dimension(format!(
            "aggregate history of {} periods against unit histories of {s}",
            aggregate_history.len()
        )));
    }
    if n == 1 {
        return Ok(WeightVector::checked(period, WeightScheme::W4, vec![1.0]));
    }

    // X is S x N: column i holds unit i's history.
    let x = unit_histories.t();
    let y = Array1::from(aggregate_history.to_vec());
    let mut w = Array1::from_elem(n, 1.0 / n as f64);

    // 1/L step from a power-iteration bound on 2 (sigma_max(X'X) + ridge).
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut sigma = 0.0;
    for _ in 0..50 {
        let u = x.t().dot(&x.dot(&v));
        sigma = u.dot(&u).sqrt();
        if sigma == 0.0 {
            break;
        }
        v = u.mapv(|a| a / sigma);
    }
    let lipschitz = 2.0 * (sigma * 1.05 + PROJECTION_RIDGE).max(PROJECTION_RIDGE);
    let step = 1.0 / lipschitz;

    for _ in 0..PROJECTION_MAX_ITER {
        let residual = x.dot(&w) - &y;
        let grad =
            x.t().dot(&residual).mapv(|g| 2.0 * g) + w.mapv(|wi| 2.0 * PROJECTION_RIDGE * wi);
        let next = Array1::from(project_simplex(
            (&w - &grad.mapv(|g| g * step)).as_slice().unwrap(),
        ));
        let movement = next
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        w = next;
        if movement < PROJECTION_TOL {
            let weights = w.iter().map(|&x| x.max(0.0)).collect();
            return Ok(WeightVector::checked(period, WeightScheme::W4, weights));
        }
    }
    Err(Error::Convergence {
        iterations: PROJECTION_MAX_ITER,
        residual: f64::NAN,
        last_iterate: w.to_vec(),
    })
}

/// Objective of the projection-weight problem, used by the descent check.
pub fn projection_objective(
    weights: &[f64],
    aggregate_history: &[f64],
    unit_histories: ArrayView2<f64>,
) -> f64 {
    let s = unit_histories.ncols();
    let mut loss = 0.0;
    for t in 0..s {
        let mut pred = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            pred += w * unit_histories[(i, t)];
        }
        let e = aggregate_history[t] - pred;
        loss += e * e;
    }
    loss + PROJECTION_RIDGE * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Weighted sum of unit nowcasts.
pub fn aggregate_nowcast(weights: &WeightVector, nowcasts: &[f64]) -> Result<f64> {
    if weights.len() != nowcasts.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} nowcasts",
            weights.len(),
            nowcasts.len()
        )));
    }
    Ok(weights
        .weights
        .iter()
        .zip(nowcasts)
        .map(|(w, y)| w * y)
        .sum())
}

/// How member nowcasts combine into one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinationScheme {
    #[default]
    EqualWeight,
    InverseMse,
}

/// Equal-weight combination of member nowcasts, one value per period.
pub fn combine_forecasts(members_per_period: &[Vec<f64>]) -> Result<Vec<f64>> {
    members_per_period
        .iter()
        .map(|members| {
            if members.is_empty() {
                return Err(Error::Config("no member nowcasts to combine".into()));
            }
            Ok(members.iter().sum::<f64>() / members.len() as f64)
        })
        .collect()
}

/// Combination weights proportional to inverse member MSEs over a training
/// window.
pub fn inverse_mse_weights(member_mse: &[f64]) -> Result<Vec<f64>> {
    if member_mse.is_empty() {
        return Err(Error::Config("no members".into()));
    }
    if member_mse.iter().any(|&m| m.is_nan() || m <= 0.0) {
        return Err(Error::Numeric(
            "inverse-MSE weights need strictly positive member MSEs".into(),
        ));
    }
    let inv: Vec<f64> = member_mse.iter().map(|m| 1.0 / m).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|v| v / total).collect())
}

/// Weighted combination with fixed member weights.
pub fn combine_weighted(members_per_period: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    members_per_period
        .iter()
        .map(|members| {
            if members.len() != weights.len() {
                return Err(Error::Dimension(format!(
                    "{} members for {} combination weights",
                    members.len(),
                    weights.len()
                )));
            }
            Ok(members.iter().zip(weights).map(|(m, w)| m * w).sum())
        })
        .collect()
}
