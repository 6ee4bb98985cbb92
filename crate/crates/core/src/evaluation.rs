//! Rolling real-time evaluation on expanding windows: per-period refits
//! with re-selected tuning, horizon-specific nowcasts, RMSE tables and
//! benchmark ratios.

use crate::aggregation::{
    combine_forecasts, weights_w1, weights_w2, weights_w3, weights_w4, CombinationScheme,
    WeightScheme, WeightVector,
};
use crate::error::{Error, Result};
use crate::models::{fit_model, nowcast, Family, ModelSpec, PenaltySelection};
use crate::panel::{Horizon, PanelDataset};
use crate::sglasso::SolveOptions;
use ndarray::s;
use serde::{Deserialize, Serialize};

/// Out-of-sample range evaluated with an expanding training window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvaluationWindow {
    pub first_oos: usize,
    pub last_oos: usize,
}

impl EvaluationWindow {
    pub fn validate(&self, n_periods: usize) -> Result<()> {
        if self.first_oos > self.last_oos {
            return Err(Error::Config(
                "evaluation window start is after its end".into(),
            ));
        }
        if self.last_oos >= n_periods {
            return Err(Error::Config(format!(
                "evaluation window ends at period {} of a {n_periods}-period sample",
                self.last_oos
            )));
        }
        Ok(())
    }
}

/// One evaluated model: a family aggregated under a weight scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemberSpec {
    pub family: Family,
    pub scheme: WeightScheme,
}

impl MemberSpec {
    pub fn label(&self) -> String {
        format!("{}/{}", self.family.label(), self.scheme.label())
    }
}

/// How the realized aggregate outcome is formed from unit outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizedAggregate {
    /// Equal-weight mean of the unit targets.
    #[default]
    Mean,
    /// Level-share weighted mean (requires a level series).
    LevelShares,
}

/// Evaluation controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub members: Vec<MemberSpec>,
    pub horizons: Vec<Horizon>,
    pub window: EvaluationWindow,
    pub ar_order: usize,
    pub penalty: PenaltySelection,
    /// Benchmark row for the relative-RMSE column.
    pub benchmark: MemberSpec,
    /// `(tag, last period index)` subsample splits; the full window is
    /// always reported under the tag `full`.
    #[serde(default)]
    pub subsamples: Vec<(String, usize)>,
    #[serde(default)]
    pub combination: Option<CombinationScheme>,
    #[serde(default)]
    pub realized_aggregate: RealizedAggregate,
}

/// One nowcast produced during the rolling evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastRecord {
    pub member: String,
    pub horizon: Horizon,
    pub period: usize,
    pub prediction: f64,
    pub realized: f64,
}

/// One row of the accuracy table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmseRow {
    pub model: String,
    pub scheme: String,
    pub horizon: Horizon,
    pub sample_tag: String,
    pub rmse: f64,
    pub rmse_ratio_vs_benchmark: f64,
}

/// Accuracy table plus the underlying nowcast records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmseReport {
    pub rows: Vec<RmseRow>,
    pub nowcasts: Vec<NowcastRecord>,
}

/// Scheme weights for target period `t` using information through `t-1`.
pub fn scheme_weights(
    ds: &PanelDataset,
    scheme: WeightScheme,
    period: usize,
    realized: RealizedAggregate,
) -> Result<WeightVector> {
    let n = ds.n_units();
    if period == 0 {
        return Err(Error::InsufficientHistory(
            "weights need at least one past period".into(),
        ));
    }
    match scheme {
        WeightScheme::Fixed => Ok(WeightVector::fixed(period, n)),
        WeightScheme::W1 => {
            let history = ds.targets.slice(s![.., ..period]);
            weights_w1(period, history)
        }
        WeightScheme::W2 => {
            let last: Vec<f64> = (0..n).map(|i| ds.targets[(i, period - 1)]).collect();
            weights_w2(period, &last)
        }
        WeightScheme::W3 => {
            let levels = ds.levels.as_ref().ok_or_else(|| {
                Error::Config("the level-share scheme requires a level series".into())
            })?;
            let last: Vec<f64> = (0..n).map(|i| levels[(i, period - 1)]).collect();
            weights_w3(period, &last)
        }
        WeightScheme::W4 => {
            let history = ds.targets.slice(s![.., ..period]);
            let aggregate: Vec<f64> = (0..period)
                .map(|t| realized_aggregate_at(ds, t, realized))
                .collect::<Result<_>>()?;
            weights_w4(period, &aggregate, history)
        }
    }
}

/// Realized aggregate outcome of period `t`.
pub fn realized_aggregate_at(
    ds: &PanelDataset,
    period: usize,
    convention: RealizedAggregate,
) -> Result<f64> {
    let n = ds.n_units();
    match convention {
        RealizedAggregate::Mean => {
            Ok((0..n).map(|i| ds.targets[(i, period)]).sum::<f64>() / n as f64)
        }
        RealizedAggregate::LevelShares => {
            let levels = ds.levels.as_ref().ok_or_else(|| {
                Error::Config("level-share aggregation requires a level series".into())
            })?;
            if period == 0 {
                return Err(Error::InsufficientHistory(
                    "level shares need a prior period".into(),
                ));
            }
            let last: Vec<f64> = (0..n).map(|i| levels[(i, period - 1)]).collect();
            let w = weights_w3(period, &last)?;
            Ok((0..n).map(|i| w.weights[i] * ds.targets[(i, period)]).sum())
        }
    }
}

fn rmse(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Evaluate every member over the window: for each out-of-sample period
/// and horizon, re-select tuning on data through the prior period, refit,
/// nowcast and aggregate under the member's scheme.
pub fn rolling_evaluate(ds: &PanelDataset, cfg: &EvaluationConfig) -> Result<RmseReport> {
    cfg.window.validate(ds.n_periods())?;
    if cfg.members.is_empty() {
        return Err(Error::Config("no members to evaluate".into()));
    }
    if cfg.horizons.is_empty() {
        return Err(Error::Config("no horizons to evaluate".into()));
    }
    if !cfg.members.contains(&cfg.benchmark) {
        return Err(Error::Config(format!(
            "benchmark {} is not among the members",
            cfg.benchmark.label()
        )));
    }
    let opts = SolveOptions::default();
    let mut records: Vec<NowcastRecord> = Vec::new();

    for period in cfg.window.first_oos..=cfg.window.last_oos {
        // Everything after the cutoff is invisible to the fit: targets,
        // levels and covariate steps beyond the clock never enter the
        // design or the weights.
        let realized = realized_aggregate_at(ds, period, cfg.realized_aggregate)?;
        for &horizon in &cfg.horizons {
            let clock = horizon.clock(period);
            for member in &cfg.members {
                let weights = scheme_weights(ds, member.scheme, period, cfg.realized_aggregate)?;
                let spec = ModelSpec::new(member.family, cfg.ar_order, cfg.penalty.clone());
                let bundle = fit_model(ds, &spec, &clock, Some(&weights), &opts)?;
                let set = nowcast(&bundle, ds, &clock, Some(&weights), Some(horizon))?;
                let prediction = set.aggregate.ok_or_else(|| {
                    Error::Numeric(format!(
                        "member {} produced no aggregate nowcast",
                        member.label()
                    ))
                })?;
                records.push(NowcastRecord {
                    member: member.label(),
                    horizon,
                    period,
                    prediction,
                    realized,
                });
            }
            if cfg.combination.is_some() && cfg.members.len() >= 2 {
                let members: Vec<f64> = cfg
                    .members
                    .iter()
                    .map(|m| {
                        records
                            .iter()
                            .rev()
                            .find(|r| {
                                r.member == m.label() && r.horizon == horizon && r.period == period
                            })
                            .map(|r| r.prediction)
                            .expect("member nowcast just recorded")
                    })
                    .collect();
                let combined = combine_forecasts(&[members])?[0];
                records.push(NowcastRecord {
                    member: "combination".into(),
                    horizon,
                    period,
                    prediction: combined,
                    realized,
                });
            }
        }
    }

    // Sample tags: the full window plus configured date-cutoff splits.
    let mut tags: Vec<(String, usize)> = vec![("full".to_string(), cfg.window.last_oos)];
    tags.extend(cfg.subsamples.iter().cloned());

    let mut rows = Vec::new();
    for (tag, last) in &tags {
        for &horizon in &cfg.horizons {
            let errors_of = |label: &str| -> Vec<f64> {
                records
                    .iter()
                    .filter(|r| r.member == label && r.horizon == horizon && r.period <= *last)
                    .map(|r| r.prediction - r.realized)
                    .collect()
            };
            let benchmark_errors = errors_of(&cfg.benchmark.label());
            if benchmark_errors.is_empty() {
                return Err(Error::Config(format!(
                    "subsample `{tag}` contains no evaluated periods"
                )));
            }
            let benchmark_rmse = rmse(&benchmark_errors);

            let mut member_rmses = Vec::new();
            for member in &cfg.members {
                let errs = errors_of(&member.label());
                let value = rmse(&errs);
                member_rmses.push(value);
                rows.push(RmseRow {
                    model: member.family.label().to_string(),
                    scheme: member.scheme.label().to_string(),
                    horizon,
                    sample_tag: tag.clone(),
                    rmse: value,
                    rmse_ratio_vs_benchmark: value / benchmark_rmse,
                });
            }
            if cfg.combination.is_some() && cfg.members.len() >= 2 {
                let errs = errors_of("combination");
                let value = rmse(&errs);
                // Equal-weight combination can never beat the member mean
                // in the quadratic norm; surface any violation loudly.
                let mean_member = member_rmses.iter().sum::<f64>() / member_rmses.len() as f64;
                if value > mean_member + 1e-12 {
                    return Err(Error::Numeric(format!(
                        "combination RMSE {value} exceeds the member mean {mean_member}"
                    )));
                }
                rows.push(RmseRow {
                    model: "combination".to_string(),
                    scheme: "equal".to_string(),
                    horizon,
                    sample_tag: tag.clone(),
                    rmse: value,
                    rmse_ratio_vs_benchmark: value / benchmark_rmse,
                });
            }
        }
    }

    Ok(RmseReport {
        rows,
        nowcasts: records,
    })
}
