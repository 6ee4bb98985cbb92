//! The estimator families and nowcast production.
//!
//! Five families are supported: aggregate-on-aggregate (A),
//! aggregate-on-components (AC), individual time series (TS), pooled panel
//! (P) and the panel with unit-specific autoregressive blocks (HetAR).

use crate::aggregation::WeightVector;
use crate::error::{Error, Result};
use crate::midas::{
    ar_row, build_design, build_weighted_components_design, covariate_row, weighted_components_row,
    ArLayout, CovariateDictionaries, DesignMatrix,
};
use crate::panel::{Horizon, NowcastClock, PanelDataset};
use crate::sglasso::sg_lasso_fit;
use crate::sglasso::{panel_cv, CvConfig, GroupStructure, PenaltySpec, SgLassoFit, SolveOptions};
use serde::{Deserialize, Serialize};

/// Estimator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Aggregate target on aggregate covariates.
    A,
    /// Aggregate target on all units' covariates.
    Ac,
    /// Independent per-unit time-series regressions.
    Ts,
    /// Pooled panel: shared coefficients, pooled AR lags.
    P,
    /// Pooled covariates with unit-specific AR blocks.
    HetAr,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::A => "a",
            Family::Ac => "ac",
            Family::Ts => "ts",
            Family::P => "p",
            Family::HetAr => "hetar",
        }
    }

    pub fn parse(label: &str) -> Result<Family> {
        match label.to_ascii_lowercase().as_str() {
            "a" => Ok(Family::A),
            "ac" => Ok(Family::Ac),
            "ts" => Ok(Family::Ts),
            "p" | "pooled" => Ok(Family::P),
            "hetar" => Ok(Family::HetAr),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }

    /// Families whose fit consumes aggregation weights.
    pub fn needs_weights(&self) -> bool {
        matches!(self, Family::A | Family::Ac)
    }
}

/// How the penalty is chosen.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltySelection {
    Fixed(PenaltySpec),
    Cv(CvConfig),
}

/// Full model specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    /// Number of autoregressive lags of the target.
    pub ar_order: usize,
    pub penalty: PenaltySelection,
}

impl ModelSpec {
    pub fn new(family: Family, ar_order: usize, penalty: PenaltySelection) -> ModelSpec {
        ModelSpec {
            family,
            ar_order,
            penalty,
        }
    }
}

/// One fitted regression together with its group structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitFit {
    /// Unit index for TS fits; 0 for shared fits.
    pub unit: usize,
    pub fit: SgLassoFit,
}

/// A fitted family ready to produce nowcasts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitBundle {
    pub family: Family,
    pub ar_order: usize,
    /// Clock of estimation: training rows use targets strictly before its
    /// target period.
    pub clock: NowcastClock,
    pub fits: Vec<UnitFit>,
    pub groups: GroupStructure,
    pub group_names: Vec<String>,
    /// Aggregation weights frozen at estimation time (A and AC only).
    pub weights: Option<Vec<f64>>,
    /// Units that failed to fit, with the error text (TS only).
    pub warnings: Vec<(String, String)>,
}

impl FitBundle {
    /// Group names with at least one active coefficient, per fitted unit.
    pub fn active_group_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for unit_fit in &self.fits {
            for gi in unit_fit.fit.active_groups(&self.groups) {
                let name = &self.group_names[gi];
                if !names.contains(name) {
                    names.push(name.clone());
                }
            }
        }
        names
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<FitBundle> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Per-unit predictions and the optional weighted aggregate at one clock.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastSet {
    pub target_period: usize,
    pub horizon: Option<Horizon>,
    /// `(unit id, prediction)`; empty for the direct aggregate families.
    pub per_unit: Vec<(String, f64)>,
    pub aggregate: Option<f64>,
}

/// Training schedule: one clock per estimation period, each replaying the
/// estimation clock's cutoff position, ending at the period before the
/// estimation target.
fn training_schedule(
    ds: &PanelDataset,
    clock: &NowcastClock,
    q: usize,
) -> Result<Vec<NowcastClock>> {
    let dicts = CovariateDictionaries::resolve(ds)?;
    let gap = clock.target_period - clock.cutoff_period;
    let end = clock.target_period; // exclusive
    let mut schedule = Vec::new();
    let mut started = false;
    for s in gap..end {
        let c = clock.shifted_to(s);
        let feasible = ar_row(ds, 0, &c, q).is_ok()
            && (0..ds.covariates.len())
                .all(|k| ds.extract_window(0, k, &c, dicts.k_max[k]).is_ok());
        if feasible {
            started = true;
            schedule.push(c);
        } else if started {
            return Err(Error::InsufficientHistory(format!(
                "window feasibility is not contiguous at period {s}"
            )));
        }
    }
    if schedule.is_empty() {
        return Err(Error::InsufficientHistory(format!(
            "no feasible training periods before period {}",
            clock.target_period
        )));
    }
    Ok(schedule)
}

fn solve_design(
    design: &DesignMatrix,
    penalty: &PenaltySelection,
    opts: &SolveOptions,
) -> Result<SgLassoFit> {
    match penalty {
        PenaltySelection::Fixed(spec) => sg_lasso_fit(
            design.x.view(),
            design.y.view(),
            &design.groups,
            *spec,
            None,
            opts,
        ),
        PenaltySelection::Cv(cfg) => {
            let result = panel_cv(
                design.x.view(),
                design.y.view(),
                &design.row_periods(),
                &design.groups,
                cfg,
                opts,
            )?;
            Ok(result.fit)
        }
    }
}

/// Pooled panel fit: one shared coefficient vector, AR lags pooled across
/// units with one group per lag order.
pub fn fit_pooled(
    ds: &PanelDataset,
    spec: &ModelSpec,
    clock: &NowcastClock,
    opts: &SolveOptions,
) -> Result<FitBundle> {
    if ds.n_units() < 2 {
        return Err(Error::Config(
            "the pooled family requires at least 2 units".into(),
        ));
    }
    let schedule = training_schedule(ds, clock, spec.ar_order)?;
    let units: Vec<usize> = (0..ds.n_units()).collect();
    let design = build_design(ds, &units, &schedule, spec.ar_order, ArLayout::Pooled)?;
    let fit = solve_design(&design, &spec.penalty, opts)?;
    Ok(FitBundle {
        family: Family::P,
        ar_order: spec.ar_order,
        clock: *clock,
        fits: vec![UnitFit { unit: 0, fit }],
        groups: design.groups,
        group_names: design.group_names,
        weights: None,
        warnings: Vec::new(),
    })
}

/// Panel fit with unit-specific AR blocks and shared covariate slopes.
pub fn fit_hetar(
    ds: &PanelDataset,
    spec: &ModelSpec,
    clock: &NowcastClock,
    opts: &SolveOptions,
) -> Result<FitBundle> {
    if ds.n_units() < 2 {
        return Err(Error::Config(
            "the heterogeneous-AR family requires at least 2 units".into(),
        ));
    }
    let schedule = training_schedule(ds, clock, spec.ar_order)?;
    let units: Vec<usize> = (0..ds.n_units()).collect();
    let design = build_design(ds, &units, &schedule, spec.ar_order, ArLayout::PerUnit)?;
    let fit = solve_design(&design, &spec.penalty, opts)?;
    Ok(FitBundle {
        family: Family::HetAr,
        ar_order: spec.ar_order,
        clock: *clock,
        fits: vec![UnitFit { unit: 0, fit }],
        groups: design.groups,
        group_names: design.group_names,
        weights: None,
        warnings: Vec::new(),
    })
}

/// Independent time-series fits per unit. Units whose fit fails are
/// excluded with a warning record instead of aborting the panel run.
pub fn fit_ts(
    ds: &PanelDataset,
    spec: &ModelSpec,
    clock: &NowcastClock,
    opts: &SolveOptions,
) -> Result<FitBundle> {
    let schedule = training_schedule(ds, clock, spec.ar_order)?;
    let mut fits = Vec::new();
    let mut warnings = Vec::new();
    let mut layout: Option<(GroupStructure, Vec<String>)> = None;
    for unit in 0..ds.n_units() {
        let design = build_design(ds, &[unit], &schedule, spec.ar_order, ArLayout::Pooled)?;
        if layout.is_none() {
            layout = Some((design.groups.clone(), design.group_names.clone()));
        }
        match solve_design(&design, &spec.penalty, opts) {
            Ok(fit) => fits.push(UnitFit { unit, fit }),
            Err(err) => warnings.push((ds.unit_ids[unit].clone(), err.to_string())),
        }
    }
    if fits.is_empty() {
        return Err(Error::Numeric(format!(
            "every unit failed to fit; first failure: {}",
            warnings.first().map(|(_, e)| e.as_str()).unwrap_or("none")
        )));
    }
    let (groups, group_names) = layout.expect("at least one design was built");
    Ok(FitBundle {
        family: Family::Ts,
        ar_order: spec.ar_order,
        clock: *clock,
        fits,
        groups,
        group_names,
        weights: None,
        warnings,
    })
}

/// Aggregate-on-aggregate: collapse the panel with the given weights, then
/// run a single time-series fit on the aggregate series.
pub fn fit_agg_on_agg(
    ds: &PanelDataset,
    spec: &ModelSpec,
    clock: &NowcastClock,
    weights: &WeightVector,
    opts: &SolveOptions,
) -> Result<FitBundle> {
    let aggregated = ds.aggregate_series(&weights.weights)?;
    let schedule = training_schedule(&aggregated, clock, spec.ar_order)?;
    let design = build_design(
        &aggregated,
        &[0],
        &schedule,
        spec.ar_order,
        ArLayout::Pooled,
    )?;
    let fit = solve_design(&design, &spec.penalty, opts)?;
    Ok(FitBundle {
        family: Family::A,
        ar_order: spec.ar_order,
        clock: *clock,
        fits: vec![UnitFit { unit: 0, fit }],
        groups: design.groups,
        group_names: design.group_names,
        weights: Some(weights.weights.clone()),
        warnings: Vec::new(),
    })
}

/// Aggregate-on-components: the weighted aggregate target regressed on all
/// units' weight-scaled covariate blocks.
pub fn fit_agg_on_components(
    ds: &PanelDataset,
    spec: &ModelSpec,
    clock: &NowcastClock,
    weights: &WeightVector,
    opts: &SolveOptions,
) -> Result<FitBundle> {
    let schedule = training_schedule(ds, clock, spec.ar_order)?;
    let design = build_weighted_components_design(ds, &schedule, spec.ar_order, &weights.weights)?;
    let fit = solve_design(&design, &spec.penalty, opts)?;
    Ok(FitBundle {
        family: Family::Ac,
        ar_order: spec.ar_order,
        clock: *clock,
        fits: vec![UnitFit { unit: 0, fit }],
        groups: design.groups,
        group_names: design.group_names,
        weights: Some(weights.weights.clone()),
        warnings: Vec::new(),
    })
}

/// Fit any family. `weights` are required for A and AC and are otherwise
/// ignored at fit time.
pub fn fit_model(
    ds: &PanelDataset,
    spec: &ModelSpec,
    clock: &NowcastClock,
    weights: Option<&WeightVector>,
    opts: &SolveOptions,
) -> Result<FitBundle> {
    match spec.family {
        Family::P => fit_pooled(ds, spec, clock, opts),
        Family::HetAr => fit_hetar(ds, spec, clock, opts),
        Family::Ts => fit_ts(ds, spec, clock, opts),
        Family::A => {
            let w = weights.ok_or_else(|| {
                Error::Config("the aggregate-on-aggregate family needs weights".into())
            })?;
            fit_agg_on_agg(ds, spec, clock, w, opts)
        }
        Family::Ac => {
            let w = weights.ok_or_else(|| {
                Error::Config("the aggregate-on-components family needs weights".into())
            })?;
            fit_agg_on_components(ds, spec, clock, w, opts)
        }
    }
}

/// Prediction row of one unit under the bundle's column layout.
fn unit_prediction_row(
    ds: &PanelDataset,
    dicts: &CovariateDictionaries,
    bundle: &FitBundle,
    unit: usize,
    clock: &NowcastClock,
) -> Result<Vec<f64>> {
    let q = bundle.ar_order;
    let lags = ar_row(ds, unit, clock, q)?;
    let cov = covariate_row(ds, dicts, unit, clock)?;
    let row = match bundle.family {
        Family::P | Family::Ts | Family::A => {
            let mut row = lags;
            row.extend(cov);
            row
        }
        Family::HetAr => {
            let n = ds.n_units();
            let mut row = vec![0.0; n * q];
            row[unit * q..(unit + 1) * q].copy_from_slice(&lags);
            row.extend(cov);
            row
        }
        Family::Ac => unreachable!("AC predictions assemble the full component row"),
    };
    Ok(row)
}

/// Produce nowcasts at a clock from a fitted bundle. For the per-unit
/// families the aggregate is the weighted sum of unit predictions when
/// weights are supplied; A and AC always produce the aggregate directly.
pub fn nowcast(
    bundle: &FitBundle,
    ds: &PanelDataset,
    clock: &NowcastClock,
    weights: Option<&WeightVector>,
    horizon: Option<Horizon>,
) -> Result<NowcastSet> {
    let dicts = CovariateDictionaries::resolve(ds)?;
    match bundle.family {
        Family::A => {
            let w = bundle
                .weights
                .as_ref()
                .ok_or_else(|| Error::Config("A bundle without weights".into()))?;
            let aggregated = ds.aggregate_series(w)?;
            let row = unit_prediction_row(&aggregated, &dicts, bundle, 0, clock)?;
            let pred = bundle.fits[0].fit.predict_row(&row);
            Ok(NowcastSet {
                target_period: clock.target_period,
                horizon,
                per_unit: Vec::new(),
                aggregate: Some(pred),
            })
        }
        Family::Ac => {
            let w = bundle
                .weights
                .as_ref()
                .ok_or_else(|| Error::Config("AC bundle without weights".into()))?;
            let row = weighted_components_row(ds, &dicts, clock, bundle.ar_order, w)?;
            let pred = bundle.fits[0].fit.predict_row(&row);
            Ok(NowcastSet {
                target_period: clock.target_period,
                horizon,
                per_unit: Vec::new(),
                aggregate: Some(pred),
            })
        }
        Family::P | Family::HetAr => {
            let fit = &bundle.fits[0].fit;
            let mut per_unit = Vec::with_capacity(ds.n_units());
            for unit in 0..ds.n_units() {
                let row = unit_prediction_row(ds, &dicts, bundle, unit, clock)?;
                per_unit.push((ds.unit_ids[unit].clone(), fit.predict_row(&row)));
            }
            let aggregate = aggregate_from_units(&per_unit, weights)?;
            Ok(NowcastSet {
                target_period: clock.target_period,
                horizon,
                per_unit,
                aggregate,
            })
        }
        Family::Ts => {
            let mut per_unit = Vec::with_capacity(bundle.fits.len());
            for unit_fit in &bundle.fits {
                let row = unit_prediction_row(ds, &dicts, bundle, unit_fit.unit, clock)?;
                per_unit.push((
                    ds.unit_ids[unit_fit.unit].clone(),
                    unit_fit.fit.predict_row(&row),
                ));
            }
            let aggregate = match weights {
                Some(w) if per_unit.len() == ds.n_units() => {
                    Some(crate::aggregation::aggregate_nowcast(
                        w,
                        &per_unit.iter().map(|(_, p)| *p).collect::<Vec<f64>>(),
                    )?)
                }
                Some(w) => {
                    // Some units were dropped: renormalize their weights
                    // over the fitted subset.
                    let fitted: Vec<usize> = bundle.fits.iter().map(|f| f.unit).collect();
                    let total: f64 = fitted.iter().map(|&u| w.weights[u]).sum();
                    if total.abs() < 1e-300 {
                        None
                    } else {
                        Some(
                            fitted
                                .iter()
                                .zip(&per_unit)
                                .map(|(&u, (_, p))| w.weights[u] / total * p)
                                .sum(),
                        )
                    }
                }
                None => None,
            };
            Ok(NowcastSet {
                target_period: clock.target_period,
                horizon,
                per_unit,
                aggregate,
            })
        }
    }
}

fn aggregate_from_units(
    per_unit: &[(String, f64)],
    weights: Option<&WeightVector>,
) -> Result<Option<f64>> {
    match weights {
        Some(w) => {
            let preds: Vec<f64> = per_unit.iter().map(|(_, p)| *p).collect();
            Ok(Some(crate::aggregation::aggregate_nowcast(w, &preds)?))
        }
        None => Ok(None),
    }
}
