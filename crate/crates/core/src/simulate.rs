//! Heterogeneous-coefficient panel data generation and the Monte Carlo
//! comparison of the four estimator families.
//!
//! The generated model is
//! `y_it = alpha_i + gamma y_{i,t-1} + beta_i x_{it,1} + eps_it`
//! with only the first of `p` regressors carrying signal. All regressors
//! share the outcome frequency, so the fits run as pure LASSO.

use crate::aggregation::WeightVector;
use crate::error::{Error, Result};
use crate::models::{fit_model, nowcast, Family, FitBundle, ModelSpec, PenaltySelection};
use crate::panel::{Covariate, NowcastClock, PanelDataset};
use crate::period::{consecutive_index, Freq, Period};
use crate::sglasso::{CvConfig, SolveOptions};
use ndarray::{Array2, Array3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Innovation family for regressors, coefficients and errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationDesign {
    Gaussian,
    StudentT5,
}

impl InnovationDesign {
    pub fn label(&self) -> &'static str {
        match self {
            InnovationDesign::Gaussian => "gaussian",
            InnovationDesign::StudentT5 => "student_t5",
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            InnovationDesign::Gaussian => StandardNormal.sample(rng),
            InnovationDesign::StudentT5 => StudentT::new(5.0).expect("valid dof").sample(rng),
        }
    }
}

/// Data-generating-process and experiment controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_units: usize,
    pub t_periods: usize,
    pub n_regressors: usize,
    /// Heterogeneity level of intercepts and slopes.
    pub sigma: f64,
    pub design: InnovationDesign,
    #[serde(default = "defaults::gamma_ar")]
    pub gamma_ar: f64,
    #[serde(default)]
    pub alpha0: f64,
    #[serde(default = "defaults::beta0")]
    pub beta0: f64,
    #[serde(default = "defaults::rho_alpha_x")]
    pub rho_alpha_x: f64,
    #[serde(default = "defaults::rho_beta_x")]
    pub rho_beta_x: f64,
    /// Error scale; unit scale unless overridden for sensitivity runs.
    #[serde(default = "defaults::sigma_eps")]
    pub sigma_eps: f64,
    /// Draw per-unit error scales `sigma_eps * sqrt((1 + chi^2_1) / 2)`
    /// like the regressor scales, instead of a common scale.
    #[serde(default = "defaults::heteroskedastic_errors")]
    pub heteroskedastic_errors: bool,
    #[serde(default = "defaults::burn_in")]
    pub burn_in: usize,
    #[serde(default = "defaults::holdout")]
    pub holdout: usize,
    #[serde(default = "defaults::replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Penalty path length inside the Monte Carlo cross-validation.
    #[serde(default = "defaults::n_lambda")]
    pub n_lambda: usize,
    /// Mixing grid inside the Monte Carlo (pure LASSO by default).
    #[serde(default = "defaults::gamma_grid")]
    pub gamma_grid: Vec<f64>,
}

mod defaults {
    pub fn gamma_ar() -> f64 {
        0.688
    }
    pub fn beta0() -> f64 {
        0.5
    }
    pub fn rho_alpha_x() -> f64 {
        0.1
    }
    pub fn rho_beta_x() -> f64 {
        0.5
    }
    pub fn sigma_eps() -> f64 {
        1.0
    }
    pub fn heteroskedastic_errors() -> bool {
        false
    }
    pub fn burn_in() -> usize {
        100
    }
    pub fn holdout() -> usize {
        1
    }
    pub fn replications() -> usize {
        1000
    }
    pub fn n_lambda() -> usize {
        20
    }
    pub fn gamma_grid() -> Vec<f64> {
        vec![1.0]
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_units: 10,
            t_periods: 35,
            n_regressors: 50,
            sigma: 0.0,
            design: InnovationDesign::Gaussian,
            gamma_ar: defaults::gamma_ar(),
            alpha0: 0.0,
            beta0: defaults::beta0(),
            rho_alpha_x: defaults::rho_alpha_x(),
            rho_beta_x: defaults::rho_beta_x(),
            sigma_eps: defaults::sigma_eps(),
            heteroskedastic_errors: defaults::heteroskedastic_errors(),
            burn_in: defaults::burn_in(),
            holdout: defaults::holdout(),
            replications: defaults::replications(),
            master_seed: 0,
            n_lambda: defaults::n_lambda(),
            gamma_grid: defaults::gamma_grid(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.t_periods == 0 || self.n_regressors == 0 {
            return Err(Error::Config("empty simulation dimensions".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::Config("sigma must be >= 0".into()));
        }
        let phi = self.rho_alpha_x * self.sigma;
        let pi = self.rho_beta_x * self.sigma;
        if self.sigma * self.sigma - phi * phi < 0.0 || self.sigma * self.sigma - pi * pi < 0.0 {
            return Err(Error::Config(
                "coefficient correlations leave a negative residual variance".into(),
            ));
        }
        if self.holdout == 0 {
            return Err(Error::Config("holdout must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        Ok(())
    }

    /// Stored panel columns: one pre-sample lag anchor, `t_periods`
    /// estimation periods and the holdout tail.
    fn kept_periods(&self) -> usize {
        1 + self.t_periods + self.holdout
    }

    /// Period index of the one-step-ahead holdout target.
    pub fn holdout_target_index(&self) -> usize {
        1 + self.t_periods
    }

    fn rng_for(&self, replication: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replication as u64 + 1);
        rng
    }
}

/// Per-regressor AR(1) parameters.
#[derive(Debug, Clone)]
pub struct RegressorParams {
    pub mu: Array2<f64>,
    pub rho: Array2<f64>,
    pub sigma: Array2<f64>,
}

/// One simulated panel with its generating coefficients.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    /// `N x kept` outcomes; column 0 is the pre-sample lag anchor.
    pub y: Array2<f64>,
    /// `N x kept x p` regressors.
    pub x: Array3<f64>,
    /// Realized error terms aligned with `y`.
    pub eps: Array2<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: f64,
    pub t_periods: usize,
    pub holdout: usize,
}

/// Draw the regressor array over `periods` columns plus parameters:
/// stationary AR(1) deviations around heavy- or light-tailed locations.
pub fn simulate_regressors(
    cfg: &SimulationConfig,
    periods: usize,
    rng: &mut ChaCha8Rng,
) -> (Array3<f64>, RegressorParams) {
    let (n, p) = (cfg.n_units, cfg.n_regressors);
    let mut x = Array3::zeros((n, periods, p));
    let mut mu = Array2::zeros((n, p));
    let mut rho = Array2::zeros((n, p));
    let mut sigma = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            let rho_ij: f64 = rng.gen_range(0.0..0.95);
            let chi: f64 = StandardNormal.sample(rng);
            let sigma_ij = ((1.0 + chi * chi) / 2.0).sqrt();
            let z = cfg.design.draw(rng);
            let mu_ij = (z * z - 1.0) / std::f64::consts::SQRT_2;
            mu[(i, j)] = mu_ij;
            rho[(i, j)] = rho_ij;
            sigma[(i, j)] = sigma_ij;

            // Start from a stationary-variance draw.
            let mut xi = sigma_ij * cfg.design.draw(rng);
            let innovation_scale = sigma_ij * (1.0 - rho_ij * rho_ij).sqrt();
            for t in 0..periods {
                x[(i, t, j)] = mu_ij + xi;
                xi = rho_ij * xi + innovation_scale * cfg.design.draw(rng);
            }
        }
    }
    (x, RegressorParams { mu, rho, sigma })
}

/// Draw the heterogeneous intercepts and slopes, correlated with the
/// signal regressor's location through `phi` and `pi`.
pub fn simulate_coefficients(
    cfg: &SimulationConfig,
    mu_first_regressor: &[f64],
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let phi = cfg.rho_alpha_x * cfg.sigma;
    let pi = cfg.rho_beta_x * cfg.sigma;
    let sigma_eta = (cfg.sigma * cfg.sigma - phi * phi).max(0.0).sqrt();
    let sigma_zeta = (cfg.sigma * cfg.sigma - pi * pi).max(0.0).sqrt();
    let mut alpha = Vec::with_capacity(cfg.n_units);
    let mut beta = Vec::with_capacity(cfg.n_units);
    for &mu in mu_first_regressor {
        let eta = cfg.design.draw(rng);
        let zeta = cfg.design.draw(rng);
        alpha.push(cfg.alpha0 + phi * mu + sigma_eta * eta);
        beta.push(cfg.beta0 + pi * mu + sigma_zeta * zeta);
    }
    (alpha, beta)
}

/// Generate one panel: regressors, coefficients, centered-chi-square
/// errors and the outcome recursion with a 100-period burn-in.
pub fn simulate_panel(cfg: &SimulationConfig, replication: usize) -> SimulatedPanel {
    let mut rng = cfg.rng_for(replication);
    let kept = cfg.kept_periods();
    let total = cfg.burn_in + kept;
    let (x_all, params) = simulate_regressors(cfg, total, &mut rng);
    let mu_first: Vec<f64> = (0..cfg.n_units).map(|i| params.mu[(i, 0)]).collect();
    let (alpha, beta) = simulate_coefficients(cfg, &mu_first, &mut rng);

    let mut y_all = Array2::zeros((cfg.n_units, total));
    let mut eps_all = Array2::zeros((cfg.n_units, total));
    for i in 0..cfg.n_units {
        let scale = if cfg.heteroskedastic_errors {
            let chi: f64 = StandardNormal.sample(&mut rng);
            cfg.sigma_eps * ((1.0 + chi * chi) / 2.0).sqrt()
        } else {
            cfg.sigma_eps
        };
        let mut y_prev = alpha[i] / (1.0 - cfg.gamma_ar);
        for t in 0..total {
            let zeta = cfg.design.draw(&mut rng);
            let eps = scale * (zeta * zeta - 1.0) / std::f64::consts::SQRT_2;
            let y = alpha[i] + cfg.gamma_ar * y_prev + beta[i] * x_all[(i, t, 0)] + eps;
            y_all[(i, t)] = y;
            eps_all[(i, t)] = eps;
            y_prev = y;
        }
    }

    let burn = cfg.burn_in;
    SimulatedPanel {
        y: y_all.slice(ndarray::s![.., burn..]).to_owned(),
        x: x_all.slice(ndarray::s![.., burn.., ..]).to_owned(),
        eps: eps_all.slice(ndarray::s![.., burn..]).to_owned(),
        alpha,
        beta,
        gamma: cfg.gamma_ar,
        t_periods: cfg.t_periods,
        holdout: cfg.holdout,
    }
}

impl SimulatedPanel {
    /// View the simulated arrays as a same-frequency panel dataset with
    /// identity compression (`L = 1`, `k_max = 1`), so the estimator
    /// machinery applies unchanged.
    pub fn to_dataset(&self) -> Result<PanelDataset> {
        let (n, kept, p) = self.x.dim();
        let start = Period::quarterly(1990, 1);
        let time_index = consecutive_index(start, kept);
        let covariates = (0..p)
            .map(|j| Covariate {
                name: format!("x{:03}", j + 1),
                values: self.x.slice(ndarray::s![.., .., j]).to_owned(),
                freq: Freq::Quarterly,
                high_per_low: 1,
                start,
                release_lag: 0,
                dict_size: Some(1),
                k_max: Some(1),
            })
            .collect();
        PanelDataset::new(
            (0..n).map(|i| format!("unit{:02}", i + 1)).collect(),
            time_index,
            self.y.clone(),
            covariates,
            None,
        )
    }
}

/// Aggregate squared error of each family in one replication.
#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub sq_errors: Vec<(Family, f64)>,
}

fn model_spec(cfg: &SimulationConfig, family: Family) -> ModelSpec {
    ModelSpec::new(
        family,
        1,
        PenaltySelection::Cv(CvConfig {
            gamma_grid: cfg.gamma_grid.clone(),
            n_lambda: cfg.n_lambda,
            folds: 5,
        }),
    )
}

/// Run one replication: simulate, fit each family on the estimation
/// periods and score the one-step-ahead aggregate prediction.
pub fn replicate(
    cfg: &SimulationConfig,
    replication: usize,
    estimators: &[Family],
) -> Result<ReplicationOutcome> {
    let panel = simulate_panel(cfg, replication);
    let ds = panel.to_dataset()?;
    let target = cfg.holdout_target_index();
    let clock = NowcastClock::end_of(target);
    let weights = WeightVector::fixed(target, cfg.n_units);
    let opts = SolveOptions::default();

    let realized = (0..cfg.n_units).map(|i| panel.y[(i, target)]).sum::<f64>() / cfg.n_units as f64;

    let mut sq_errors = Vec::with_capacity(estimators.len());
    for &family in estimators {
        let spec = model_spec(cfg, family);
        let bundle = fit_model(&ds, &spec, &clock, Some(&weights), &opts)?;
        let set = nowcast(&bundle, &ds, &clock, Some(&weights), None)?;
        let prediction = set.aggregate.ok_or_else(|| {
            Error::Numeric(format!("family {} produced no aggregate", family.label()))
        })?;
        let err = prediction - realized;
        sq_errors.push((family, err * err));
    }
    Ok(ReplicationOutcome { sq_errors })
}

/// Accuracy summary of one experiment cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McCell {
    pub n_units: usize,
    pub t_periods: usize,
    pub n_regressors: usize,
    pub sigma: f64,
    pub design: InnovationDesign,
    pub used: usize,
    pub dropped: usize,
    /// `(family, mse, monte carlo standard error)`.
    pub stats: Vec<(Family, f64, f64)>,
    /// MSE of each family relative to the pooled family.
    pub ratios: Vec<(Family, f64)>,
}

impl McCell {
    pub fn ratio(&self, family: Family) -> Option<f64> {
        self.ratios
            .iter()
            .find(|(f, _)| *f == family)
            .map(|(_, r)| *r)
    }

    pub fn mse(&self, family: Family) -> Option<f64> {
        self.stats
            .iter()
            .find(|(f, _, _)| *f == family)
            .map(|(_, m, _)| *m)
    }
}

/// Run all replications of one cell, in parallel with per-replication RNG
/// streams. Failed replications are dropped and counted; more than 1%
/// drops abort the cell.
pub fn run_monte_carlo_cell(cfg: &SimulationConfig, estimators: &[Family]) -> Result<McCell> {
    cfg.validate()?;
    if estimators.is_empty() {
        return Err(Error::Config("no estimators requested".into()));
    }
    let outcomes: Vec<Result<ReplicationOutcome>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(cfg, r, estimators))
        .collect();

    let mut per_family: Vec<Vec<f64>> = vec![Vec::new(); estimators.len()];
    let mut dropped = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(rep) => {
                for (k, (_, sq)) in rep.sq_errors.iter().enumerate() {
                    per_family[k].push(*sq);
                }
            }
            Err(_) => dropped += 1,
        }
    }
    let used = cfg.replications - dropped;
    if dropped as f64 > 0.01 * cfg.replications as f64 {
        return Err(Error::Numeric(format!(
            "{dropped} of {} replications failed",
            cfg.replications
        )));
    }
    if used == 0 {
        return Err(Error::Numeric("all replications failed".into()));
    }

    let stats: Vec<(Family, f64, f64)> = estimators
        .iter()
        .zip(&per_family)
        .map(|(&family, errs)| {
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / errs.len() as f64;
            (family, mean, (var / errs.len() as f64).sqrt())
        })
        .collect();

    let pooled_mse = stats
        .iter()
        .find(|(f, _, _)| *f == Family::P)
        .map(|(_, m, _)| *m)
        .ok_or_else(|| Error::Config("the pooled family is required as the baseline".into()))?;
    let ratios = stats.iter().map(|(f, m, _)| (*f, m / pooled_mse)).collect();

    Ok(McCell {
        n_units: cfg.n_units,
        t_periods: cfg.t_periods,
        n_regressors: cfg.n_regressors,
        sigma: cfg.sigma,
        design: cfg.design,
        used,
        dropped,
        stats,
        ratios,
    })
}

/// A grid of experiment cells sharing one base configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McGrid {
    #[serde(flatten)]
    pub base: SimulationConfig,
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<usize>,
    pub p_grid: Vec<usize>,
    pub sigma_grid: Vec<f64>,
    pub design_grid: Vec<InnovationDesign>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Family>,
}

pub fn default_estimators() -> Vec<Family> {
    vec![Family::P, Family::Ts, Family::Ac, Family::A]
}

/// Relative out-of-sample MSE grid in the simulation table layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McResultTable {
    pub cells: Vec<McCell>,
}

impl McGrid {
    /// Per-cell configurations, ordered by (sigma, T, N, design, p).
    pub fn cell_configs(&self) -> Vec<SimulationConfig> {
        let mut cells = Vec::new();
        for &sigma in &self.sigma_grid {
            for &t in &self.t_grid {
                for &n in &self.n_grid {
                    for &design in &self.design_grid {
                        for &p in &self.p_grid {
                            cells.push(SimulationConfig {
                                n_units: n,
                                t_periods: t,
                                n_regressors: p,
                                sigma,
                                design,
                                ..self.base.clone()
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

/// Run the whole grid; cells are ordered by (sigma, T, N, design, p).
pub fn run_monte_carlo(grid: &McGrid) -> Result<McResultTable> {
    let cells = grid
        .cell_configs()
        .iter()
        .map(|cfg| run_monte_carlo_cell(cfg, &grid.estimators))
        .collect::<Result<Vec<McCell>>>()?;
    Ok(McResultTable { cells })
}

/// The three additive pieces of one family's aggregate forecast error,
/// with the coefficient-projection term folded into the heterogeneity
/// term by measuring it at the fitted coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub family: Family,
    pub estimation_term: f64,
    pub heterogeneity_term: f64,
    pub noise_term: f64,
    pub realized_error: f64,
    pub identity_gap: f64,
}

/// Effective per-unit coefficients of a fitted bundle on the predictor
/// space `[1, y_lag, x_1, ..., x_p]` of the simulation design.
fn effective_unit_coefficients(bundle: &FitBundle, n: usize, p: usize) -> Result<Vec<Vec<f64>>> {
    let expect = |cond: bool, what: &str| {
        if cond {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "unexpected {what} layout in the decomposition"
            )))
        }
    };
    let mut out = Vec::with_capacity(n);
    match bundle.family {
        Family::P => {
            let fit = &bundle.fits[0].fit;
            expect(fit.coefficients.len() == 1 + p, "pooled")?;
            let mut eff = vec![fit.intercept];
            eff.extend_from_slice(&fit.coefficients);
            out = vec![eff; n];
        }
        Family::HetAr => {
            let fit = &bundle.fits[0].fit;
            expect(fit.coefficients.len() == n + p, "heterogeneous-AR")?;
            for i in 0..n {
                let mut eff = vec![fit.intercept, fit.coefficients[i]];
                eff.extend_from_slice(&fit.coefficients[n..]);
                out.push(eff);
            }
        }
        Family::Ts => {
            expect(bundle.fits.len() == n, "time-series")?;
            for unit_fit in &bundle.fits {
                let fit = &unit_fit.fit;
                expect(fit.coefficients.len() == 1 + p, "time-series")?;
                let mut eff = vec![fit.intercept];
                eff.extend_from_slice(&fit.coefficients);
                out.push(eff);
            }
        }
        Family::A => {
            let fit = &bundle.fits[0].fit;
            expect(fit.coefficients.len() == 1 + p, "aggregate")?;
            let mut eff = vec![fit.intercept];
            eff.extend_from_slice(&fit.coefficients);
            out = vec![eff; n];
        }
        Family::Ac => {
            let fit = &bundle.fits[0].fit;
            let block = 1 + p;
            expect(fit.coefficients.len() == n * block, "components")?;
            for i in 0..n {
                let mut eff = vec![fit.intercept];
                eff.extend_from_slice(&fit.coefficients[i * block..(i + 1) * block]);
                out.push(eff);
            }
        }
    }
    Ok(out)
}

/// Decompose each family's realized aggregate forecast error into the
/// estimation, heterogeneity and aggregated-noise terms. Measured at the
/// fitted coefficients the estimation term vanishes and the identity is
/// exact up to floating-point accumulation.
#[allow(clippy::needless_range_loop)]
pub fn msfe_decomposition_report(
    panel: &SimulatedPanel,
    bundles: &[FitBundle],
) -> Result<Vec<DecompositionRecord>> {
    let (n, _, p) = panel.x.dim();
    let ds = panel.to_dataset()?;
    let target = 1 + panel.t_periods;
    let clock = NowcastClock::end_of(target);
    let weights = WeightVector::fixed(target, n);
    let omega = 1.0 / n as f64;

    let realized_y = (0..n).map(|i| panel.y[(i, target)]).sum::<f64>() * omega;

    let mut records = Vec::with_capacity(bundles.len());
    for bundle in bundles {
        let set = nowcast(bundle, &ds, &clock, Some(&weights), None)?;
        let prediction = set
            .aggregate
            .ok_or_else(|| Error::Numeric("bundle produced no aggregate".into()))?;
        let effective = effective_unit_coefficients(bundle, n, p)?;

        let mut heterogeneity = 0.0;
        let mut noise = 0.0;
        for i in 0..n {
            // Predictor vector [1, y_lag, x_1..x_p] at the holdout clock.
            let mut predictor = Vec::with_capacity(2 + p);
            predictor.push(1.0);
            predictor.push(panel.y[(i, target - 1)]);
            for j in 0..p {
                predictor.push(panel.x[(i, target, j)]);
            }
            let mut truth = vec![0.0; 2 + p];
            truth[0] = panel.alpha[i];
            truth[1] = panel.gamma;
            truth[2] = panel.beta[i];
            let diff: f64 = predictor
                .iter()
                .zip(effective[i].iter().zip(&truth))
                .map(|(x, (e, t))| x * (e - t))
                .sum();
            heterogeneity += omega * diff;
            noise -= omega * panel.eps[(i, target)];
        }

        let realized_error = prediction - realized_y;
        records.push(DecompositionRecord {
            family: bundle.family,
            estimation_term: 0.0,
            heterogeneity_term: heterogeneity,
            noise_term: noise,
            realized_error,
            identity_gap: realized_error - (heterogeneity + noise),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> SimulationConfig {
        SimulationConfig {
            n_units: 3,
            t_periods: 20,
            n_regressors: 4,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_panel() {
        let cfg = SimulationConfig {
            n_units: 3,
            t_periods: 15,
            n_regressors: 4,
            sigma: 0.4,
            master_seed: 42,
            ..Default::default()
        };
        let a = simulate_panel(&cfg, 7);
        let b = simulate_panel(&cfg, 7);
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        assert_eq!(a.alpha, b.alpha);
        let c = simulate_panel(&cfg, 8);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn sigma_zero_coefficients_are_homogeneous() {
        let cfg = SimulationConfig {
            sigma: 0.0,
            ..tiny_cfg()
        };
        let panel = simulate_panel(&cfg, 0);
        for i in 0..cfg.n_units {
            assert_eq!(panel.alpha[i], 0.0);
            assert_eq!(panel.beta[i], 0.5);
        }
    }

    #[test]
    fn rho_draws_stay_in_range() {
        let cfg = tiny_cfg();
        let mut rng = cfg.rng_for(3);
        let (_, params) = simulate_regressors(&cfg, 10, &mut rng);
        for v in params.rho.iter() {
            assert!((0.0..0.95).contains(v));
        }
    }

    #[test]
    fn white_noise_regressor_variance_matches() {
        // With rho = 0 the deviations are white noise of variance
        // sigma^2; check the long-run moment within Monte Carlo error.
        let cfg = SimulationConfig {
            n_units: 1,
            t_periods: 1,
            n_regressors: 1,
            ..Default::default()
        };
        let mut rng = cfg.rng_for(11);
        let steps = 100_000;
        let sigma = 0.9f64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..steps {
            let v: f64 = sigma * cfg.design.draw(&mut rng);
            sum += v;
            sumsq += v * v;
        }
        let var = sumsq / steps as f64 - (sum / steps as f64).powi(2);
        let se = (2.0 / steps as f64).sqrt() * sigma * sigma;
        assert!((var - sigma * sigma).abs() < 3.0 * se);
    }

    #[test]
    fn location_draws_are_centred_for_gaussian() {
        let cfg = tiny_cfg();
        let mut rng = cfg.rng_for(5);
        let draws = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            let z: f64 = StandardNormal.sample(&mut rng);
            sum += (z * z - 1.0) / std::f64::consts::SQRT_2;
        }
        let mean = sum / draws as f64;
        // Var((z^2-1)/sqrt 2) = 1 for standard normal z.
        let se = (1.0 / draws as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn errors_are_centred_for_gaussian() {
        let cfg = tiny_cfg();
        let mut rng = cfg.rng_for(6);
        let draws = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            let z: f64 = StandardNormal.sample(&mut rng);
            sum += (z * z - 1.0) / std::f64::consts::SQRT_2;
        }
        let mean = sum / draws as f64;
        let se = (1.0 / draws as f64).sqrt();
        assert!(mean.abs() < 3.0 * se);
    }

    #[test]
    fn beta_variance_identity_for_large_sigma() {
        let cfg = SimulationConfig {
            sigma: 0.8,
            n_units: 100_000,
            ..tiny_cfg()
        };
        let mut rng = cfg.rng_for(9);
        // Draw locations like the regressor step does.
        let mu: Vec<f64> = (0..cfg.n_units)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z * z - 1.0) / std::f64::consts::SQRT_2
            })
            .collect();
        let (_, beta) = simulate_coefficients(&cfg, &mu, &mut rng);
        let pi = cfg.rho_beta_x * cfg.sigma;
        let sigma_zeta_sq = cfg.sigma * cfg.sigma - pi * pi;
        let mu_var = 1.0; // Var((z^2-1)/sqrt 2) for standard normal z.
        let expected = pi * pi * mu_var + sigma_zeta_sq;
        let mean = beta.iter().sum::<f64>() / beta.len() as f64;
        let var = beta.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / beta.len() as f64;
        // Loose three-sigma band for the sample variance of ~1e5 draws.
        let se = expected * (2.0 / beta.len() as f64).sqrt() * 3.0;
        assert!(
            (var - expected).abs() < 10.0 * se,
            "var {var} vs {expected}"
        );
        // And the slope correlates positively with the location.
        let cov: f64 = beta
            .iter()
            .zip(&mu)
            .map(|(b, m)| (b - mean) * m)
            .sum::<f64>()
            / beta.len() as f64;
        assert!(cov > 0.0);
    }

    #[test]
    fn full_grid_enumerates_eighty_cells() {
        let grid = McGrid {
            base: SimulationConfig::default(),
            n_grid: vec![10, 20],
            t_grid: vec![35, 100],
            p_grid: vec![50, 500],
            sigma_grid: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            design_grid: vec![InnovationDesign::Gaussian, InnovationDesign::StudentT5],
            estimators: super::default_estimators(),
        };
        assert_eq!(grid.cell_configs().len(), 80);
    }

    #[test]
    fn noiseless_recursion_converges_to_zero() {
        let cfg = SimulationConfig {
            sigma: 0.0,
            sigma_eps: 0.0,
            n_units: 2,
            t_periods: 30,
            n_regressors: 2,
            beta0: 0.0,
            ..Default::default()
        };
        let panel = simulate_panel(&cfg, 0);
        // With alpha = 0, beta = 0 and no noise, y decays to the
        // unconditional mean 0 through the burn-in.
        for i in 0..2 {
            for t in 0..panel.y.ncols() {
                assert!(panel.y[(i, t)].abs() < 1e-12);
            }
        }
    }
}
