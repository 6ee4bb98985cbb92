//! Command implementations: each writes CSV outputs plus a JSON manifest
//! echoing the resolved configuration and seed.

use crate::config::{period_index, EvaluateConfig, McTableConfig, NowcastConfig, WeightsConfig};
use serde::Serialize;
use sgmidas::aggregation::WeightScheme;
use sgmidas::error::{Error, Result};
use sgmidas::evaluation::{
    rolling_evaluate, scheme_weights, EvaluationConfig, EvaluationWindow, MemberSpec,
};
use sgmidas::models::{fit_model, nowcast, Family, ModelSpec};
use sgmidas::panel::PanelDataset;
use sgmidas::sglasso::SolveOptions;
use sgmidas::simulate::{run_monte_carlo, McGrid, McResultTable, SimulationConfig};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Write a file and record it for the manifest.
struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    fn new(dir: &Path) -> Result<OutputDir> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), content)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn finish<C: Serialize>(mut self, command: &str, config: &C, seed: Option<u64>) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a, C> {
            command: &'a str,
            seed: Option<u64>,
            threads: usize,
            outputs: &'a [String],
            config: &'a C,
        }
        let manifest = Manifest {
            command,
            seed,
            threads: rayon::current_num_threads(),
            outputs: &self.written.clone(),
            config,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        self.write("manifest.json", &text)?;
        Ok(())
    }
}

fn mc_table_csv(table: &McResultTable) -> String {
    let mut out = String::from("sigma,n,t,design,p,ts_over_p,ac_over_p,a_over_p\n");
    for cell in &table.cells {
        let r = |family| cell.ratio(family).unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            cell.sigma,
            cell.n_units,
            cell.t_periods,
            cell.design.label(),
            cell.n_regressors,
            r(Family::Ts),
            r(Family::Ac),
            r(Family::A),
        );
    }
    out
}

fn mc_diagnostics_csv(table: &McResultTable) -> String {
    let mut out = String::from("sigma,n,t,design,p,family,mse,mc_se,used,dropped\n");
    for cell in &table.cells {
        for (family, mse, se) in &cell.stats {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                cell.sigma,
                cell.n_units,
                cell.t_periods,
                cell.design.label(),
                cell.n_regressors,
                family.label(),
                mse,
                se,
                cell.used,
                cell.dropped,
            );
        }
    }
    out
}

/// Reproduce the simulation table over the configured grid.
pub fn cmd_mc_table(config: &McTableConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    config.validate()?;
    let mut resolved = config.clone();
    if let Some(s) = seed {
        resolved.master_seed = s;
    }
    let base = SimulationConfig {
        n_units: resolved.n[0],
        t_periods: resolved.t[0],
        n_regressors: resolved.p[0],
        sigma: resolved.sigma[0],
        design: resolved.design[0],
        replications: resolved.replications,
        master_seed: resolved.master_seed,
        n_lambda: resolved.n_lambda,
        gamma_grid: resolved.gamma_grid.clone(),
        holdout: resolved.holdout,
        sigma_eps: resolved.sigma_eps,
        heteroskedastic_errors: resolved.heteroskedastic_errors,
        ..Default::default()
    };
    let grid = McGrid {
        base,
        n_grid: resolved.n.clone(),
        t_grid: resolved.t.clone(),
        p_grid: resolved.p.clone(),
        sigma_grid: resolved.sigma.clone(),
        design_grid: resolved.design.clone(),
        estimators: resolved.estimators.clone(),
    };
    let table = run_monte_carlo(&grid)?;

    let mut output = OutputDir::new(out)?;
    output.write("mc_table.csv", &mc_table_csv(&table))?;
    output.write("mc_diagnostics.csv", &mc_diagnostics_csv(&table))?;
    output.finish("mc-table", &resolved, seed)?;
    Ok(())
}

fn weights_for(
    ds: &PanelDataset,
    scheme: WeightScheme,
    period: usize,
    realized: sgmidas::evaluation::RealizedAggregate,
) -> Result<sgmidas::aggregation::WeightVector> {
    scheme_weights(ds, scheme, period, realized)
}

/// Fit the requested families and produce nowcast, weight and selection
/// outputs.
pub fn cmd_nowcast(config: &NowcastConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let base = std::env::current_dir()?;
    let ds = config.data.load(&base)?;
    let realized = sgmidas::evaluation::RealizedAggregate::Mean;
    let (first, last) = match &config.target_periods {
        Some(range) => (
            period_index(&ds, &range.first)?,
            period_index(&ds, &range.last)?,
        ),
        None => (ds.n_periods() - 1, ds.n_periods() - 1),
    };
    if first > last {
        return Err(Error::Config("target period range is reversed".into()));
    }
    let opts = SolveOptions::default();

    let mut nowcast_rows = String::from("family,scheme,unit,period,horizon,prediction\n");
    let mut weight_rows = String::from("scheme,period,unit,weight\n");
    let mut selection: Vec<(Family, sgmidas::panel::Horizon, usize, Vec<String>)> = Vec::new();

    for period in first..=last {
        for &scheme in &config.weight_schemes {
            let w = weights_for(&ds, scheme, period, realized)?;
            for (i, unit) in ds.unit_ids.iter().enumerate() {
                let _ = writeln!(
                    weight_rows,
                    "{},{},{},{}",
                    scheme.label(),
                    ds.period_label(period),
                    unit,
                    w.weights[i]
                );
            }
        }
        for &horizon in &config.horizons {
            let clock = horizon.clock(period);
            for &family in &config.families {
                let spec = ModelSpec::new(family, config.ar_order, config.penalty.clone());
                // A and AC embed the first configured scheme's weights.
                let fit_weights = weights_for(&ds, config.weight_schemes[0], period, realized)?;
                let bundle = fit_model(&ds, &spec, &clock, Some(&fit_weights), &opts)?;
                if config.selection_matrix {
                    selection.push((family, horizon, period, bundle.active_group_names()));
                }
                for &scheme in &config.weight_schemes {
                    let w = weights_for(&ds, scheme, period, realized)?;
                    let set = nowcast(&bundle, &ds, &clock, Some(&w), Some(horizon))?;
                    if scheme == config.weight_schemes[0] {
                        for (unit, pred) in &set.per_unit {
                            let _ = writeln!(
                                nowcast_rows,
                                "{},-,{},{},{},{}",
                                family.label(),
                                unit,
                                ds.period_label(period),
                                horizon.label(),
                                pred
                            );
                        }
                    }
                    if let Some(aggregate) = set.aggregate {
                        let _ = writeln!(
                            nowcast_rows,
                            "{},{},aggregate,{},{},{}",
                            family.label(),
                            scheme.label(),
                            ds.period_label(period),
                            horizon.label(),
                            aggregate
                        );
                    }
                }
            }
        }
    }

    let mut output = OutputDir::new(out)?;
    output.write("nowcasts.csv", &nowcast_rows)?;
    output.write("weights.csv", &weight_rows)?;
    if config.selection_matrix {
        for &family in &config.families {
            for &horizon in &config.horizons {
                let entries: Vec<&(Family, sgmidas::panel::Horizon, usize, Vec<String>)> =
                    selection
                        .iter()
                        .filter(|(f, h, _, _)| *f == family && *h == horizon)
                        .collect();
                if entries.is_empty() {
                    continue;
                }
                let mut all_groups: Vec<String> = Vec::new();
                for (_, _, _, active) in &entries {
                    for g in active {
                        if !all_groups.contains(g) {
                            all_groups.push(g.clone());
                        }
                    }
                }
                let mut text = String::from("period");
                for g in &all_groups {
                    let _ = write!(text, ",{g}");
                }
                text.push('\n');
                for (_, _, period, active) in &entries {
                    let _ = write!(text, "{}", ds.period_label(*period));
                    for g in &all_groups {
                        let _ = write!(text, ",{}", u8::from(active.contains(g)));
                    }
                    text.push('\n');
                }
                output.write(
                    &format!("selection_{}_{}.csv", family.label(), horizon.label()),
                    &text,
                )?;
            }
        }
    }
    output.finish("nowcast", config, seed)?;
    Ok(())
}

/// Rolling out-of-sample evaluation with RMSE and benchmark-ratio tables.
pub fn cmd_evaluate(config: &EvaluateConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let base = std::env::current_dir()?;
    let ds = config.data.load(&base)?;
    let window = EvaluationWindow {
        first_oos: period_index(&ds, &config.window.first)?,
        last_oos: period_index(&ds, &config.window.last)?,
    };
    let subsamples = config
        .subsamples
        .iter()
        .map(|s| Ok((s.tag.clone(), period_index(&ds, &s.last)?)))
        .collect::<Result<Vec<_>>>()?;
    let eval_cfg = EvaluationConfig {
        members: config
            .members
            .iter()
            .map(|m| MemberSpec {
                family: m.family,
                scheme: m.scheme,
            })
            .collect(),
        horizons: config.horizons.clone(),
        window,
        ar_order: config.ar_order,
        penalty: config.penalty.clone(),
        benchmark: MemberSpec {
            family: config.benchmark.family,
            scheme: config.benchmark.scheme,
        },
        subsamples,
        combination: config.combination,
        realized_aggregate: config.realized_aggregate,
    };
    let report = rolling_evaluate(&ds, &eval_cfg)?;

    let mut rows =
        String::from("model,weight_scheme,horizon,sample_tag,rmse,rmse_ratio_vs_benchmark\n");
    for row in &report.rows {
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{}",
            row.model,
            row.scheme,
            row.horizon.label(),
            row.sample_tag,
            row.rmse,
            row.rmse_ratio_vs_benchmark
        );
    }
    let mut records = String::from("member,horizon,period,prediction,realized\n");
    for r in &report.nowcasts {
        let _ = writeln!(
            records,
            "{},{},{},{},{}",
            r.member,
            r.horizon.label(),
            ds.period_label(r.period),
            r.prediction,
            r.realized
        );
    }

    let mut output = OutputDir::new(out)?;
    output.write("rmse_report.csv", &rows)?;
    output.write("nowcast_records.csv", &records)?;
    output.finish("evaluate", config, seed)?;
    Ok(())
}

/// Export weight matrices per scheme, plus the small-over-large share
/// ratio when a unit partition is configured.
pub fn cmd_weights(config: &WeightsConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let base = std::env::current_dir()?;
    let ds = config.data.load(&base)?;
    let (first, last) = match &config.periods {
        Some(range) => (
            period_index(&ds, &range.first)?,
            period_index(&ds, &range.last)?,
        ),
        None => (1, ds.n_periods() - 1),
    };
    if first == 0 {
        return Err(Error::Config(
            "weights need at least one period of history; start at the second period".into(),
        ));
    }

    let partition_idx = match &config.partition {
        Some(p) => {
            let mut small = Vec::new();
            for unit in &p.small {
                small.push(ds.unit_index(unit)?);
            }
            let mut big = Vec::new();
            for unit in &p.big {
                big.push(ds.unit_index(unit)?);
            }
            Some((small, big))
        }
        None => None,
    };

    let mut weight_rows = String::from("scheme,period,unit,weight\n");
    let mut ratio_rows = String::from("scheme,period,small_share,big_share,small_big_ratio\n");
    for period in first..=last {
        for &scheme in &config.schemes {
            let w = weights_for(&ds, scheme, period, config.realized_aggregate)?;
            for (i, unit) in ds.unit_ids.iter().enumerate() {
                let _ = writeln!(
                    weight_rows,
                    "{},{},{},{}",
                    scheme.label(),
                    ds.period_label(period),
                    unit,
                    w.weights[i]
                );
            }
            if let Some((small, big)) = &partition_idx {
                let small_share: f64 = small.iter().map(|&i| w.weights[i]).sum();
                let big_share: f64 = big.iter().map(|&i| w.weights[i]).sum();
                let _ = writeln!(
                    ratio_rows,
                    "{},{},{},{},{}",
                    scheme.label(),
                    ds.period_label(period),
                    small_share,
                    big_share,
                    small_share / big_share
                );
            }
        }
    }

    let mut output = OutputDir::new(out)?;
    output.write("weights.csv", &weight_rows)?;
    if partition_idx.is_some() {
        output.write("weight_share_ratio.csv", &ratio_rows)?;
    }
    output.finish("weights", config, seed)?;
    Ok(())
}
