//! Mixed-frequency panel data model, CSV ingestion and window extraction.
//!
//! A [`PanelDataset`] holds low-frequency targets for `N` units over `T`
//! periods together with higher-frequency covariates stored as dense
//! `N x (T * high_per_low)` matrices. The dataset is immutable after load
//! and safe to share read-only across workers.

use crate::error::{Error, Result};
use crate::period::{consecutive_index, Freq, Period};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

/// Ratio between a covariate's sampling frequency and the target frequency.
///
/// `high_per_low` is the number of high-frequency observations per target
/// period; `low_lags` the number of target periods spanned by the lag
/// window, so the window covers `low_lags * high_per_low` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyRatio {
    pub high_per_low: usize,
    pub low_lags: usize,
}

impl FrequencyRatio {
    pub fn new(high_per_low: usize, low_lags: usize) -> Result<FrequencyRatio> {
        if high_per_low == 0 || low_lags == 0 {
            return Err(Error::Frequency(
                "high_per_low and low_lags must be >= 1".into(),
            ));
        }
        Ok(FrequencyRatio {
            high_per_low,
            low_lags,
        })
    }

    /// Total high-frequency lags covered by the window.
    pub fn k_max(&self) -> usize {
        self.high_per_low * self.low_lags
    }
}

/// One high-frequency covariate of the panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate {
    pub name: String,
    /// `N x (T * high_per_low)` values, oldest step first within the sample.
    pub values: Array2<f64>,
    pub freq: Freq,
    pub high_per_low: usize,
    /// First high-frequency period of the stored sample.
    pub start: Period,
    /// Publication delay in high-frequency steps.
    pub release_lag: usize,
    /// Dictionary size override (`None` = module default).
    pub dict_size: Option<usize>,
    /// Lag-window override in high-frequency steps (`None` = module default).
    pub k_max: Option<usize>,
}

/// Information cutoff for a nowcast or forecast of one target period.
///
/// The cutoff is the end of `cutoff_step` (1-based) out of
/// `steps_per_period` equal subdivisions of `cutoff_period`. Cutoffs in a
/// period before the target describe a forecasting situation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NowcastClock {
    pub target_period: usize,
    pub cutoff_period: usize,
    pub cutoff_step: usize,
    pub steps_per_period: usize,
}

impl NowcastClock {
    /// Nowcast clock: cutoff inside the target period itself.
    pub fn nowcast(target_period: usize, cutoff_step: usize, steps_per_period: usize) -> Self {
        assert!(steps_per_period >= 1 && cutoff_step >= 1 && cutoff_step <= steps_per_period);
        NowcastClock {
            target_period,
            cutoff_period: target_period,
            cutoff_step,
            steps_per_period,
        }
    }

    /// Clock with all information of the target period available.
    pub fn end_of(target_period: usize) -> Self {
        NowcastClock::nowcast(target_period, 1, 1)
    }

    /// The same cutoff position replayed against another target period.
    pub fn shifted_to(&self, target_period: usize) -> Self {
        let gap = self.target_period as i64 - self.cutoff_period as i64;
        NowcastClock {
            target_period,
            cutoff_period: (target_period as i64 - gap) as usize,
            cutoff_step: self.cutoff_step,
            steps_per_period: self.steps_per_period,
        }
    }

    /// High-frequency steps of a covariate available inside the cutoff
    /// period, for a covariate with `high_per_low` steps per period.
    pub fn steps_available(&self, high_per_low: usize) -> usize {
        (self.cutoff_step * high_per_low) / self.steps_per_period
    }

    pub fn is_forecast(&self) -> bool {
        self.cutoff_period < self.target_period
    }
}

/// Nowcast horizons within the target quarter, matching monthly data
/// arrival: cutoff at the end of month 1, month 2 or month 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Horizon {
    #[serde(rename = "2-month")]
    TwoMonth,
    #[serde(rename = "1-month")]
    OneMonth,
    #[serde(rename = "eoq")]
    EndOfQuarter,
}

impl Horizon {
    pub fn all() -> [Horizon; 3] {
        [Horizon::TwoMonth, Horizon::OneMonth, Horizon::EndOfQuarter]
    }

    pub fn clock(&self, target_period: usize) -> NowcastClock {
        let step = match self {
            Horizon::TwoMonth => 1,
            Horizon::OneMonth => 2,
            Horizon::EndOfQuarter => 3,
        };
        NowcastClock::nowcast(target_period, step, 3)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Horizon::TwoMonth => "2-month",
            Horizon::OneMonth => "1-month",
            Horizon::EndOfQuarter => "eoq",
        }
    }

    pub fn parse(label: &str) -> Result<Horizon> {
        match label {
            "2-month" | "2m" => Ok(Horizon::TwoMonth),
            "1-month" | "1m" => Ok(Horizon::OneMonth),
            "eoq" | "EoQ" => Ok(Horizon::EndOfQuarter),
            other => Err(Error::Config(format!("unknown horizon `{other}`"))),
        }
    }
}

/// Aligned low-frequency targets and mixed-frequency covariates for `N`
/// units over `T` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub unit_ids: Vec<String>,
    pub time_index: Vec<Period>,
    /// `N x T` target values.
    pub targets: Array2<f64>,
    pub covariates: Vec<Covariate>,
    /// Optional `N x T` level series (e.g. output levels for share weights).
    pub levels: Option<Array2<f64>>,
}

impl PanelDataset {
    pub fn new(
        unit_ids: Vec<String>,
        time_index: Vec<Period>,
        targets: Array2<f64>,
        covariates: Vec<Covariate>,
        levels: Option<Array2<f64>>,
    ) -> Result<PanelDataset> {
        let n = unit_ids.len();
        let t = time_index.len();
        if n == 0 || t == 0 {
            return Err(Error::Dimension("empty unit or time index".into()));
        }
        if targets.dim() != (n, t) {
            return Err(Error::Dimension(format!(
                "targets shape {:?} does not match N={n}, T={t}",
                targets.dim()
            )));
        }
        for w in time_index.windows(2) {
            if w[1] != w[0].next() {
                return Err(Error::Frequency(format!(
                    "time index has a hole between {} and {}",
                    w[0], w[1]
                )));
            }
        }
        for cov in &covariates {
            if cov.values.dim() != (n, t * cov.high_per_low) {
                return Err(Error::Dimension(format!(
                    "covariate `{}` has shape {:?}, expected {}x{}",
                    cov.name,
                    cov.values.dim(),
                    n,
                    t * cov.high_per_low
                )));
            }
            if !cov.values.iter().all(|v| v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "covariate `{}` contains non-finite values",
                    cov.name
                )));
            }
        }
        if let Some(lv) = &levels {
            if lv.dim() != (n, t) {
                return Err(Error::Dimension("levels shape mismatch".into()));
            }
        }
        if !targets.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("targets contain non-finite values".into()));
        }
        Ok(PanelDataset {
            unit_ids,
            time_index,
            targets,
            covariates,
            levels,
        })
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn n_periods(&self) -> usize {
        self.time_index.len()
    }

    pub fn unit_index(&self, unit: &str) -> Result<usize> {
        self.unit_ids
            .iter()
            .position(|u| u == unit)
            .ok_or_else(|| Error::Lookup(format!("unknown unit `{unit}`")))
    }

    /// Calendar label of a period index; indices one past the end label
    /// the next period (production nowcasts of the in-progress period).
    pub fn period_label(&self, index: usize) -> Period {
        self.time_index[0].offset(index as i64)
    }

    /// The `k_max` most recent published high-frequency values of one
    /// covariate at the clock's cutoff, most recent first. Values newer
    /// than the covariate's release lag repeat the latest published value.
    pub fn extract_window(
        &self,
        unit: usize,
        covariate: usize,
        clock: &NowcastClock,
        k_max: usize,
    ) -> Result<Vec<f64>> {
        let cov = &self.covariates[covariate];
        let m = cov.high_per_low;
        let total = self.n_periods() * m;
        let avail = clock.steps_available(m);
        let idx_last = clock.cutoff_period as i64 * m as i64 + avail as i64 - 1;
        let idx_pub = idx_last - cov.release_lag as i64;
        // Slots newer than the publication pointer repeat the latest
        // published value, so only the published part must sit inside the
        // sample.
        if idx_pub >= total as i64 {
            return Err(Error::InsufficientHistory(format!(
                "cutoff beyond the published sample of covariate `{}`",
                cov.name
            )));
        }
        if idx_pub < 0 || idx_last - (k_max as i64 - 1) < 0 {
            return Err(Error::InsufficientHistory(format!(
                "window of {k_max} steps before {} underruns the sample start of `{}`",
                idx_last, cov.name
            )));
        }
        let row = cov.values.row(unit);
        Ok((0..k_max)
            .map(|j| row[(idx_last - j as i64).min(idx_pub) as usize])
            .collect())
    }

    /// Collapse the panel to a single weighted-sum unit. Targets, levels
    /// and every covariate are replaced by their weighted combination.
    pub fn aggregate_series(&self, weights: &[f64]) -> Result<PanelDataset> {
        let n = self.n_units();
        if weights.len() != n {
            return Err(Error::Dimension(format!(
                "{} weights for {n} units",
                weights.len()
            )));
        }
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::Numeric("non-finite aggregation weight".into()));
        }
        let w = Array1::from(weights.to_vec());
        let combine = |m: &Array2<f64>| {
            let mut out = Array2::zeros((1, m.ncols()));
            out.row_mut(0).assign(&w.dot(m));
            out
        };
        let covariates = self
            .covariates
            .iter()
            .map(|c| Covariate {
                values: combine(&c.values),
                ..c.clone()
            })
            .collect();
        PanelDataset::new(
            vec!["aggregate".to_string()],
            self.time_index.clone(),
            combine(&self.targets),
            covariates,
            self.levels.as_ref().map(combine),
        )
    }

    /// Restrict the panel to the named units, preserving their order
    /// as given. Series values are copied bit-exactly.
    pub fn subset_units(&self, units: &[&str]) -> Result<PanelDataset> {
        let idx: Vec<usize> = units
            .iter()
            .map(|u| self.unit_index(u))
            .collect::<Result<_>>()?;
        let pick = |m: &Array2<f64>| {
            let mut out = Array2::zeros((idx.len(), m.ncols()));
            for (r, &i) in idx.iter().enumerate() {
                out.row_mut(r).assign(&m.row(i));
            }
            out
        };
        let covariates = self
            .covariates
            .iter()
            .map(|c| Covariate {
                values: pick(&c.values),
                ..c.clone()
            })
            .collect();
        PanelDataset::new(
            units.iter().map(|u| u.to_string()).collect(),
            self.time_index.clone(),
            pick(&self.targets),
            covariates,
            self.levels.as_ref().map(pick),
        )
    }

    /// The dataset truncated to the first `t` periods (used by expanding
    /// window evaluation). Covariate samples are cut at `t * high_per_low`.
    pub fn truncate_periods(&self, t: usize) -> Result<PanelDataset> {
        if t == 0 || t > self.n_periods() {
            return Err(Error::Dimension(format!(
                "cannot truncate to {t} of {} periods",
                self.n_periods()
            )));
        }
        let covariates = self
            .covariates
            .iter()
            .map(|c| Covariate {
                values: c
                    .values
                    .slice(ndarray::s![.., ..t * c.high_per_low])
                    .to_owned(),
                ..c.clone()
            })
            .collect();
        PanelDataset::new(
            self.unit_ids.clone(),
            self.time_index[..t].to_vec(),
            self.targets.slice(ndarray::s![.., ..t]).to_owned(),
            covariates,
            self.levels
                .as_ref()
                .map(|lv| lv.slice(ndarray::s![.., ..t]).to_owned()),
        )
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Per-covariate entry of the companion schema.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CovariateSchema {
    /// Publication delay in the covariate's own high-frequency steps.
    #[serde(default)]
    pub release_lag: usize,
    /// Dictionary size L.
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub dict_size: Option<usize>,
    /// Lag window length in high-frequency steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Basis family; only `legendre` is shipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<String>,
}

/// Companion config mapping series names to roles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelSchema {
    pub target: String,
    #[serde(default)]
    pub covariates: BTreeMap<String, CovariateSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
}

impl PanelSchema {
    pub fn from_json_file(path: &Path) -> Result<PanelSchema> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug)]
struct RawRow {
    unit: String,
    date: String,
    series: String,
    freq: Freq,
    value: f64,
}

/// Load a long-format CSV (`unit,date,series,frequency,value`) guided by a
/// schema that assigns each series a role. Units and periods are sorted;
/// frequency ratios are inferred from observation counts; any gap inside
/// the sample range is an error.
pub fn load_panel_csv(path: &Path, schema: &PanelSchema) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    {
        let headers = reader.headers()?;
        let expected = ["unit", "date", "series", "frequency", "value"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::Schema(format!(
                "CSV header must be `unit,date,series,frequency,value`, found `{}`",
                got.join(",")
            )));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let freq = Freq::parse(&record[3])?;
        let value: f64 = record[4]
            .parse()
            .map_err(|_| Error::Schema(format!("unparseable value `{}`", &record[4])))?;
        rows.push(RawRow {
            unit: record[0].to_string(),
            date: record[1].to_string(),
            series: record[2].to_string(),
            freq,
            value,
        });
    }
    if rows.is_empty() {
        return Err(Error::Schema("CSV contains no data rows".into()));
    }

    let mut by_series: BTreeMap<String, Vec<&RawRow>> = BTreeMap::new();
    for row in &rows {
        by_series.entry(row.series.clone()).or_default().push(row);
    }
    for series in by_series.keys() {
        let known = *series == schema.target
            || schema.level.as_deref() == Some(series.as_str())
            || schema.covariates.contains_key(series);
        if !known {
            return Err(Error::Schema(format!(
                "series `{series}` has no role in the schema"
            )));
        }
    }

    let target_rows = by_series
        .get(&schema.target)
        .ok_or_else(|| Error::Schema(format!("target series `{}` missing", schema.target)))?;
    let target_freq = target_rows[0].freq;
    let unit_ids: Vec<String> = target_rows
        .iter()
        .map(|r| r.unit.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let (targets, time_index) =
        grid_series(target_rows, &unit_ids, target_freq, &schema.target, None)?;
    let t = time_index.len();

    let levels = match &schema.level {
        Some(name) => {
            let rows = by_series
                .get(name)
                .ok_or_else(|| Error::Schema(format!("level series `{name}` missing")))?;
            let (vals, idx) = grid_series(rows, &unit_ids, target_freq, name, Some(&time_index))?;
            debug_assert_eq!(idx, time_index);
            Some(vals)
        }
        None => None,
    };

    let mut covariates = Vec::new();
    for (name, cov_schema) in &schema.covariates {
        if let Some(family) = &cov_schema.dictionary {
            if family != "legendre" {
                return Err(Error::Schema(format!(
                    "covariate `{name}` asks for dictionary `{family}`; only `legendre` is available"
                )));
            }
        }
        let rows = by_series
            .get(name)
            .ok_or_else(|| Error::Schema(format!("covariate series `{name}` missing")))?;
        let freq = rows[0].freq;
        let (vals, idx) = grid_series(rows, &unit_ids, freq, name, None)?;
        let count = idx.len();
        if count % t != 0 {
            return Err(Error::Frequency(format!(
                "covariate `{name}` has {count} observations, not a multiple of T={t}"
            )));
        }
        let high_per_low = count / t;
        if high_per_low == 0 {
            return Err(Error::Frequency(format!(
                "covariate `{name}` is coarser than the target frequency"
            )));
        }
        // Calendar alignment is checkable for monthly covariates on a
        // quarterly target; W/D grids are accepted as equally spaced.
        if target_freq == Freq::Quarterly && freq == Freq::Monthly {
            if high_per_low != 3 {
                return Err(Error::Frequency(format!(
                    "monthly covariate `{name}` must have 3 observations per quarter, found {high_per_low}"
                )));
            }
            if idx[0] != time_index[0].first_month() {
                return Err(Error::Frequency(format!(
                    "covariate `{name}` starts at {} but the sample starts in {}",
                    idx[0], time_index[0]
                )));
            }
        }
        if freq == target_freq && high_per_low != 1 {
            return Err(Error::Frequency(format!(
                "covariate `{name}` shares the target frequency but spans {high_per_low} steps per period"
            )));
        }
        covariates.push(Covariate {
            name: name.clone(),
            values: vals,
            freq,
            high_per_low,
            start: idx[0],
            release_lag: cov_schema.release_lag,
            dict_size: cov_schema.dict_size,
            k_max: cov_schema.k_max,
        });
    }

    PanelDataset::new(unit_ids, time_index, targets, covariates, levels)
}

/// Arrange one series' rows on a dense (unit, period) grid, rejecting
/// duplicates, gaps and ragged units.
fn grid_series(
    rows: &[&RawRow],
    unit_ids: &[String],
    freq: Freq,
    series: &str,
    expect_index: Option<&[Period]>,
) -> Result<(Array2<f64>, Vec<Period>)> {
    let mut per_unit: BTreeMap<&str, BTreeMap<Period, f64>> = BTreeMap::new();
    for row in rows {
        if row.freq != freq {
            return Err(Error::Frequency(format!(
                "series `{series}` mixes {} and {} observations",
                freq, row.freq
            )));
        }
        let period = Period::parse(freq, &row.date)?;
        let unit_map = per_unit.entry(row.unit.as_str()).or_default();
        if unit_map.insert(period, row.value).is_some() {
            return Err(Error::Schema(format!(
                "duplicate observation for unit `{}`, series `{series}`, {period}",
                row.unit
            )));
        }
    }
    for unit in unit_ids {
        if !per_unit.contains_key(unit.as_str()) {
            return Err(Error::DataGap {
                unit: unit.clone(),
                series: series.to_string(),
                date: "entire sample".into(),
            });
        }
    }
    if per_unit.len() != unit_ids.len() {
        let extra = per_unit
            .keys()
            .find(|u| !unit_ids.iter().any(|k| k == *u))
            .unwrap();
        return Err(Error::Schema(format!(
            "series `{series}` has observations for unknown unit `{extra}`"
        )));
    }

    let first = *per_unit.values().flat_map(|m| m.keys()).min().unwrap();
    let last = *per_unit.values().flat_map(|m| m.keys()).max().unwrap();
    let len = last.steps_since(&first)? as usize + 1;
    let index = match expect_index {
        Some(idx) => {
            if first != idx[0] || len != idx.len() {
                return Err(Error::Frequency(format!(
                    "series `{series}` covers {first}..{last}, expected {}..{}",
                    idx[0],
                    idx[idx.len() - 1]
                )));
            }
            idx.to_vec()
        }
        None => consecutive_index(first, len),
    };

    let mut values = Array2::zeros((unit_ids.len(), len));
    for (i, unit) in unit_ids.iter().enumerate() {
        let unit_map = &per_unit[unit.as_str()];
        for (j, period) in index.iter().enumerate() {
            match unit_map.get(period) {
                Some(v) => values[(i, j)] = *v,
                None => {
                    return Err(Error::DataGap {
                        unit: unit.clone(),
                        series: series.to_string(),
                        date: period.to_string(),
                    })
                }
            }
        }
        if unit_map.len() != len {
            // A date off the common grid would have been caught by
            // steps_since; remaining surplus means ragged coverage.
            return Err(Error::DataGap {
                unit: unit.clone(),
                series: series.to_string(),
                date: "ragged coverage".into(),
            });
        }
    }
    Ok((values, index))
}

/// Write a dataset back to the long CSV format. Values print in Rust's
/// shortest round-trip notation, so `load_panel_csv` recovers them
/// bit-exactly.
pub fn write_panel_csv(ds: &PanelDataset, path: &Path, schema: &PanelSchema) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "unit,date,series,frequency,value")?;
    let freq = ds.time_index[0].freq;
    for (i, unit) in ds.unit_ids.iter().enumerate() {
        for (j, period) in ds.time_index.iter().enumerate() {
            writeln!(
                out,
                "{unit},{period},{},{},{}",
                schema.target,
                freq.code(),
                ds.targets[(i, j)]
            )?;
        }
        if let (Some(levels), Some(name)) = (&ds.levels, &schema.level) {
            for (j, period) in ds.time_index.iter().enumerate() {
                writeln!(
                    out,
                    "{unit},{period},{name},{},{}",
                    freq.code(),
                    levels[(i, j)]
                )?;
            }
        }
        for cov in &ds.covariates {
            let mut p = cov.start;
            for j in 0..cov.values.ncols() {
                writeln!(
                    out,
                    "{unit},{p},{},{},{}",
                    cov.name,
                    cov.freq.code(),
                    cov.values[(i, j)]
                )?;
                p = p.next();
            }
        }
    }
    out.flush()?;
    Ok(())
}
