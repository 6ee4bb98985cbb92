//! Dictionary construction and compression of high-frequency lag windows.
//!
//! Each covariate's `k_max` high-frequency lags are compressed into `L`
//! reduced regressors through a matrix of orthonormalized shifted Legendre
//! polynomials, which removes the frequency mismatch between target and
//! covariates.

use crate::error::{Error, Result};
use crate::panel::{Covariate, NowcastClock, PanelDataset};
use crate::sglasso::GroupStructure;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Default dictionary size.
pub const DEFAULT_DICT_SIZE: usize = 3;
/// Default lag window in target periods (one year of quarters).
pub const DEFAULT_LOW_LAGS: usize = 4;

/// A dictionary of `size` basis functions on the domain `[0, domain]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionarySpec {
    pub size: usize,
    pub domain: f64,
}

impl DictionarySpec {
    pub fn new(size: usize, domain: f64) -> Result<DictionarySpec> {
        if size == 0 {
            return Err(Error::Config("dictionary size must be >= 1".into()));
        }
        if domain.is_nan() || domain <= 0.0 {
            return Err(Error::Config("dictionary domain must be positive".into()));
        }
        Ok(DictionarySpec { size, domain })
    }

    /// Dictionary settings for one covariate: `L` columns over a window of
    /// `k_max` high-frequency steps, with module defaults where the
    /// covariate declares none.
    pub fn for_covariate(cov: &Covariate) -> Result<(DictionarySpec, usize)> {
        let k_max = cov.k_max.unwrap_or(DEFAULT_LOW_LAGS * cov.high_per_low);
        let size = cov.dict_size.unwrap_or(DEFAULT_DICT_SIZE);
        if k_max == 0 {
            return Err(Error::Config(format!(
                "covariate `{}` has k_max = 0",
                cov.name
            )));
        }
        if size > k_max {
            return Err(Error::Config(format!(
                "covariate `{}` asks for {size} dictionary columns over a window of {k_max} lags",
                cov.name
            )));
        }
        let spec = DictionarySpec::new(size, k_max as f64 / cov.high_per_low as f64)?;
        Ok((spec, k_max))
    }
}

/// Basis functions evaluated on a lag grid, one row per lag and one column
/// per function.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryMatrix {
    pub values: Array2<f64>,
}

/// Orthonormal shifted Legendre value `w_l(s)` on `[0, 1]`:
/// `sqrt(2l + 1) P_l(2s - 1)` with the three-term recurrence for `P_l`.
fn legendre_orthonormal(l: usize, s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    let mut p_prev = 1.0;
    let mut p_curr = x;
    let p = match l {
        0 => 1.0,
        1 => x,
        _ => {
            for k in 1..l {
                let p_next = ((2 * k + 1) as f64 * x * p_curr - k as f64 * p_prev) / (k + 1) as f64;
                p_prev = p_curr;
                p_curr = p_next;
            }
            p_curr
        }
    };
    (2.0 * l as f64 + 1.0).sqrt() * p
}

/// Evaluate the orthonormalized shifted Legendre dictionary at the given
/// points of `[0, domain]`. The domain is rescaled to `[0, 1]` before
/// evaluation; `w_0` is identically one.
pub fn shifted_legendre(spec: &DictionarySpec, points: &[f64]) -> Result<DictionaryMatrix> {
    for &p in points {
        if !(0.0..=spec.domain).contains(&p) {
            return Err(Error::Domain(format!(
                "point {p} outside the dictionary domain [0, {}]",
                spec.domain
            )));
        }
    }
    let mut values = Array2::zeros((points.len(), spec.size));
    for (i, &p) in points.iter().enumerate() {
        let s = p / spec.domain;
        for l in 0..spec.size {
            values[(i, l)] = legendre_orthonormal(l, s);
        }
    }
    Ok(DictionaryMatrix { values })
}

/// Dictionary matrix on the lag grid `j / high_per_low`, `j = 0..k_max-1`.
pub fn lag_dictionary(
    spec: &DictionarySpec,
    k_max: usize,
    high_per_low: usize,
) -> Result<DictionaryMatrix> {
    let points: Vec<f64> = (0..k_max).map(|j| j as f64 / high_per_low as f64).collect();
    shifted_legendre(spec, &points)
}

/// Compress a lag window: `r_l = (1 / k_max) sum_j W[j, l] x[j]`.
pub fn compress_window(x: &[f64], dict: &DictionaryMatrix) -> Result<Vec<f64>> {
    let k_max = dict.values.nrows();
    if x.len() != k_max {
        return Err(Error::Dimension(format!(
            "window of {} values for a {k_max}-row dictionary",
            x.len()
        )));
    }
    let l = dict.values.ncols();
    let mut out = vec![0.0; l];
    for (j, &xj) in x.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            *o += dict.values[(j, c)] * xj;
        }
    }
    for o in &mut out {
        *o /= k_max as f64;
    }
    Ok(out)
}

/// How autoregressive lags enter a stacked panel design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArLayout {
    /// One shared column per lag order, each its own group.
    Pooled,
    /// A block of `Q` columns per unit, grouped by unit.
    PerUnit,
}

/// A stacked estimation-ready design: rows are unit-major, time-minor.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    /// `(unit index, target period index)` per row.
    pub rows: Vec<(usize, usize)>,
    pub groups: GroupStructure,
    pub group_names: Vec<String>,
}

impl DesignMatrix {
    pub fn row_periods(&self) -> Vec<usize> {
        self.rows.iter().map(|&(_, t)| t).collect()
    }
}

/// Per-covariate dictionaries resolved once per dataset.
pub(crate) struct CovariateDictionaries {
    pub dicts: Vec<DictionaryMatrix>,
    pub k_max: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl CovariateDictionaries {
    pub fn resolve(ds: &PanelDataset) -> Result<CovariateDictionaries> {
        let mut dicts = Vec::with_capacity(ds.covariates.len());
        let mut k_max = Vec::with_capacity(ds.covariates.len());
        let mut sizes = Vec::with_capacity(ds.covariates.len());
        for cov in &ds.covariates {
            let (spec, k) = DictionarySpec::for_covariate(cov)?;
            dicts.push(lag_dictionary(&spec, k, cov.high_per_low)?);
            k_max.push(k);
            sizes.push(spec.size);
        }
        Ok(CovariateDictionaries {
            dicts,
            k_max,
            sizes,
        })
    }

    pub fn total_columns(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// Compressed covariate block of one unit at one clock.
pub(crate) fn covariate_row(
    ds: &PanelDataset,
    dicts: &CovariateDictionaries,
    unit: usize,
    clock: &NowcastClock,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dicts.total_columns());
    for (k, dict) in dicts.dicts.iter().enumerate() {
        let window = ds.extract_window(unit, k, clock, dicts.k_max[k])?;
        out.extend(compress_window(&window, dict)?);
    }
    Ok(out)
}

/// Autoregressive lags of the target available at the clock's cutoff:
/// the `q` most recent target values before the cutoff period.
pub(crate) fn ar_row(
    ds: &PanelDataset,
    unit: usize,
    clock: &NowcastClock,
    q: usize,
) -> Result<Vec<f64>> {
    let base = clock.cutoff_period as i64 - 1;
    if q > 0 && base - (q as i64 - 1) < 0 {
        return Err(Error::InsufficientHistory(format!(
            "{q} autoregressive lags unavailable before period index {}",
            clock.cutoff_period
        )));
    }
    Ok((0..q)
        .map(|lag| ds.targets[(unit, (base - lag as i64) as usize)])
        .collect())
}

/// Build the stacked design for the given units and clock schedule.
///
/// Columns are `[AR lags | covariate blocks]`; each covariate's `L`
/// compressed columns form one penalty group, and AR lags are grouped
/// according to `ar_layout`.
pub fn build_design(
    ds: &PanelDataset,
    units: &[usize],
    schedule: &[NowcastClock],
    q: usize,
    ar_layout: ArLayout,
) -> Result<DesignMatrix> {
    if schedule.is_empty() {
        return Err(Error::InsufficientHistory(
            "empty estimation schedule".into(),
        ));
    }
    let dicts = CovariateDictionaries::resolve(ds)?;
    let n_units = units.len();
    let ar_cols = match ar_layout {
        ArLayout::Pooled => q,
        ArLayout::PerUnit => n_units * q,
    };
    let cov_cols = dicts.total_columns();
    let n_rows = n_units * schedule.len();
    let mut x = Array2::zeros((n_rows, ar_cols + cov_cols));
    let mut y = Array1::zeros(n_rows);
    let mut rows = Vec::with_capacity(n_rows);

    for (ui, &unit) in units.iter().enumerate() {
        for (si, clock) in schedule.iter().enumerate() {
            let r = ui * schedule.len() + si;
            let lags = ar_row(ds, unit, clock, q)?;
            let offset = match ar_layout {
                ArLayout::Pooled => 0,
                ArLayout::PerUnit => ui * q,
            };
            for (l, v) in lags.into_iter().enumerate() {
                x[(r, offset + l)] = v;
            }
            let cov = covariate_row(ds, &dicts, unit, clock)?;
            for (c, v) in cov.into_iter().enumerate() {
                x[(r, ar_cols + c)] = v;
            }
            if clock.target_period >= ds.n_periods() {
                return Err(Error::InsufficientHistory(format!(
                    "target period {} outside the sample",
                    clock.target_period
                )));
            }
            y[r] = ds.targets[(unit, clock.target_period)];
            rows.push((unit, clock.target_period));
        }
    }

    let mut groups = Vec::new();
    let mut group_names = Vec::new();
    match ar_layout {
        ArLayout::Pooled => {
            for lag in 0..q {
                groups.push(vec![lag]);
                group_names.push(format!("ar_lag{}", lag + 1));
            }
        }
        ArLayout::PerUnit => {
            for (ui, &unit) in units.iter().enumerate() {
                if q > 0 {
                    groups.push((ui * q..(ui + 1) * q).collect());
                    group_names.push(format!("{}:ar", ds.unit_ids[unit]));
                }
            }
        }
    }
    let mut col = ar_cols;
    for (k, cov) in ds.covariates.iter().enumerate() {
        groups.push((col..col + dicts.sizes[k]).collect());
        group_names.push(cov.name.clone());
        col += dicts.sizes[k];
    }
    let groups = GroupStructure::new(groups, ar_cols + cov_cols)?;

    Ok(DesignMatrix {
        x,
        y,
        rows,
        groups,
        group_names,
    })
}

/// One design row for the aggregate-on-components family: the units'
/// weight-scaled blocks of AR lags and covariates, concatenated.
pub(crate) fn weighted_components_row(
    ds: &PanelDataset,
    dicts: &CovariateDictionaries,
    clock: &NowcastClock,
    q: usize,
    weights: &[f64],
) -> Result<Vec<f64>> {
    let block = q + dicts.total_columns();
    let mut row = vec![0.0; ds.n_units() * block];
    for (ui, &w) in weights.iter().enumerate() {
        let lags = ar_row(ds, ui, clock, q)?;
        for (l, v) in lags.into_iter().enumerate() {
            row[ui * block + l] = w * v;
        }
        let cov = covariate_row(ds, dicts, ui, clock)?;
        for (c, v) in cov.into_iter().enumerate() {
            row[ui * block + q + c] = w * v;
        }
    }
    Ok(row)
}

/// Design for the aggregate-on-components family: the response is the
/// weighted aggregate target and each unit contributes its own
/// weight-scaled block of AR lags and covariates.
pub fn build_weighted_components_design(
    ds: &PanelDataset,
    schedule: &[NowcastClock],
    q: usize,
    weights: &[f64],
) -> Result<DesignMatrix> {
    if weights.len() != ds.n_units() {
        return Err(Error::Dimension(format!(
            "{} weights for {} units",
            weights.len(),
            ds.n_units()
        )));
    }
    if schedule.is_empty() {
        return Err(Error::InsufficientHistory(
            "empty estimation schedule".into(),
        ));
    }
    let dicts = CovariateDictionaries::resolve(ds)?;
    let n = ds.n_units();
    let block = q + dicts.total_columns();
    let mut x = Array2::zeros((schedule.len(), n * block));
    let mut y = Array1::zeros(schedule.len());
    let mut rows = Vec::with_capacity(schedule.len());

    for (r, clock) in schedule.iter().enumerate() {
        let row = weighted_components_row(ds, &dicts, clock, q, weights)?;
        for (c, v) in row.into_iter().enumerate() {
            x[(r, c)] = v;
        }
        for (ui, &w) in weights.iter().enumerate() {
            y[r] += w * ds.targets[(ui, clock.target_period)];
        }
        rows.push((0, clock.target_period));
    }

    let mut groups = Vec::new();
    let mut group_names = Vec::new();
    for ui in 0..n {
        if q > 0 {
            groups.push((ui * block..ui * block + q).collect());
            group_names.push(format!("{}:ar", ds.unit_ids[ui]));
        }
        let mut col = ui * block + q;
        for (k, cov) in ds.covariates.iter().enumerate() {
            groups.push((col..col + dicts.sizes[k]).collect());
            group_names.push(format!("{}:{}", ds.unit_ids[ui], cov.name));
            col += dicts.sizes[k];
        }
    }
    let groups = GroupStructure::new(groups, n * block)?;

    Ok(DesignMatrix {
        x,
        y,
        rows,
        groups,
        group_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::period::{consecutive_index, Freq, Period};
    use ndarray::Array2;

    #[test]
    fn degree_zero_basis_is_ones() {
        let spec = DictionarySpec::new(1, 1.0).unwrap();
        let dict = shifted_legendre(&spec, &[0.0, 0.3, 1.0]).unwrap();
        for i in 0..3 {
            assert_eq!(dict.values[(i, 0)], 1.0);
        }
    }

    #[test]
    fn first_degree_vanishes_at_midpoint() {
        let spec = DictionarySpec::new(2, 1.0).unwrap();
        let dict = shifted_legendre(&spec, &[0.5]).unwrap();
        assert_eq!(dict.values[(0, 0)], 1.0);
        assert!(dict.values[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn gram_matrix_is_identity_on_fine_grid() {
        // Quadrature oracle: midpoint sums over 1e5 points approximate the
        // continuous inner products far below the 1e-4 target.
        let l = 3;
        let spec = DictionarySpec::new(l, 1.0).unwrap();
        let g = 100_000;
        let points: Vec<f64> = (0..g).map(|i| (i as f64 + 0.5) / g as f64).collect();
        let dict = shifted_legendre(&spec, &points).unwrap();
        for a in 0..l {
            for b in 0..l {
                let s: f64 = (0..g)
                    .map(|i| dict.values[(i, a)] * dict.values[(i, b)])
                    .sum::<f64>()
                    / g as f64;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((s - expected).abs() < 1e-4, "gram[{a},{b}] = {s}");
            }
        }
    }

    #[test]
    fn point_outside_domain_errors() {
        let spec = DictionarySpec::new(2, 4.0).unwrap();
        assert!(matches!(
            shifted_legendre(&spec, &[4.5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn compress_with_constant_dictionary_averages() {
        let spec = DictionarySpec::new(1, 1.0).unwrap();
        let dict = lag_dictionary(&spec, 4, 4).unwrap();
        let r = compress_window(&[1.0, 2.0, 3.0, 6.0], &dict).unwrap();
        assert_eq!(r, vec![3.0]);
        let z = compress_window(&[0.0; 4], &dict).unwrap();
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn compress_constant_window_matches_direct_sums() {
        let k_max = 12;
        let spec = DictionarySpec::new(2, 1.0).unwrap();
        let dict = lag_dictionary(&spec, k_max, k_max).unwrap();
        let c = 2.75;
        let window = vec![c; k_max];
        let r = compress_window(&window, &dict).unwrap();
        assert!((r[0] - c).abs() < 1e-12);
        // Direct-sum oracle for the first-degree coordinate.
        let direct: f64 = (0..k_max).map(|j| dict.values[(j, 1)] * c).sum::<f64>() / k_max as f64;
        assert!((r[1] - direct).abs() < 1e-6);
    }

    #[test]
    fn compress_length_mismatch_errors() {
        let spec = DictionarySpec::new(2, 1.0).unwrap();
        let dict = lag_dictionary(&spec, 6, 6).unwrap();
        assert!(matches!(
            compress_window(&[1.0; 5], &dict),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn compression_is_linear() {
        let spec = DictionarySpec::new(3, 1.0).unwrap();
        let dict = lag_dictionary(&spec, 9, 9).unwrap();
        let x: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let z: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).cos()).collect();
        let (a, b) = (1.3, -0.4);
        let combo: Vec<f64> = x.iter().zip(&z).map(|(xv, zv)| a * xv + b * zv).collect();
        let rx = compress_window(&x, &dict).unwrap();
        let rz = compress_window(&z, &dict).unwrap();
        let rc = compress_window(&combo, &dict).unwrap();
        for l in 0..3 {
            assert!((rc[l] - (a * rx[l] + b * rz[l])).abs() < 1e-12);
        }
    }

    fn test_panel(n: usize, t: usize, k: usize) -> PanelDataset {
        let q1 = Period::quarterly(2000, 1);
        let time_index = consecutive_index(q1, t);
        let targets = Array2::from_shape_fn((n, t), |(i, j)| (i + 1) as f64 * 0.1 + j as f64);
        let covariates = (0..k)
            .map(|c| Covariate {
                name: format!("x{c}"),
                values: Array2::from_shape_fn((n, t * 3), |(i, j)| {
                    ((i + 1) * (c + 2)) as f64 * 0.01 * (j as f64 + 1.0).ln()
                }),
                freq: Freq::Monthly,
                high_per_low: 3,
                start: q1.first_month(),
                release_lag: 0,
                dict_size: Some(3),
                k_max: Some(6),
            })
            .collect();
        PanelDataset::new(
            (0..n).map(|i| format!("U{i}")).collect(),
            time_index,
            targets,
            covariates,
            None,
        )
        .unwrap()
    }

    #[test]
    fn design_shapes_and_groups() {
        let ds = test_panel(2, 14, 3);
        let schedule: Vec<NowcastClock> = (4..14).map(NowcastClock::end_of).collect();
        let design = build_design(&ds, &[0, 1], &schedule, 1, ArLayout::Pooled).unwrap();
        assert_eq!(design.x.nrows(), 20);
        assert_eq!(design.x.ncols(), 1 + 9);
        // 1 pooled AR group + 3 covariate groups.
        assert_eq!(design.groups.n_groups(), 4);

        let per_unit = build_design(&ds, &[0, 1], &schedule, 1, ArLayout::PerUnit).unwrap();
        assert_eq!(per_unit.x.ncols(), 2 + 9);
        assert_eq!(per_unit.groups.n_groups(), 2 + 3);

        let no_ar = build_design(&ds, &[0, 1], &schedule, 0, ArLayout::Pooled).unwrap();
        assert_eq!(no_ar.x.ncols(), 9);
        assert_eq!(no_ar.groups.n_groups(), 3);
    }

    #[test]
    fn weighted_components_design_shapes() {
        let ds = test_panel(2, 14, 3);
        let schedule: Vec<NowcastClock> = (4..14).map(NowcastClock::end_of).collect();
        let design = build_weighted_components_design(&ds, &schedule, 1, &[0.5, 0.5]).unwrap();
        assert_eq!(design.x.nrows(), 10);
        assert_eq!(design.x.ncols(), 2 * (1 + 9));
        assert_eq!(design.groups.n_groups(), 2 * 4);
        // Zero weight blanks the unit's columns.
        let zero = build_weighted_components_design(&ds, &schedule, 1, &[1.0, 0.0]).unwrap();
        for r in 0..zero.x.nrows() {
            for c in 10..20 {
                assert_eq!(zero.x[(r, c)], 0.0);
            }
        }
    }
}
