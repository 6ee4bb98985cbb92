//! Five-fold cross-validation adapted to panels: the time dimension is cut
//! into contiguous blocks replicated across all cross-sectional units, so
//! entire time blocks are left out at once.

use super::path::{lambda_max_standardized, log_spaced_path};
use super::solver::StandardizedProblem;
use super::{GroupStructure, PenaltySpec, SgLassoFit, SolveOptions};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The 21-point mixing grid `0, 0.05, ..., 0.95, 1`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

/// Tuning-selection controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvConfig {
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "CvConfig::default_n_lambda")]
    pub n_lambda: usize,
    #[serde(default = "CvConfig::default_folds")]
    pub folds: usize,
}

impl CvConfig {
    fn default_n_lambda() -> usize {
        50
    }

    fn default_folds() -> usize {
        5
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() {
            return Err(Error::Config("empty gamma grid".into()));
        }
        if self.gamma_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::Config(
                "gamma grid entries must lie in [0, 1]".into(),
            ));
        }
        if self.n_lambda < 2 {
            return Err(Error::Config("n_lambda must be >= 2".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        Ok(())
    }
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            gamma_grid: default_gamma_grid(),
            n_lambda: Self::default_n_lambda(),
            folds: Self::default_folds(),
        }
    }
}

/// One point of the cross-validation error surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CvPoint {
    pub gamma: f64,
    pub lambda: f64,
    pub cv_mse: f64,
}

/// Selected tuning parameters, the error surface and the full-sample refit.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub best: PenaltySpec,
    pub surface: Vec<CvPoint>,
    pub fit: SgLassoFit,
}

impl CvResult {
    /// The error surface in CSV form (`gamma,lambda,cv_mse`).
    pub fn surface_csv(&self) -> String {
        let mut out = String::from("gamma,lambda,cv_mse\n");
        for point in &self.surface {
            out.push_str(&format!(
                "{},{},{}\n",
                point.gamma, point.lambda, point.cv_mse
            ));
        }
        out
    }
}

/// Assign the distinct sorted periods to contiguous fold blocks. The first
/// `n_periods % folds` blocks take one extra period.
pub fn contiguous_fold_blocks(periods: &[usize], folds: usize) -> Result<Vec<Vec<usize>>> {
    let mut distinct: Vec<usize> = periods.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < folds {
        return Err(Error::Fold(format!(
            "{} distinct periods cannot form {folds} folds",
            distinct.len()
        )));
    }
    let base = distinct.len() / folds;
    let extra = distinct.len() % folds;
    let mut blocks = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        blocks.push(distinct[start..start + size].to_vec());
        start += size;
    }
    Ok(blocks)
}

fn select_rows(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    rows: &[usize],
) -> (Array2<f64>, Array1<f64>) {
    let xs = x.select(Axis(0), rows);
    let ys = rows.iter().map(|&r| y[r]).collect::<Vec<f64>>();
    (xs, Array1::from(ys))
}

/// Cross-validate `(gamma, lambda)` on a panel design whose rows carry the
/// period of their target observation, then refit the winner on the full
/// sample. For each `gamma` the lambda grid descends from the full-sample
/// `lambda_max` to `10^-2 lambda_max`, traversed with warm starts.
pub fn panel_cv(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    row_periods: &[usize],
    groups: &GroupStructure,
    cfg: &CvConfig,
    opts: &SolveOptions,
) -> Result<CvResult> {
    cfg.validate()?;
    if row_periods.len() != design.nrows() {
        return Err(Error::Dimension(format!(
            "{} period labels for {} rows",
            row_periods.len(),
            design.nrows()
        )));
    }
    let blocks = contiguous_fold_blocks(row_periods, cfg.folds)?;
    let full = StandardizedProblem::new(design, y)?;

    // Row index sets per fold, replicated across units by construction.
    let fold_rows: Vec<(Vec<usize>, Vec<usize>)> = blocks
        .iter()
        .map(|block| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (r, p) in row_periods.iter().enumerate() {
                if block.contains(p) {
                    test.push(r);
                } else {
                    train.push(r);
                }
            }
            (train, test)
        })
        .collect();

    let gamma_results: Vec<Result<(Vec<f64>, Vec<f64>)>> = cfg
        .gamma_grid
        .par_iter()
        .map(|&gamma| {
            let lambda_max = lambda_max_standardized(&full, groups, gamma)?;
            let path = log_spaced_path(lambda_max, cfg.n_lambda);
            let mut sse = vec![0.0f64; path.len()];
            let mut count = vec![0usize; path.len()];
            for (train, test) in &fold_rows {
                let (xt, yt) = select_rows(design, y, train);
                let problem = StandardizedProblem::new(xt.view(), yt.view())?;
                let mut warm: Option<Array1<f64>> = None;
                for (k, &lambda) in path.iter().enumerate() {
                    let penalty = PenaltySpec::new(gamma, lambda)?;
                    let raw = problem.solve(groups, penalty, warm.as_ref(), opts)?;
                    for &r in test {
                        let pred = problem.predict_standardized(&raw.u, design.row(r));
                        let err = y[r] - pred;
                        sse[k] += err * err;
                    }
                    count[k] += test.len();
                    warm = Some(raw.u);
                }
            }
            let mse: Vec<f64> = sse.iter().zip(&count).map(|(s, c)| s / *c as f64).collect();
            Ok((path, mse))
        })
        .collect();

    let mut surface = Vec::with_capacity(cfg.gamma_grid.len() * cfg.n_lambda);
    for (gi, res) in gamma_results.into_iter().enumerate() {
        let (path, mse) = res?;
        let gamma = cfg.gamma_grid[gi];
        for (k, &lambda) in path.iter().enumerate() {
            surface.push(CvPoint {
                gamma,
                lambda,
                cv_mse: mse[k],
            });
        }
    }

    // Minimum CV error; ties within 1e-12 resolve to the largest lambda,
    // then the largest gamma (the sparser model).
    let mut best = surface[0];
    for point in &surface[1..] {
        let diff = point.cv_mse - best.cv_mse;
        if diff < -1e-12 {
            best = *point;
        } else if diff.abs() <= 1e-12 {
            let lambda_diff = point.lambda - best.lambda;
            if lambda_diff > 1e-12 * best.lambda.max(1.0)
                || (lambda_diff.abs() <= 1e-12 * best.lambda.max(1.0) && point.gamma > best.gamma)
            {
                best = *point;
            }
        }
    }

    let penalty = PenaltySpec::new(best.gamma, best.lambda)?;
    let raw = full.solve(groups, penalty, None, opts)?;
    let fit = full.finish_fit(raw, penalty);
    Ok(CvResult {
        best: penalty,
        surface,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_grid_is_21_points() {
        let grid = default_gamma_grid();
        assert_eq!(grid.len(), 21);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[20], 1.0);
        for (i, g) in grid.iter().enumerate() {
            assert_eq!(*g, i as f64 * 0.05);
        }
    }

    #[test]
    fn fold_blocks_are_contiguous_and_balanced() {
        let periods: Vec<usize> = (0..100).collect();
        let blocks = contiguous_fold_blocks(&periods, 5).unwrap();
        assert_eq!(blocks.len(), 5);
        for block in &blocks {
            assert_eq!(block.len(), 20);
            for w in block.windows(2) {
                assert_eq!(w[1], w[0] + 1);
            }
        }
        // Remainder spreads over the leading folds.
        let blocks = contiguous_fold_blocks(&(0..13).collect::<Vec<_>>(), 5).unwrap();
        let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![3, 3, 3, 2, 2]);
    }

    #[test]
    fn too_few_periods_is_a_fold_error() {
        let periods = vec![0, 1, 2];
        assert!(matches!(
            contiguous_fold_blocks(&periods, 5),
            Err(Error::Fold(_))
        ));
    }

    #[test]
    fn cv_is_deterministic_and_selects_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n_periods = 30;
        let n_units = 2;
        let p = 6;
        let mut x = Array2::zeros((n_units * n_periods, p));
        let mut y = Array1::zeros(n_units * n_periods);
        let mut periods = Vec::new();
        for i in 0..n_units {
            for t in 0..n_periods {
                let r = i * n_periods + t;
                for j in 0..p {
                    x[(r, j)] = rng.gen_range(-1.0..1.0);
                }
                y[r] = 1.5 * x[(r, 0)] + 0.1 * rng.gen_range(-1.0..1.0);
                periods.push(t);
            }
        }
        let groups = GroupStructure::singletons(p);
        let cfg = CvConfig {
            gamma_grid: vec![0.5, 1.0],
            n_lambda: 12,
            folds: 5,
        };
        let opts = SolveOptions::default();
        let a = panel_cv(x.view(), y.view(), &periods, &groups, &cfg, &opts).unwrap();
        let b = panel_cv(x.view(), y.view(), &periods, &groups, &cfg, &opts).unwrap();
        assert_eq!(a.best.gamma, b.best.gamma);
        assert_eq!(a.best.lambda, b.best.lambda);
        assert_eq!(a.fit.coefficients, b.fit.coefficients);
        // The signal coefficient survives selection.
        assert!(a.fit.coefficients[0].abs() > 0.5);
        // The exported surface covers the whole grid.
        let csv = a.surface_csv();
        assert_eq!(csv.lines().count(), 1 + 2 * 12);
        assert!(csv.starts_with("gamma,lambda,cv_mse\n"));
    }
}
