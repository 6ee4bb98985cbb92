//! Regularization path construction.

use super::prox::soft_threshold;
use super::solver::StandardizedProblem;
use super::GroupStructure;
use crate::error::{Error, Result};
use ndarray::{ArrayView1, ArrayView2};

/// Smallest penalty that keeps one group entirely at zero: the scalar
/// `lambda` solving `|soft(c_G, gamma lambda)|_2 = (1 - gamma) lambda`
/// for the group correlations `c_G = Z_G' y / NT`.
fn group_lambda_max(c: &[f64], gamma: f64) -> f64 {
    let linf = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if linf == 0.0 {
        return 0.0;
    }
    if gamma >= 1.0 {
        return linf;
    }
    let l2 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gamma <= 0.0 {
        return l2;
    }
    // h(lambda) = |soft(c, gamma lambda)|_2 - (1 - gamma) lambda is strictly
    // decreasing, positive at 0 and negative at linf / gamma.
    let h = |lambda: f64| {
        let s = c
            .iter()
            .map(|&v| {
                let t = soft_threshold(v, gamma * lambda);
                t * t
            })
            .sum::<f64>()
            .sqrt();
        s - (1.0 - gamma) * lambda
    };
    let mut lo = 0.0;
    let mut hi = linf / gamma;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub(crate) fn lambda_max_standardized(
    problem: &StandardizedProblem,
    groups: &GroupStructure,
    gamma: f64,
) -> Result<f64> {
    let c = problem.correlation();
    if problem.y.iter().all(|v| v.abs() < f64::EPSILON) {
        return Err(Error::DegeneratePath(
            "response is constant after demeaning".into(),
        ));
    }
    let lambda_max = groups
        .groups()
        .iter()
        .map(|g| {
            let cg: Vec<f64> = g.iter().map(|&j| c[j]).collect();
            group_lambda_max(&cg, gamma)
        })
        .fold(0.0f64, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::DegeneratePath(
            "all columns are uncorrelated with the response".into(),
        ));
    }
    Ok(lambda_max)
}

pub(crate) fn log_spaced_path(lambda_max: f64, n_points: usize) -> Vec<f64> {
    let span = -2.0; // path ends at lambda_max * 10^-2
    (0..n_points)
        .map(|i| lambda_max * 10f64.powf(span * i as f64 / (n_points - 1) as f64))
        .collect()
}

/// Descending log-spaced penalty grid from `lambda_max` (all-zero fit) down
/// to `10^-2 lambda_max`.
pub fn lambda_path(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    groups: &GroupStructure,
    gamma: f64,
    n_points: usize,
) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::Config("lambda path needs at least 2 points".into()));
    }
    let problem = StandardizedProblem::new(design, y)?;
    let lambda_max = lambda_max_standardized(&problem, groups, gamma)?;
    Ok(log_spaced_path(lambda_max, n_points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sglasso::{sg_lasso_fit, PenaltySpec, SolveOptions};
    use ndarray::{Array1, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn standardized_random(n: usize, p: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::from_shape_fn((n, p), |_| rng.gen_range(-1.0..1.0));
        let nf = n as f64;
        for j in 0..p {
            let mean = x.column(j).sum() / nf;
            x.column_mut(j).mapv_inplace(|v| v - mean);
            let sd = (x.column(j).dot(&x.column(j)) / nf).sqrt();
            x.column_mut(j).mapv_inplace(|v| v / sd);
        }
        let y = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        (x, y)
    }

    #[test]
    fn pure_lasso_lambda_max_closed_form() {
        let (x, y) = standardized_random(30, 4, 21);
        let groups = GroupStructure::singletons(4);
        let path = lambda_path(x.view(), y.view(), &groups, 1.0, 10).unwrap();
        let n = 30.0;
        let ybar = y.sum() / n;
        let yc = y.mapv(|v| v - ybar);
        let expected = (0..4)
            .map(|j| (x.column(j).dot(&yc) / n).abs())
            .fold(0.0f64, f64::max);
        assert!((path[0] - expected).abs() < 1e-12 * expected.max(1.0));
        // The fit at the path origin has no active coefficients.
        let fit = sg_lasso_fit(
            x.view(),
            y.view(),
            &groups,
            PenaltySpec::new(1.0, path[0]).unwrap(),
            None,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(fit.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn path_ratios_are_constant() {
        let (x, y) = standardized_random(25, 3, 22);
        let groups = GroupStructure::singletons(3);
        let path = lambda_path(x.view(), y.view(), &groups, 0.5, 17).unwrap();
        let r0 = path[1] / path[0];
        for w in path.windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-12);
        }
        assert!((path[path.len() - 1] / path[0] - 1e-2).abs() < 1e-12);
    }

    #[test]
    fn bisection_matches_fit_based_search() {
        // Find the zero boundary by bisecting on "does the fit stay at
        // zero", and compare with the analytic lambda_max.
        let (x, y) = standardized_random(20, 4, 23);
        let groups = GroupStructure::new(vec![vec![0, 1, 2, 3]], 4).unwrap();
        let gamma = 0.5;
        let path = lambda_path(x.view(), y.view(), &groups, gamma, 5).unwrap();
        let lambda_max = path[0];

        let all_zero = |lambda: f64| {
            let fit = sg_lasso_fit(
                x.view(),
                y.view(),
                &groups,
                PenaltySpec::new(gamma, lambda).unwrap(),
                None,
                &SolveOptions {
                    tol: 1e-12,
                    ..Default::default()
                },
            )
            .unwrap();
            fit.coefficients.iter().all(|&c| c == 0.0)
        };
        let mut lo = 0.5 * lambda_max;
        let mut hi = 1.5 * lambda_max;
        assert!(!all_zero(lo));
        assert!(all_zero(hi));
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if all_zero(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((hi - lambda_max).abs() <= 1e-8 * lambda_max.max(1.0));
    }

    #[test]
    fn degenerate_response_errors() {
        let (x, _) = standardized_random(10, 2, 24);
        let y = Array1::from_elem(10, 3.25);
        let groups = GroupStructure::singletons(2);
        assert!(matches!(
            lambda_path(x.view(), y.view(), &groups, 1.0, 5),
            Err(Error::DegeneratePath(_))
        ));
    }
}
