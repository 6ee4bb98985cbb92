//! Proximal gradient solver with backtracking line search.

use super::prox::{sg_prox_inplace, soft_threshold};
use super::{penalty_value, GroupStructure, PenaltySpec};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// Solver controls. The tolerance is relative to the gradient scale of
/// the problem at the zero coefficient vector.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

/// A fitted sparse-group LASSO regression.
///
/// Coefficients are reported on the original column scale; `centers` and
/// `scales` record the standardization applied internally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgLassoFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub penalty: PenaltySpec,
    /// Final value of the standardized objective.
    pub objective: f64,
    /// Largest stationarity violation at the returned iterate.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    pub y_mean: f64,
}

impl SgLassoFit {
    /// Linear prediction `intercept + x . coefficients`.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        self.intercept
            + x.iter()
                .zip(&self.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// Indices of groups with at least one nonzero coefficient.
    pub fn active_groups(&self, groups: &GroupStructure) -> Vec<usize> {
        groups
            .groups()
            .iter()
            .enumerate()
            .filter(|(_, g)| g.iter().any(|&j| self.coefficients[j] != 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Design standardized to zero-mean unit-variance columns (population
/// variance over the NT rows), with the response centered. Shared by the
/// fit, path and cross-validation routines so all of them see the same
/// penalty scale.
pub(crate) struct StandardizedProblem {
    pub z: Array2<f64>,
    pub y: Array1<f64>,
    pub centers: Array1<f64>,
    pub scales: Array1<f64>,
    pub y_mean: f64,
    pub nt: f64,
    lipschitz: f64,
    grad_scale: f64,
}

impl StandardizedProblem {
    pub fn new(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<StandardizedProblem> {
        let (n, p) = x.dim();
        if n == 0 {
            return Err(Error::Dimension("design has no rows".into()));
        }
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "{} responses for {n} design rows",
                y.len()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(
                "non-finite value in design or response".into(),
            ));
        }
        let nt = n as f64;
        let y_mean = y.sum() / nt;
        let yc = y.mapv(|v| v - y_mean);

        let mut z = x.to_owned();
        let mut centers = Array1::zeros(p);
        let mut scales = Array1::ones(p);
        for j in 0..p {
            let mut col = z.column_mut(j);
            let mean = col.sum() / nt;
            col.mapv_inplace(|v| v - mean);
            let var = col.iter().map(|v| v * v).sum::<f64>() / nt;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            col.mapv_inplace(|v| v / scale);
            centers[j] = mean;
            scales[j] = scale;
        }

        // Gradient scale at u = 0 anchors the relative stopping rule.
        let g0 = z.t().dot(&yc).mapv(|v| 2.0 * v / nt);
        let grad_scale = g0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let lipschitz = lipschitz_bound(&z, nt);

        Ok(StandardizedProblem {
            z,
            y: yc,
            centers,
            scales,
            y_mean,
            nt,
            lipschitz,
            grad_scale,
        })
    }

    /// Group-wise inner products `Z_G' y / NT` used by the path origin.
    pub fn correlation(&self) -> Array1<f64> {
        self.z.t().dot(&self.y).mapv(|v| v / self.nt)
    }

    /// Solve at one penalty, warm-started from `u0` (standardized scale).
    pub fn solve(
        &self,
        groups: &GroupStructure,
        penalty: PenaltySpec,
        u0: Option<&Array1<f64>>,
        opts: &SolveOptions,
    ) -> Result<RawSolution> {
        self.solve_inner(groups, penalty, u0, opts, false)
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn solve_traced(
        &self,
        groups: &GroupStructure,
        penalty: PenaltySpec,
        opts: &SolveOptions,
    ) -> Result<RawSolution> {
        self.solve_inner(groups, penalty, None, opts, true)
    }

    /// Working-set proximal gradient: solve restricted to the active
    /// groups, verify the stationarity conditions on the full problem,
    /// grow the set by the violating groups and repeat. The returned
    /// iterate always satisfies the full-problem tolerance.
    fn solve_inner(
        &self,
        groups: &GroupStructure,
        penalty: PenaltySpec,
        u0: Option<&Array1<f64>>,
        opts: &SolveOptions,
        trace: bool,
    ) -> Result<RawSolution> {
        let p = self.z.ncols();
        if groups.n_cols() != p {
            return Err(Error::Dimension(format!(
                "group structure covers {} columns, design has {p}",
                groups.n_cols()
            )));
        }
        let gamma = penalty.gamma;
        let lambda = penalty.lambda;
        let tol = opts.tol * self.grad_scale;

        let mut u = match u0 {
            Some(w) => {
                debug_assert_eq!(w.len(), p);
                w.clone()
            }
            None => Array1::zeros(p),
        };
        if p == 0 {
            return Ok(RawSolution {
                u,
                iterations: 0,
                kkt_residual: 0.0,
                objective: self.y.dot(&self.y) / self.nt,
                objective_trace: None,
            });
        }

        let group_list = groups.groups();
        let mut in_set: Vec<bool> = group_list
            .iter()
            .map(|g| g.iter().any(|&j| u[j] != 0.0))
            .collect();
        let mut iterations = 0usize;
        let mut trace_values = trace.then(Vec::new);

        loop {
            // Restricted subproblem over the working-set columns. The
            // columns are shares of the already-standardized design, so
            // the full-problem Lipschitz bound stays valid.
            let active: Vec<usize> = (0..group_list.len()).filter(|&g| in_set[g]).collect();
            let cols: Vec<usize> = active
                .iter()
                .flat_map(|&g| group_list[g].iter().copied())
                .collect();
            if !cols.is_empty() {
                let zs = self.z.select(ndarray::Axis(1), &cols);
                let mut sub_groups = Vec::new();
                let mut offset = 0;
                for &g in &active {
                    let len = group_list[g].len();
                    sub_groups.push((offset..offset + len).collect::<Vec<usize>>());
                    offset += len;
                }
                let sub_groups = GroupStructure::new(sub_groups, cols.len())?;
                let mut us = Array1::from(cols.iter().map(|&j| u[j]).collect::<Vec<f64>>());
                let budget = opts.max_iter - iterations;
                // Slightly tighter inner tolerance so rounding in the full
                // recheck cannot strand a converged subproblem.
                let used = self.prox_gradient(
                    &zs,
                    &sub_groups,
                    gamma,
                    lambda,
                    &mut us,
                    0.9 * tol,
                    budget,
                    trace_values.as_mut(),
                )?;
                iterations += used;
                for (k, &j) in cols.iter().enumerate() {
                    u[j] = us[k];
                }
            }

            // Full-problem stationarity check.
            let residual = self.z.dot(&u) - &self.y;
            let grad = self.z.t().dot(&residual).mapv(|v| 2.0 * v / self.nt);
            let kkt = kkt_residual(&u, &grad, gamma, lambda, groups);
            if kkt <= tol {
                let f = residual.dot(&residual) / self.nt;
                let objective =
                    f + 2.0 * lambda * penalty_value(u.as_slice().unwrap(), gamma, groups);
                if let Some(t) = trace_values.as_mut() {
                    t.push(objective);
                }
                return Ok(RawSolution {
                    u,
                    iterations,
                    kkt_residual: kkt,
                    objective,
                    objective_trace: trace_values,
                });
            }
            if iterations >= opts.max_iter {
                return Err(Error::Convergence {
                    iterations,
                    residual: kkt,
                    last_iterate: self.map_back(&u).1,
                });
            }

            // Admit every group violating the inactive-side condition.
            let a = 2.0 * lambda * gamma;
            let b = 2.0 * lambda * (1.0 - gamma);
            let mut grew = false;
            for (gi, group) in group_list.iter().enumerate() {
                if in_set[gi] {
                    continue;
                }
                let s = group
                    .iter()
                    .map(|&j| {
                        let v = soft_threshold(grad[j], a);
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt();
                if s - b > tol {
                    in_set[gi] = true;
                    grew = true;
                }
            }
            if !grew {
                // Violations sit inside the working set: the subproblem
                // budget ran out before reaching the tolerance.
                return Err(Error::Convergence {
                    iterations,
                    residual: kkt,
                    last_iterate: self.map_back(&u).1,
                });
            }
        }
    }

    /// Monotone Barzilai-Borwein proximal gradient with backtracking on a
    /// column subset of the standardized design. Returns the iteration
    /// count; `u` is updated in place.
    #[allow(clippy::too_many_arguments)]
    fn prox_gradient(
        &self,
        z: &Array2<f64>,
        groups: &GroupStructure,
        gamma: f64,
        lambda: f64,
        u: &mut Array1<f64>,
        tol: f64,
        max_iter: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<usize> {
        let mut residual = z.dot(&*u) - &self.y;
        let mut f = residual.dot(&residual) / self.nt;
        let mut grad = z.t().dot(&residual).mapv(|v| 2.0 * v / self.nt);
        let mut objective = f + 2.0 * lambda * penalty_value(u.as_slice().unwrap(), gamma, groups);
        if let Some(t) = trace.as_mut() {
            t.push(objective);
        }

        let base_step = 1.0 / self.lipschitz;
        let mut step = base_step;
        let mut prev: Option<(Array1<f64>, Array1<f64>)> = None;

        for iter in 0..max_iter {
            let kkt = kkt_residual(u, &grad, gamma, lambda, groups);
            if kkt <= tol {
                return Ok(iter);
            }

            // Barzilai-Borwein step with a backtracking safeguard keeps
            // the composite objective nonincreasing.
            if let Some((du, dg)) = &prev {
                let ss = du.dot(du);
                let sy = du.dot(dg);
                if sy > 0.0 && ss > 0.0 {
                    step = (ss / sy).clamp(base_step * 1e-8, base_step * 1e8);
                } else {
                    step = base_step;
                }
            }

            let (u_new, residual_new, f_new) = loop {
                let mut cand = &*u - &grad.mapv(|g| g * step);
                sg_prox_inplace(
                    &mut cand,
                    2.0 * step * lambda * gamma,
                    2.0 * step * lambda * (1.0 - gamma),
                    groups,
                );
                let d = &cand - &*u;
                let dn = d.dot(&d);
                if dn == 0.0 {
                    break (cand, residual.clone(), f);
                }
                let r_new = z.dot(&cand) - &self.y;
                let f_cand = r_new.dot(&r_new) / self.nt;
                let bound = f + grad.dot(&d) + dn / (2.0 * step) + 1e-12 * f.abs().max(1.0);
                if f_cand <= bound || step <= base_step * 1e-8 {
                    break (cand, r_new, f_cand);
                }
                step *= 0.5;
            };

            let grad_new = z.t().dot(&residual_new).mapv(|v| 2.0 * v / self.nt);
            prev = Some((&u_new - &*u, &grad_new - &grad));
            *u = u_new;
            residual = residual_new;
            f = f_new;
            grad = grad_new;

            let obj_new = f + 2.0 * lambda * penalty_value(u.as_slice().unwrap(), gamma, groups);
            debug_assert!(
                obj_new <= objective + 1e-10 * objective.abs().max(1.0),
                "objective increased: {objective} -> {obj_new}"
            );
            objective = obj_new;
            if let Some(t) = trace.as_mut() {
                t.push(objective);
            }
        }
        Ok(max_iter)
    }

    /// Map standardized coefficients back to the original column scale,
    /// returning `(intercept, coefficients)`.
    pub fn map_back(&self, u: &Array1<f64>) -> (f64, Vec<f64>) {
        let coefficients: Vec<f64> = u
            .iter()
            .zip(self.scales.iter())
            .map(|(v, s)| v / s)
            .collect();
        let intercept = self.y_mean
            - coefficients
                .iter()
                .zip(self.centers.iter())
                .map(|(b, c)| b * c)
                .sum::<f64>();
        (intercept, coefficients)
    }

    /// Prediction `y_mean + sum_j u_j (x_j - center_j) / scale_j` for a raw
    /// design row, avoiding the full map-back inside cross-validation.
    pub fn predict_standardized(&self, u: &Array1<f64>, x: ArrayView1<f64>) -> f64 {
        let mut acc = self.y_mean;
        for (j, uj) in u.iter().enumerate() {
            if *uj != 0.0 {
                acc += uj * (x[j] - self.centers[j]) / self.scales[j];
            }
        }
        acc
    }

    pub fn finish_fit(&self, raw: RawSolution, penalty: PenaltySpec) -> SgLassoFit {
        let (intercept, coefficients) = self.map_back(&raw.u);
        SgLassoFit {
            intercept,
            coefficients,
            penalty,
            objective: raw.objective,
            kkt_residual: raw.kkt_residual,
            iterations: raw.iterations,
            centers: self.centers.to_vec(),
            scales: self.scales.to_vec(),
            y_mean: self.y_mean,
        }
    }
}

/// Raw solver output on the standardized scale.
pub(crate) struct RawSolution {
    pub u: Array1<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub objective_trace: Option<Vec<f64>>,
}

/// Largest violation of the subgradient stationarity conditions.
pub(crate) fn kkt_residual(
    u: &Array1<f64>,
    grad: &Array1<f64>,
    gamma: f64,
    lambda: f64,
    groups: &GroupStructure,
) -> f64 {
    let a = 2.0 * lambda * gamma;
    let b = 2.0 * lambda * (1.0 - gamma);
    let mut worst = 0.0f64;
    for group in groups.groups() {
        let norm = group.iter().map(|&j| u[j] * u[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Inactive group: || soft(grad_G, a) ||_2 <= b must hold.
            let s = group
                .iter()
                .map(|&j| {
                    let v = soft_threshold(grad[j], a);
                    v * v
                })
                .sum::<f64>()
                .sqrt();
            worst = worst.max(s - b);
        } else {
            for &j in group {
                let viol = if u[j] != 0.0 {
                    (grad[j] + a * u[j].signum() + b * u[j] / norm).abs()
                } else {
                    (grad[j].abs() - a).max(0.0)
                };
                worst = worst.max(viol);
            }
        }
    }
    worst.max(0.0)
}

/// Upper bound on the Lipschitz constant of the smooth part's gradient,
/// `2 sigma_max(Z'Z) / NT`, via a few deterministic power iterations.
fn lipschitz_bound(z: &Array2<f64>, nt: f64) -> f64 {
    let p = z.ncols();
    if p == 0 {
        return 1.0;
    }
    let mut v = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
    let mut norm = 1.0;
    for _ in 0..30 {
        let w = z.t().dot(&z.dot(&v));
        norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        v = w.mapv(|x| x / norm);
    }
    // Safety margin over the power-iteration estimate.
    2.0 * norm * 1.05 / nt
}

/// Fit the penalized regression on a raw design (no intercept column).
///
/// The warm start, when given, is on the original coefficient scale.
pub fn sg_lasso_fit(
    design: ArrayView2<f64>,
    y: ArrayView1<f64>,
    groups: &GroupStructure,
    penalty: PenaltySpec,
    warm_start: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<SgLassoFit> {
    let problem = StandardizedProblem::new(design, y)?;
    let u0 = warm_start.map(|w| {
        Array1::from(
            w.iter()
                .zip(problem.scales.iter())
                .map(|(b, s)| b * s)
                .collect::<Vec<f64>>(),
        )
    });
    let raw = problem.solve(groups, penalty, u0.as_ref(), opts)?;
    Ok(problem.finish_fit(raw, penalty))
}
