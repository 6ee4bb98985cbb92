//! Sparse-group LASSO estimation, penalty paths and panel cross-validation.
//!
//! The estimator minimizes `||y - a - Z u||^2 / (NT) + 2 lambda Omega(u)`
//! with `Omega(u) = gamma |u|_1 + (1 - gamma) sum_G |u_G|_2` over a group
//! partition of the penalized columns. The intercept is never penalized;
//! columns are standardized internally and coefficients mapped back to the
//! original scale.

mod cv;
mod path;
mod prox;
mod solver;

pub use cv::{contiguous_fold_blocks, default_gamma_grid, panel_cv, CvConfig, CvPoint, CvResult};
pub use path::lambda_path;
pub use prox::{sg_prox, soft_threshold};
pub use solver::{sg_lasso_fit, SgLassoFit, SolveOptions};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Partition of the penalized design columns into disjoint groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    n_cols: usize,
}

impl GroupStructure {
    /// Build a partition over `n_cols` columns. Every column must appear
    /// in exactly one group.
    pub fn new(groups: Vec<Vec<usize>>, n_cols: usize) -> Result<GroupStructure> {
        let mut seen = vec![false; n_cols];
        for group in &groups {
            if group.is_empty() {
                return Err(Error::Dimension("empty group".into()));
            }
            for &j in group {
                if j >= n_cols {
                    return Err(Error::Dimension(format!(
                        "group column {j} out of range for {n_cols} columns"
                    )));
                }
                if seen[j] {
                    return Err(Error::Dimension(format!(
                        "column {j} assigned to more than one group"
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::Dimension(format!("column {j} belongs to no group")));
        }
        Ok(GroupStructure { groups, n_cols })
    }

    /// One group per column.
    pub fn singletons(n_cols: usize) -> GroupStructure {
        GroupStructure {
            groups: (0..n_cols).map(|j| vec![j]).collect(),
            n_cols,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }
}

/// The two tuning parameters of the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    /// Mix between the l1 and the group norm, in `[0, 1]`.
    pub gamma: f64,
    /// Overall regularization level, `>= 0`.
    pub lambda: f64,
}

impl PenaltySpec {
    pub fn new(gamma: f64, lambda: f64) -> Result<PenaltySpec> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma {gamma} outside [0, 1]")));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Config(format!("lambda {lambda} must be >= 0")));
        }
        Ok(PenaltySpec { gamma, lambda })
    }
}

/// `Omega_gamma(u)` for a coefficient vector.
pub fn penalty_value(u: &[f64], gamma: f64, groups: &GroupStructure) -> f64 {
    let l1: f64 = u.iter().map(|v| v.abs()).sum();
    let l21: f64 = groups
        .groups()
        .iter()
        .map(|g| g.iter().map(|&j| u[j] * u[j]).sum::<f64>().sqrt())
        .sum();
    gamma * l1 + (1.0 - gamma) * l21
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_structure_must_partition() {
        assert!(GroupStructure::new(vec![vec![0, 1], vec![2]], 3).is_ok());
        // missing column
        assert!(GroupStructure::new(vec![vec![0, 1]], 3).is_err());
        // duplicate column
        assert!(GroupStructure::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        // out of range
        assert!(GroupStructure::new(vec![vec![0, 3]], 2).is_err());
    }

    #[test]
    fn penalty_is_zero_only_at_zero() {
        let groups = GroupStructure::new(vec![vec![0, 1]], 2).unwrap();
        assert_eq!(penalty_value(&[0.0, 0.0], 0.5, &groups), 0.0);
        assert!(penalty_value(&[1e-12, 0.0], 0.5, &groups) > 0.0);
        assert!(penalty_value(&[-1.0, 2.0], 0.0, &groups) > 0.0);
    }

    #[test]
    fn penalty_spec_validates() {
        assert!(PenaltySpec::new(1.1, 0.0).is_err());
        assert!(PenaltySpec::new(0.5, -1.0).is_err());
        assert!(PenaltySpec::new(0.0, 0.0).is_ok());
    }
}
