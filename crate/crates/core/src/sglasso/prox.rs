//! Proximal map of the sparse-group penalty.

use super::GroupStructure;
use ndarray::Array1;

/// Scalar soft-threshold operator.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Proximal map of `u -> t1 |u|_1 + t2 sum_G |u_G|_2` at `v`.
///
/// For non-overlapping groups the map is the exact composition of a
/// coordinate-wise soft threshold by `t1` followed by a group-wise
/// shrinkage by `t2`.
pub fn sg_prox(v: &Array1<f64>, t1: f64, t2: f64, groups: &GroupStructure) -> Array1<f64> {
    assert!(t1 >= 0.0 && t2 >= 0.0, "thresholds must be nonnegative");
    let mut out = v.mapv(|x| soft_threshold(x, t1));
    group_shrink(&mut out, t2, groups);
    out
}

/// In-place variant used by the solver inner loop.
pub(crate) fn sg_prox_inplace(v: &mut Array1<f64>, t1: f64, t2: f64, groups: &GroupStructure) {
    if t1 > 0.0 {
        v.mapv_inplace(|x| soft_threshold(x, t1));
    }
    group_shrink(v, t2, groups);
}

fn group_shrink(v: &mut Array1<f64>, t2: f64, groups: &GroupStructure) {
    if t2 == 0.0 {
        return;
    }
    for group in groups.groups() {
        let norm = group.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
        if norm <= t2 {
            for &j in group {
                v[j] = 0.0;
            }
        } else {
            let factor = 1.0 - t2 / norm;
            for &j in group {
                v[j] *= factor;
            }
        }
    }
}
