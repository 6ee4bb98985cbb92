//! Independent-oracle checks: brute-force proximal minimization, grid
//! searches and the forecast-error decomposition identity.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sgmidas::aggregation::WeightVector;
use sgmidas::models::{fit_model, Family, ModelSpec, PenaltySelection};
use sgmidas::panel::NowcastClock;
use sgmidas::sglasso::{sg_prox, GroupStructure, PenaltySpec, SolveOptions};
use sgmidas::simulate::{
    msfe_decomposition_report, simulate_panel, InnovationDesign, SimulationConfig,
};

/// Minimize `0.5 |u - v|^2 + t1 |u|_1 + t2 |u|_2` (one group over all
/// coordinates) by iterative grid refinement. The objective is strongly
/// convex, so shrinking boxes centred on the running argmin converge.
fn brute_force_prox(v: &[f64], t1: f64, t2: f64) -> Vec<f64> {
    let d = v.len();
    let objective = |u: &[f64]| {
        let quad: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5;
        let l1: f64 = u.iter().map(|a| a.abs()).sum();
        let l2: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        quad + t1 * l1 + t2 * l2
    };
    let mut center = v.to_vec();
    let mut width = v.iter().map(|x| x.abs()).fold(1.0f64, f64::max) + 1.0;
    let grid = 13usize;
    for _ in 0..45 {
        let mut best = (objective(&center), center.clone());
        for code in 0..grid.pow(d as u32) {
            let mut c = code;
            let candidate: Vec<f64> = (0..d)
                .map(|k| {
                    let idx = c % grid;
                    c /= grid;
                    center[k] - width + 2.0 * width * idx as f64 / (grid - 1) as f64
                })
                .collect();
            let value = objective(&candidate);
            if value < best.0 {
                best = (value, candidate);
            }
        }
        center = best.1;
        width *= 0.4;
    }
    center
}

#[test]
fn prox_matches_brute_force_minimization() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for case in 0..60 {
        let d = if case % 2 == 0 { 2 } else { 3 };
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let t1 = rng.gen_range(0.0..2.0);
        let t2 = rng.gen_range(0.0..2.0);
        let groups = GroupStructure::new(vec![(0..d).collect()], d).unwrap();
        let ours = sg_prox(&Array1::from(v.clone()), t1, t2, &groups);
        let oracle = brute_force_prox(&v, t1, t2);
        for k in 0..d {
            assert!(
                (ours[k] - oracle[k]).abs() < 1e-6,
                "case {case}: {:?} vs {:?} at t1={t1} t2={t2} v={v:?}",
                ours.to_vec(),
                oracle
            );
        }
    }
}

#[test]
fn prox_spec_example_value() {
    let groups = GroupStructure::new(vec![vec![0, 1]], 2).unwrap();
    let out = sg_prox(&Array1::from(vec![3.0, 4.0]), 1.0, 1.0, &groups);
    let oracle = brute_force_prox(&[3.0, 4.0], 1.0, 1.0);
    assert!((out[0] - oracle[0]).abs() < 1e-6);
    assert!((out[1] - oracle[1]).abs() < 1e-6);
    assert!((out[0] - 1.4453).abs() < 1e-4);
    assert!((out[1] - 2.1680).abs() < 1e-4);
}

fn cv_spec(family: Family) -> ModelSpec {
    ModelSpec::new(
        family,
        1,
        PenaltySelection::Fixed(PenaltySpec::new(1.0, 0.05).unwrap()),
    )
}

#[test]
fn decomposition_identity_holds_for_every_family() {
    let cfg = SimulationConfig {
        n_units: 4,
        t_periods: 25,
        n_regressors: 6,
        sigma: 0.6,
        design: InnovationDesign::Gaussian,
        master_seed: 7,
        ..Default::default()
    };
    let opts = SolveOptions::default();
    for rep in 0..5 {
        let panel = simulate_panel(&cfg, rep);
        let ds = panel.to_dataset().unwrap();
        let target = cfg.holdout_target_index();
        let clock = NowcastClock::end_of(target);
        let weights = WeightVector::fixed(target, cfg.n_units);
        let bundles: Vec<_> = [Family::P, Family::Ts, Family::Ac, Family::A, Family::HetAr]
            .iter()
            .map(|&f| fit_model(&ds, &cv_spec(f), &clock, Some(&weights), &opts).unwrap())
            .collect();
        let records = msfe_decomposition_report(&panel, &bundles).unwrap();
        assert_eq!(records.len(), 5);
        for record in records {
            assert!(
                record.identity_gap.abs() < 1e-10,
                "family {:?}: gap {}",
                record.family,
                record.identity_gap
            );
            assert_eq!(record.estimation_term, 0.0);
        }
    }
}

#[test]
fn decomposition_terms_vanish_on_noiseless_homogeneous_data() {
    // sigma = 0 and no error term: an unpenalized per-unit fit recovers
    // the generating coefficients and every term collapses.
    let cfg = SimulationConfig {
        n_units: 2,
        t_periods: 30,
        n_regressors: 2,
        sigma: 0.0,
        sigma_eps: 0.0,
        design: InnovationDesign::Gaussian,
        master_seed: 11,
        ..Default::default()
    };
    let panel = simulate_panel(&cfg, 0);
    let ds = panel.to_dataset().unwrap();
    let target = cfg.holdout_target_index();
    let clock = NowcastClock::end_of(target);
    let weights = WeightVector::fixed(target, cfg.n_units);
    let spec = ModelSpec::new(
        Family::Ts,
        1,
        PenaltySelection::Fixed(PenaltySpec::new(1.0, 0.0).unwrap()),
    );
    let opts = SolveOptions {
        tol: 1e-12,
        ..Default::default()
    };
    let bundle = fit_model(&ds, &spec, &clock, Some(&weights), &opts).unwrap();
    let records = msfe_decomposition_report(&panel, &[bundle]).unwrap();
    let record = &records[0];
    assert!(record.heterogeneity_term.abs() < 1e-6);
    assert!(record.noise_term.abs() < 1e-12);
    assert!(record.realized_error.abs() < 1e-6);
}

#[test]
fn pooled_heterogeneity_term_dominates_time_series_term_at_high_sigma() {
    let cfg = SimulationConfig {
        n_units: 6,
        t_periods: 60,
        n_regressors: 4,
        sigma: 0.8,
        design: InnovationDesign::Gaussian,
        master_seed: 23,
        ..Default::default()
    };
    let opts = SolveOptions::default();
    let reps = 20;
    let mut pooled_abs = 0.0;
    let mut ts_abs = 0.0;
    for rep in 0..reps {
        let panel = simulate_panel(&cfg, rep);
        let ds = panel.to_dataset().unwrap();
        let target = cfg.holdout_target_index();
        let clock = NowcastClock::end_of(target);
        let weights = WeightVector::fixed(target, cfg.n_units);
        let bundles: Vec<_> = [Family::P, Family::Ts]
            .iter()
            .map(|&f| fit_model(&ds, &cv_spec(f), &clock, Some(&weights), &opts).unwrap())
            .collect();
        let records = msfe_decomposition_report(&panel, &bundles).unwrap();
        pooled_abs += records[0].heterogeneity_term.abs();
        ts_abs += records[1].heterogeneity_term.abs();
    }
    assert!(
        pooled_abs > ts_abs,
        "pooled {} vs ts {}",
        pooled_abs / reps as f64,
        ts_abs / reps as f64
    );
}
