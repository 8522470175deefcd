//! Monte Carlo checks of individual simulation cells and of the
//! goodness-of-fit calibration.

use gini_drm::inference::{gof_test, replicate_rng, IntervalMethod, Target, TestMethod};
use gini_drm::montecarlo::{draw_group, run_ci_study, run_point_study, run_test_study, ScenarioConfig};
use gini_drm::{Basis, ContinuousLaw, FitOptions, TwoSampleData};
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 777;

fn cell(preset: &str, replications: usize) -> ScenarioConfig {
    ScenarioConfig {
        replications,
        seed: SEED,
        ..ScenarioConfig::preset(preset).unwrap()
    }
}

#[test]
fn jel_coverage_chisq_g0() {
    let s = run_ci_study(&cell("chisq-100-00", 2000), &[&IntervalMethod::Jel], &[Target::G0]).unwrap();
    let r = s.interval_row("JEL", Target::G0).unwrap();
    assert!((r.cp_percent - 94.45).abs() <= 1.5, "{r:?}");
}

#[test]
fn na_drm_interval_chisq_g0() {
    let s = run_ci_study(&cell("chisq-100-00", 2000), &[&IntervalMethod::NaDrm], &[Target::G0]).unwrap();
    let r = s.interval_row("NA-DRM", Target::G0).unwrap();
    assert!((r.cp_percent - 95.25).abs() <= 1.5, "{r:?}");
    assert!((r.average_length - 0.074).abs() <= 0.0074, "{r:?}");
}

#[test]
fn na_drm_type_one_error_chisq_null() {
    let s = run_test_study(&cell("chisq-300-null0", 2000), &[&TestMethod::NaDrm]).unwrap();
    let r = s.test_row("NA-DRM").unwrap();
    assert!((r.rejection_percent - 5.05).abs() <= 1.5, "{r:?}");
}

#[test]
fn drm_difference_mse_exp_with_zeros() {
    let s = run_point_study(&cell("exp-300-33", 2000)).unwrap();
    let mse = s.point_row("DRM", Target::Diff).unwrap().mse_x1000;
    assert!((mse - 0.51).abs() <= 0.2 * 0.51, "{mse}");
    for t in Target::ALL {
        let drm = s.point_row("DRM", t).unwrap();
        let emp = s.point_row("EMP", t).unwrap();
        assert!(drm.mse_x1000 <= emp.mse_x1000 + 2.0 * (drm.mse_se_x1000 + emp.mse_se_x1000), "{t}");
    }
}

#[test]
#[ignore = "2000 replicates x 1000 bootstrap refits; run with --ignored"]
fn bt_drm_coverage_exp_g0_full_scale() {
    let s = run_ci_study(&cell("exp-100-00", 2000), &[&IntervalMethod::BtDrm], &[Target::G0]).unwrap();
    let r = s.interval_row("BT-DRM", Target::G0).unwrap();
    assert!((r.cp_percent - 94.45).abs() <= 1.5, "{r:?}");
}

fn sample(laws: [ContinuousLaw; 2], nu: [f64; 2], n: usize, index: u64) -> (TwoSampleData<f64>, u64) {
    let mut rng = replicate_rng(SEED, index);
    let x0 = draw_group(&laws[0], nu[0], n, &mut rng);
    let x1 = draw_group(&laws[1], nu[1], n, &mut rng);
    (TwoSampleData::new(x0, x1).unwrap(), rng.random())
}

/// Kolmogorov distance between the sample and the uniform law.
fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn gof_p_values_are_uniform_under_the_model() {
    let laws = [ContinuousLaw::Exponential { rate: 0.5 }, ContinuousLaw::Exponential { rate: 1.0 }];
    let p: Vec<f64> = (0..500u64)
        .into_par_iter()
        .map(|r| {
            let (d, seed) = sample(laws, [0.2, 0.2], 100, r);
            gof_test(&d, &Basis::identity(), &FitOptions::default(), 199, seed).unwrap().p_value
        })
        .collect();
    let ks = ks_uniform(p);
    assert!(ks < 0.08, "Kolmogorov distance {ks}");
}

#[test]
fn gof_detects_misspecified_basis() {
    let laws = [
        ContinuousLaw::LogNormal { mu: 0.0, sigma: 1.0 },
        ContinuousLaw::Gamma { shape: 3.0, scale: 0.5 },
    ];
    let reps = 200u64;
    let rejected = (0..reps)
        .into_par_iter()
        .filter(|&r| {
            let (d, seed) = sample(laws, [0.0, 0.0], 300, 10_000 + r);
            gof_test(&d, &Basis::identity(), &FitOptions::default(), 199, seed).unwrap().rejects_at(0.05)
        })
        .count();
    let rate = rejected as f64 / reps as f64;
    assert!(rate > 0.5, "rejection rate {rate}");
}
