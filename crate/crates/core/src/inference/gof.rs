//! Goodness-of-fit test of the density ratio model.
//!
//! The statistic contrasts the fitted `G1` with the empirical CDF of the
//! group 1 positives,
//!
//! ```text
//! T = sqrt(n01 n11 / (n01 + n11)) sup_x |G1_hat(x) - G1_emp(x)|,
//! ```
//!
//! the supremum running over the pooled positive observations. Its null
//! distribution is approximated by a parametric bootstrap from the fitted
//! pair, refitting the model on every bootstrap sample.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use super::{replicate_rng, InferenceError, TestResult};
use crate::drm::{fit_theta, DrmFit, FitOptions};
use crate::sample::{Basis, TwoSampleData};

/// Kolmogorov-type distance between the fitted and empirical group 1 CDFs.
pub fn gof_statistic(fit: &DrmFit<f64>, data: &TwoSampleData<f64>) -> f64 {
    let cdfs = fit.fitted_cdfs();
    let mut pos1: Vec<f64> = data.positives(1).map(|(_, v)| v).collect();
    pos1.sort_by(|a, b| a.partial_cmp(b).expect("finite observations"));
    let n11 = pos1.len();
    let n01 = data.n_positive(0);
    let mut sup: f64 = 0.0;
    let mut k = 0;
    for (&x, &g1) in cdfs.support.iter().zip(&cdfs.g1) {
        while k < n11 && pos1[k] <= x {
            k += 1;
        }
        sup = sup.max((g1 - k as f64 / n11 as f64).abs());
    }
    let scale = ((n01 * n11) as f64 / (n01 + n11) as f64).sqrt();
    scale * sup
}

/// Bootstrap goodness-of-fit test. The p-value is the share of bootstrap
/// statistics at least as large as the observed one.
pub fn gof_test(
    data: &TwoSampleData<f64>,
    basis: &Basis<f64>,
    fit_options: &FitOptions,
    replicates: usize,
    seed: u64,
) -> Result<TestResult, InferenceError> {
    if replicates == 0 {
        return Err(InferenceError::InvalidArgument("goodness-of-fit bootstrap needs replicates".into()));
    }
    let fit = fit_theta(data, basis, fit_options)?;
    let observed = gof_statistic(&fit, data);
    let values: Vec<f64> = fit.points().iter().map(|p| p.value).collect();
    let sampler0 = WeightedIndex::new(fit.weights()).map_err(|e| InferenceError::Degenerate(e.to_string()))?;
    let sampler1 = WeightedIndex::new(fit.tilted_weights()).map_err(|e| InferenceError::Degenerate(e.to_string()))?;
    let stats: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b as u64);
            let mut draw = |g: usize, sampler: &WeightedIndex<f64>| -> Vec<f64> {
                let mut x = vec![0.0; data.n_zero(g)];
                x.extend((0..data.n_positive(g)).map(|_| values[sampler.sample(&mut rng)]));
                x
            };
            let x0 = draw(0, &sampler0);
            let x1 = draw(1, &sampler1);
            let sample = TwoSampleData::new(x0, x1).ok()?;
            let refit = fit_theta(&sample, basis, fit_options).ok()?;
            Some(gof_statistic(&refit, &sample))
        })
        .collect();
    let valid: Vec<f64> = stats.into_iter().flatten().collect();
    let failed = replicates - valid.len();
    if failed * 10 > replicates {
        return Err(InferenceError::TooManyFailures {
            failed,
            total: replicates,
        });
    }
    let exceed = valid.iter().filter(|&&t| t >= observed).count();
    Ok(TestResult::new("GOF", observed, exceed as f64 / valid.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drm::DrmFit;

    #[test]
    fn statistic_by_hand() {
        // theta = 0: fitted G1 is the pooled ECDF.
        let d = TwoSampleData::new(vec![1.0, 3.0], vec![2.0, 4.0]).unwrap();
        let fit = DrmFit::at_theta(&d, &Basis::log(), vec![0.0, 0.0]).unwrap();
        let t = gof_statistic(&fit, &d);
        // Pooled ECDF 0.25, 0.5, 0.75, 1 against 0, 0.5, 0.5, 1: sup 0.25.
        assert!((t - 1.0f64.sqrt() * 0.25).abs() < 1e-15);
    }

    #[test]
    fn p_value_in_unit_interval() {
        let x0: Vec<f64> = (1..40).map(|i| (i as f64 * 0.61).sin().abs() * 2.0 + 0.05).collect();
        let x1: Vec<f64> = (1..35).map(|i| (i as f64 * 0.83).cos().abs() * 3.0 + 0.05).collect();
        let d = TwoSampleData::new(x0, x1).unwrap();
        let r = gof_test(&d, &Basis::identity(), &FitOptions::default(), 60, 3).unwrap();
        assert!(r.statistic >= 0.0);
        assert!((0.0..=1.0).contains(&r.p_value));
        let again = gof_test(&d, &Basis::identity(), &FitOptions::default(), 60, 3).unwrap();
        assert_eq!(r, again);
    }
}
