//! Invariant checks shared by the property tests and the acceptance run.

#![allow(dead_code)]

use gini_drm::drm::{dual_grad, dual_hessian, dual_loglik};
use gini_drm::gini::mele_gini;
use gini_drm::inference::el_mean_logratio;
use gini_drm::linalg::symmetric_eigenvalues;
use gini_drm::montecarlo::draw_group;
use gini_drm::scalar::stable_sum;
use gini_drm::{fit_theta, Basis, ContinuousLaw, FitOptions, TwoSampleData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// A random semicontinuous sample with gamma positive parts.
#[derive(Debug, Clone)]
pub struct Case {
    pub seed: u64,
    pub n: [usize; 2],
    pub nu: [f64; 2],
    pub shape: [f64; 2],
    pub scale: [f64; 2],
    pub basis: usize,
}

impl Case {
    pub fn data(&self) -> TwoSampleData<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let groups: Vec<Vec<f64>> = (0..2)
            .map(|g| {
                let law = ContinuousLaw::Gamma {
                    shape: self.shape[g],
                    scale: self.scale[g],
                };
                draw_group(&law, self.nu[g], self.n[g], &mut rng)
            })
            .collect();
        let [x0, x1]: [Vec<f64>; 2] = groups.try_into().expect("two groups");
        TwoSampleData::new(x0, x1).expect("enough positives")
    }

    pub fn basis(&self) -> Basis<f64> {
        match self.basis % 3 {
            0 => Basis::log(),
            1 => Basis::identity(),
            _ => Basis::log_identity(),
        }
    }
}

/// Central-difference gradient matches the analytic one to 1e-6 relative.
pub fn gradient_matches_finite_differences(case: &Case, offset: &[f64]) -> Check {
    let data = case.data();
    let basis = case.basis();
    let theta: Vec<f64> = (0..=basis.dim()).map(|k| offset.get(k).copied().unwrap_or(0.0)).collect();
    let grad = dual_grad(&theta, &data, &basis).map_err(|e| e.to_string())?;
    for k in 0..theta.len() {
        let h = 1e-5 * theta[k].abs().max(1.0);
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up[k] += h;
        dn[k] -= h;
        let fd = (dual_loglik(&up, &data, &basis).unwrap() - dual_loglik(&dn, &data, &basis).unwrap()) / (2.0 * h);
        let rel = (fd - grad[k]).abs() / grad[k].abs().max(1.0);
        ensure!(rel < 1e-6, "component {k}: analytic {} vs finite difference {fd}", grad[k]);
    }
    Ok(())
}

/// The dual Hessian is negative semidefinite.
pub fn hessian_is_nsd(case: &Case, offset: &[f64]) -> Check {
    let data = case.data();
    let basis = case.basis();
    let theta: Vec<f64> = (0..=basis.dim()).map(|k| offset.get(k).copied().unwrap_or(0.0)).collect();
    let h = dual_hessian(&theta, &data, &basis).map_err(|e| e.to_string())?;
    let ev = symmetric_eigenvalues(&h);
    let top = *ev.last().unwrap();
    ensure!(top <= 1e-10 * h.trace().abs(), "largest eigenvalue {top}");
    Ok(())
}

/// Baseline weights sum to one; tilted weights to one within the fit tolerance.
pub fn weights_normalized(case: &Case) -> Check {
    let data = case.data();
    let opts = FitOptions::default();
    let fit = fit_theta(&data, &case.basis(), &opts).map_err(|e| e.to_string())?;
    let s0 = stable_sum(fit.weights().iter().copied());
    ensure!((s0 - 1.0).abs() <= 1e-14, "sum p = {s0}");
    let s1 = stable_sum(fit.tilted_weights());
    ensure!((s1 - 1.0).abs() <= 10.0 * opts.grad_tol, "sum p omega = {s1}");
    Ok(())
}

/// `psi/m - 1 - sum p^2 x / m = D / (2m)` for the baseline distribution.
pub fn pairwise_identity(case: &Case) -> Check {
    let data = case.data();
    let fit = fit_theta(&data, &case.basis(), &FitOptions::default()).map_err(|e| e.to_string())?;
    let est = mele_gini(&fit);
    let x: Vec<f64> = fit.points().iter().map(|p| p.value).collect();
    let p = fit.weights();
    let (m, psi) = (est.m[0], est.psi.expect("DRM psi")[0]);
    let mut d = 0.0;
    for j in 0..x.len() {
        for k in 0..x.len() {
            d += p[j] * p[k] * (x[j] - x[k]).abs();
        }
    }
    let self_pairs: f64 = x.iter().zip(p).map(|(x, p)| p * p * x).sum();
    let lhs = psi / m - 1.0 - self_pairs / m;
    let rhs = d / (2.0 * m);
    ensure!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    Ok(())
}

/// The MELE Gini indices do not change when every observation is scaled.
pub fn mele_scale_invariant(case: &Case, c: f64) -> Check {
    let data = case.data();
    let basis = case.basis();
    let base = mele_gini(&fit_theta(&data, &basis, &FitOptions::default()).map_err(|e| e.to_string())?);
    let scaled = mele_gini(&fit_theta(&data.scaled(c), &basis, &FitOptions::default()).map_err(|e| e.to_string())?);
    ensure!(
        (base.g0 - scaled.g0).abs() < 1e-8 && (base.g1 - scaled.g1).abs() < 1e-8,
        "{:?} vs {:?} at c = {c}",
        base.g(),
        scaled.g()
    );
    Ok(())
}

/// EL ratio for a mean is zero at the sample mean and infeasible outside the hull.
pub fn el_mean_boundaries(values: &[f64]) -> Check {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let at_mean = el_mean_logratio(values, mean).map_err(|e| e.to_string())?;
    ensure!(at_mean.feasible && at_mean.neg2_log_elr.abs() < 1e-10, "at mean: {at_mean:?}");
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1.0);
    for outside in [hi + 0.1 * span, lo - 0.1 * span] {
        let s = el_mean_logratio(values, outside).map_err(|e| e.to_string())?;
        ensure!(!s.feasible && s.neg2_log_elr.is_infinite(), "outside at {outside}: {s:?}");
    }
    Ok(())
}

/// Swapping the group labels inverts the fitted density ratio:
/// `log omega + log omega_swapped = 0` relative to `max(1, |log omega|)`.
pub fn label_swap_reciprocity(case: &Case) -> Check {
    let data = case.data();
    let basis = case.basis();
    let opts = FitOptions::default();
    let fit = fit_theta(&data, &basis, &opts).map_err(|e| e.to_string())?;
    let swapped_data = data.swapped();
    let swapped = fit_theta(&swapped_data, &basis, &opts).map_err(|e| e.to_string())?;
    // Each fit stops at a nonzero gradient; near separation the dual is flat
    // and that residual moves theta by up to |grad| / lambda_min(-H).
    let slack = |d: &TwoSampleData<f64>, theta: &[f64]| -> Result<f64, String> {
        let g = dual_grad(theta, d, &basis).map_err(|e| e.to_string())?;
        let h = dual_hessian(theta, d, &basis).map_err(|e| e.to_string())?;
        let lambda = -symmetric_eigenvalues(&h).last().copied().unwrap();
        Ok(g.iter().map(|v| v * v).sum::<f64>().sqrt() / lambda)
    };
    let theta_err = slack(&data, fit.theta())? + slack(&swapped_data, swapped.theta())?;
    for pt in fit.points() {
        let a = fit.omega_at(pt.value);
        let b = swapped.omega_at(pt.value);
        let (la, lb) = (a.ln(), b.ln());
        let q_norm = basis.design(pt.value).iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure!(
            (la + lb).abs() <= 1e-6 * la.abs().max(1.0) + 2.0 * q_norm * theta_err,
            "omega {a} and swapped omega {b} at {}",
            pt.value
        );
    }
    Ok(())
}
