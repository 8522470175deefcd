//! Gini index estimators and closed-form scenario values.
//!
//! For a semicontinuous population with zero proportion `nu` and positive
//! part `G` with mean `m`,
//!
//! ```text
//! Gini = (2 nu - 1) + (1 - nu) psi / m,    psi = E{2 X G(X)}, X ~ G.
//! ```
//!
//! The DRM estimator plugs in the fitted `G0`, `G1`; the empirical estimator
//! plugs in per-group empirical distributions. Both include self-pairs in the
//! double sum behind `psi`. The jackknife estimator is the classical U-statistic
//! `sum_{j<s} |X_j - X_s| / C(n, 2) / (2 mean)` over all observations of a
//! group, zeros included; `C(n, 2)` counts pairs within the group.

use serde::Serialize;
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::drm::{cdf_at_points, DrmFit};
use crate::sample::TwoSampleData;
use crate::scalar::{CompensatedSum, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GiniError {
    #[error("group {group} has zero mean; the Gini index is undefined")]
    ZeroMean { group: usize },
    #[error("group {group} has {n} observations; at least {needed} are required")]
    TooFewObservations { group: usize, n: usize, needed: usize },
    #[error("zero proportion {nu} is outside [0, 1)")]
    InvalidZeroProportion { nu: f64 },
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("no zero proportion in [0, 1) gives Gini {target} for {law}")]
    Unreachable { target: f64, law: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GiniMethod {
    Drm,
    Emp,
    Jel,
}

impl std::fmt::Display for GiniMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GiniMethod::Drm => "DRM",
            GiniMethod::Emp => "EMP",
            GiniMethod::Jel => "JEL",
        })
    }
}

/// Gini indices of both groups with the ingredients they were built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GiniEstimate<T> {
    pub method: GiniMethod,
    pub g0: T,
    pub g1: T,
    pub diff: T,
    /// Zero proportions used.
    pub nu: [T; 2],
    /// Positive-part means. For the jackknife estimator these are the
    /// whole-sample means, zeros included.
    pub m: [T; 2],
    /// `psi` of each group; absent for the jackknife estimator.
    pub psi: Option<[T; 2]>,
}

impl<T: Real> GiniEstimate<T> {
    pub fn g(&self) -> [T; 2] {
        [self.g0, self.g1]
    }

    fn new(method: GiniMethod, g: [T; 2], nu: [T; 2], m: [T; 2], psi: Option<[T; 2]>) -> Self {
        Self {
            method,
            g0: g[0],
            g1: g[1],
            diff: g[0] - g[1],
            nu,
            m,
            psi,
        }
    }
}

/// `(2 nu - 1) + (1 - nu) psi / m`.
pub fn gini_from_parts<T: Real>(nu: T, psi: T, m: T) -> T {
    let two = T::lit(2.0);
    (two * nu - T::one()) + (T::one() - nu) * psi / m
}

/// `(m, psi)` of a discrete distribution with sorted support points `values`
/// and masses `mass`, with `psi = sum_j mass_j x_j 2 F(x_j)` and `F` using `<=`.
pub(crate) fn mean_and_psi<T: Real>(values: &[T], mass: &[T]) -> (T, T) {
    let cdf = cdf_at_points(values, mass);
    let mut m = CompensatedSum::new();
    let mut psi = CompensatedSum::new();
    for ((&x, &w), &c) in values.iter().zip(mass).zip(&cdf) {
        m.add(w * x);
        psi.add(T::lit(2.0) * w * x * c);
    }
    (m.value(), psi.value())
}

/// Maximum empirical likelihood estimator under the fitted DRM.
///
/// The estimator is defined at the maximizer of the dual likelihood; a fit
/// built with [`DrmFit::at_theta`] elsewhere gives the plug-in at that tilt.
pub fn mele_gini<T: Real>(fit: &DrmFit<T>) -> GiniEstimate<T> {
    let values: Vec<T> = fit.points().iter().map(|p| p.value).collect();
    let (m0, psi0) = mean_and_psi(&values, fit.weights());
    let (m1, psi1) = mean_and_psi(&values, &fit.tilted_weights());
    let nu = fit.zero_proportions().nu;
    let g = [gini_from_parts(nu[0], psi0, m0), gini_from_parts(nu[1], psi1, m1)];
    GiniEstimate::new(GiniMethod::Drm, g, nu, [m0, m1], Some([psi0, psi1]))
}

/// Sorted positives of one group.
pub(crate) fn sorted_positives<T: Real>(x: &[T]) -> Vec<T> {
    let mut v: Vec<T> = x.iter().copied().filter(|&v| v > T::zero()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite observations"));
    v
}

/// Fully nonparametric estimator from the per-group empirical distributions.
pub fn emp_gini<T: Real>(data: &TwoSampleData<T>) -> GiniEstimate<T> {
    let nu = data.zero_proportions().nu;
    let mut g = [T::zero(); 2];
    let mut m = [T::zero(); 2];
    let mut psi = [T::zero(); 2];
    for i in 0..2 {
        let pos = sorted_positives(data.group(i));
        let w = T::one() / T::from_count(pos.len());
        let mass = vec![w; pos.len()];
        let (mi, pi) = mean_and_psi(&pos, &mass);
        m[i] = mi;
        psi[i] = pi;
        g[i] = gini_from_parts(nu[i], pi, mi);
    }
    GiniEstimate::new(GiniMethod::Emp, g, nu, m, Some(psi))
}

/// Gini mean-difference form of one sample: `(sum_{j<s} |x_j - x_s|, sum x)`
/// from sorted values.
fn pair_sum_sorted<T: Real>(sorted: &[T]) -> (T, T) {
    let n = sorted.len();
    let mut pairs = CompensatedSum::new();
    let mut total = CompensatedSum::new();
    for (k, &x) in sorted.iter().enumerate() {
        let coef = T::from_count(2 * k + 1) - T::from_count(n);
        pairs.add(x * coef);
        total.add(x);
    }
    (pairs.value(), total.value())
}

fn jel_from_sums<T: Real>(pairs: T, total: T, n: usize) -> T {
    let n_t = T::from_count(n);
    let mean = total / n_t;
    let n_pairs = n_t * (n_t - T::one()) / T::lit(2.0);
    pairs / n_pairs / (T::lit(2.0) * mean)
}

/// Jackknife-EL point estimate of a single sample (zeros included).
pub fn jel_gini_sample<T: Real>(x: &[T], group: usize) -> Result<T, GiniError> {
    if x.len() < 2 {
        return Err(GiniError::TooFewObservations {
            group,
            n: x.len(),
            needed: 2,
        });
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite observations"));
    let (pairs, total) = pair_sum_sorted(&sorted);
    if total <= T::zero() {
        return Err(GiniError::ZeroMean { group });
    }
    Ok(jel_from_sums(pairs, total, x.len()))
}

/// Jackknife pseudo-values `n G - (n - 1) G_{-j}` in the original order.
///
/// Each leave-one-out estimate is obtained in O(1) from prefix sums over the
/// sorted sample.
pub fn jel_pseudo_values<T: Real>(x: &[T], group: usize) -> Result<Vec<T>, GiniError> {
    let n = x.len();
    if n < 3 {
        return Err(GiniError::TooFewObservations { group, n, needed: 3 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite observations"));
    let sorted: Vec<T> = order.iter().map(|&i| x[i]).collect();
    let (pairs, total) = pair_sum_sorted(&sorted);
    if total <= T::zero() {
        return Err(GiniError::ZeroMean { group });
    }
    let full = jel_from_sums(pairs, total, n);
    let n_t = T::from_count(n);
    let mut out = vec![T::zero(); n];
    let mut prefix = T::zero();
    for (r, &v) in sorted.iter().enumerate() {
        let below = T::from_count(r);
        let above = T::from_count(n - 1 - r);
        let suffix = total - prefix - v;
        let removed = (v * below - prefix) + (suffix - v * above);
        let rest = total - v;
        if rest <= T::zero() {
            return Err(GiniError::ZeroMean { group });
        }
        let loo = jel_from_sums(pairs - removed, rest, n - 1);
        out[order[r]] = n_t * full - (n_t - T::one()) * loo;
        prefix = prefix + v;
    }
    Ok(out)
}

/// Jackknife-EL point estimates of both groups.
pub fn jel_gini<T: Real>(data: &TwoSampleData<T>) -> Result<GiniEstimate<T>, GiniError> {
    let mut g = [T::zero(); 2];
    let mut m = [T::zero(); 2];
    for i in 0..2 {
        let x = data.group(i);
        g[i] = jel_gini_sample(x, i)?;
        m[i] = x.iter().copied().sum::<T>() / T::from_count(x.len());
    }
    Ok(GiniEstimate::new(
        GiniMethod::Jel,
        g,
        data.zero_proportions().nu,
        m,
        None,
    ))
}

/// Continuous positive-part distributions used in simulation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ContinuousLaw {
    /// Chi-square with `df` degrees of freedom.
    ChiSquare { df: f64 },
    /// Exponential with the given rate.
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
    /// `exp(N(mu, sigma^2))`.
    LogNormal { mu: f64, sigma: f64 },
}

impl std::fmt::Display for ContinuousLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContinuousLaw::ChiSquare { df } => write!(f, "chisq({df})"),
            ContinuousLaw::Exponential { rate } => write!(f, "exp({rate})"),
            ContinuousLaw::Gamma { shape, scale } => write!(f, "gamma({shape}, {scale})"),
            ContinuousLaw::LogNormal { mu, sigma } => write!(f, "lognormal({mu}, {sigma})"),
        }
    }
}

impl ContinuousLaw {
    pub fn validate(&self) -> Result<(), GiniError> {
        let ok = match *self {
            ContinuousLaw::ChiSquare { df } => df > 0.0 && df.is_finite(),
            ContinuousLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            ContinuousLaw::Gamma { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
            ContinuousLaw::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(GiniError::InvalidParameter(self.to_string()))
        }
    }

    /// Gini index of the continuous distribution.
    pub fn gini(&self) -> Result<f64, GiniError> {
        self.validate()?;
        Ok(match *self {
            ContinuousLaw::ChiSquare { df } => gamma_gini(df / 2.0),
            ContinuousLaw::Exponential { .. } => 0.5,
            ContinuousLaw::Gamma { shape, .. } => gamma_gini(shape),
            ContinuousLaw::LogNormal { sigma, .. } => erf(sigma / 2.0),
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ContinuousLaw::ChiSquare { df } => df,
            ContinuousLaw::Exponential { rate } => 1.0 / rate,
            ContinuousLaw::Gamma { shape, scale } => shape * scale,
            ContinuousLaw::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
        }
    }
}

/// `Gamma(a + 1/2) / (Gamma(a + 1) sqrt(pi))`.
fn gamma_gini(shape: f64) -> f64 {
    (ln_gamma(shape + 0.5) - ln_gamma(shape + 1.0)).exp() / std::f64::consts::PI.sqrt()
}

/// Population Gini values of a two-group scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioTruth {
    pub g0: f64,
    pub g1: f64,
    pub diff: f64,
    pub logit_diff: f64,
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Gini of a semicontinuous mixture, `nu + (1 - nu) Gini_cont`.
pub fn mixture_gini(nu: f64, law: &ContinuousLaw) -> Result<f64, GiniError> {
    if !(0.0..1.0).contains(&nu) {
        return Err(GiniError::InvalidZeroProportion { nu });
    }
    Ok(nu + (1.0 - nu) * law.gini()?)
}

pub fn true_gini_mixture(nu: [f64; 2], laws: &[ContinuousLaw; 2]) -> Result<ScenarioTruth, GiniError> {
    let g0 = mixture_gini(nu[0], &laws[0])?;
    let g1 = mixture_gini(nu[1], &laws[1])?;
    Ok(ScenarioTruth {
        g0,
        g1,
        diff: g0 - g1,
        logit_diff: logit(g0) - logit(g1),
    })
}

/// Zero proportion of group 1 that makes its Gini equal `target`.
pub fn null_nu1(target: f64, law1: &ContinuousLaw) -> Result<f64, GiniError> {
    let gc = law1.gini()?;
    let nu = (target - gc) / (1.0 - gc);
    if (0.0..1.0).contains(&nu) {
        Ok(nu)
    } else {
        Err(GiniError::Unreachable {
            target,
            law: law1.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drm::{fit_theta, FitOptions};
    use crate::sample::Basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CHISQ: [ContinuousLaw; 2] = [
        ContinuousLaw::ChiSquare { df: 3.0 },
        ContinuousLaw::ChiSquare { df: 4.0 },
    ];
    const EXP: [ContinuousLaw; 2] = [
        ContinuousLaw::Exponential { rate: 0.5 },
        ContinuousLaw::Exponential { rate: 1.0 },
    ];

    fn data(x0: &[f64], x1: &[f64]) -> TwoSampleData<f64> {
        TwoSampleData::new(x0.to_vec(), x1.to_vec()).unwrap()
    }

    fn random_data(rng: &mut ChaCha8Rng, n: usize, zero: f64) -> TwoSampleData<f64> {
        let mut draw = |scale: f64| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < zero {
                        0.0
                    } else {
                        -scale * (1.0 - rng.random::<f64>()).ln()
                    }
                })
                .collect()
        };
        let x0 = draw(2.0);
        let x1 = draw(1.0);
        TwoSampleData::new(x0, x1).unwrap()
    }

    // Direct double sum over the distinct support with <= indicators.
    fn brute_mean_psi(values: &[f64], mass: &[f64]) -> (f64, f64) {
        let mut m = 0.0;
        let mut psi = 0.0;
        for (j, &x) in values.iter().enumerate() {
            m += mass[j] * x;
            let cdf: f64 = values
                .iter()
                .zip(mass)
                .filter(|(&y, _)| y <= x)
                .map(|(_, &w)| w)
                .sum();
            psi += mass[j] * x * 2.0 * cdf;
        }
        (m, psi)
    }

    #[test]
    fn forced_zero_theta_hand_example() {
        let d = data(&[1.0, 3.0], &[1.0, 3.0]);
        let fit = DrmFit::at_theta(&d, &Basis::log(), vec![0.0, 0.0]).unwrap();
        let est = mele_gini(&fit);
        let psi = est.psi.unwrap();
        assert!((psi[0] / est.m[0] - 1.75).abs() < 1e-15);
        assert!((est.g0 - 0.75).abs() < 1e-15);
        assert!((est.g1 - 0.75).abs() < 1e-15);
        assert_eq!(est.method, GiniMethod::Drm);
    }

    #[test]
    fn emp_hand_example() {
        let d = data(&[1.0, 3.0], &[3.0, 1.0, 0.0]);
        let est = emp_gini(&d);
        assert!((est.g0 - 0.75).abs() < 1e-15);
        let psi = est.psi.unwrap();
        assert_eq!(psi[0] / est.m[0], psi[1] / est.m[1]);
        // Adding a zero only moves nu: (2/3 - 1) + (2/3)(1.75).
        assert!((est.g1 - (-1.0 / 3.0 + 2.0 / 3.0 * 1.75)).abs() < 1e-15);
    }

    #[test]
    fn emp_constant_sample_has_unit_gini() {
        let d = data(&[2.5, 2.5, 2.5], &[1.0, 4.0]);
        let est = emp_gini(&d);
        let psi = est.psi.unwrap();
        assert_eq!(psi[0] / est.m[0], 2.0);
        assert_eq!(est.g0, 1.0);
    }

    #[test]
    fn affine_in_nu() {
        let ratio: f64 = 1.4;
        let slope = 2.0 - ratio;
        for nu in [0.0, 0.2, 0.55, 0.9] {
            let g = gini_from_parts(nu, ratio, 1.0);
            assert!((g - (ratio - 1.0 + slope * nu)).abs() < 1e-15);
        }
    }

    #[test]
    fn jel_hand_examples() {
        assert_eq!(jel_gini_sample(&[1.0, 3.0], 0).unwrap(), 0.5);
        assert_eq!(jel_gini_sample(&[0.0, 2.0], 0).unwrap(), 1.0);
        assert_eq!(jel_gini_sample(&[4.0, 4.0, 4.0], 0).unwrap(), 0.0);
        assert_eq!(
            jel_gini_sample(&[0.0, 0.0], 1).unwrap_err(),
            GiniError::ZeroMean { group: 1 }
        );
    }

    #[test]
    fn jel_matches_pairwise_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.random_range(2..40);
            let x: Vec<f64> = (0..n)
                .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() * 5.0 })
                .chain([1.0])
                .collect();
            let n = x.len();
            let mut s = 0.0;
            for j in 0..n {
                for k in (j + 1)..n {
                    s += (x[j] - x[k]).abs();
                }
            }
            let mean = x.iter().sum::<f64>() / n as f64;
            let want = s / (n * (n - 1) / 2) as f64 / (2.0 * mean);
            assert!((jel_gini_sample(&x, 0).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudo_values_match_explicit_leave_one_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let x: Vec<f64> = (0..25)
                .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() })
                .chain([0.7, 1.3])
                .collect();
            let n = x.len() as f64;
            let full = jel_gini_sample(&x, 0).unwrap();
            let pv = jel_pseudo_values(&x, 0).unwrap();
            for j in 0..x.len() {
                let mut rest = x.clone();
                rest.remove(j);
                let loo = jel_gini_sample(&rest, 0).unwrap();
                let want = n * full - (n - 1.0) * loo;
                assert!((pv[j] - want).abs() < 1e-10, "{j}: {} vs {want}", pv[j]);
            }
            let mean_pv = pv.iter().sum::<f64>() / n;
            assert!(mean_pv.is_finite());
        }
    }

    #[test]
    fn pseudo_values_reject_single_positive_leave_out() {
        assert_eq!(
            jel_pseudo_values(&[0.0, 0.0, 2.0], 0).unwrap_err(),
            GiniError::ZeroMean { group: 0 }
        );
    }

    #[test]
    fn mele_matches_brute_force_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let d = random_data(&mut rng, 40, 0.2);
            let fit = fit_theta(&d, &Basis::identity(), &FitOptions::default()).unwrap();
            let est = mele_gini(&fit);
            let values: Vec<f64> = fit.points().iter().map(|p| p.value).collect();
            let (m0, psi0) = brute_mean_psi(&values, fit.weights());
            let (m1, psi1) = brute_mean_psi(&values, &fit.tilted_weights());
            let nu = fit.zero_proportions().nu;
            assert!((est.g0 - ((2.0 * nu[0] - 1.0) + (1.0 - nu[0]) * psi0 / m0)).abs() < 1e-12);
            assert!((est.g1 - ((2.0 * nu[1] - 1.0) + (1.0 - nu[1]) * psi1 / m1)).abs() < 1e-12);
        }
    }

    #[test]
    fn quasi_separated_sample_approaches_empirical() {
        let d = data(&[1.0, 2.0], &[2.0, 4.0]);
        let fit = fit_theta(&d, &Basis::log(), &FitOptions::default()).unwrap();
        let mele = mele_gini(&fit);
        let emp = emp_gini(&d);
        assert!((mele.g0 - emp.g0).abs() < 1e-4);
        assert!((mele.g1 - emp.g1).abs() < 1e-4);
    }

    #[test]
    fn pairwise_identity() {
        // psi - m M - sum p^2 x = D / 2 for mass M, with D = sum_jk p_j p_k |x_j - x_k|.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let d = random_data(&mut rng, 50, 0.0);
            let fit = fit_theta(&d, &Basis::log_identity(), &FitOptions::default()).unwrap();
            let est = mele_gini(&fit);
            let values: Vec<f64> = fit.points().iter().map(|p| p.value).collect();
            let psi = est.psi.unwrap();
            for (g, mass) in [fit.weights().to_vec(), fit.tilted_weights()].into_iter().enumerate() {
                let total: f64 = mass.iter().sum();
                let mut dsum = 0.0;
                for j in 0..values.len() {
                    for k in 0..values.len() {
                        dsum += mass[j] * mass[k] * (values[j] - values[k]).abs();
                    }
                }
                let self_pairs: f64 = values.iter().zip(&mass).map(|(x, p)| p * p * x).sum();
                let lhs = (psi[g] - est.m[g] * total - self_pairs) / est.m[g];
                assert!((lhs - dsum / (2.0 * est.m[g])).abs() < 1e-12, "{lhs}");
            }
        }
    }

    #[test]
    fn mele_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for basis in [Basis::log(), Basis::identity()] {
            let d = random_data(&mut rng, 60, 0.25);
            let base = mele_gini(&fit_theta(&d, &basis, &FitOptions::default()).unwrap());
            for c in [0.2, 3.0, 11.0] {
                let fit = fit_theta(&d.scaled(c), &basis, &FitOptions::default()).unwrap();
                let est = mele_gini(&fit);
                assert!((est.g0 - base.g0).abs() < 1e-8);
                assert!((est.g1 - base.g1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn emp_and_jel_permutation_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let d = random_data(&mut rng, 30, 0.3);
        let emp = emp_gini(&d);
        let jel = jel_gini(&d).unwrap();
        let mut x0 = d.group(0).to_vec();
        x0.reverse();
        let mut x1 = d.group(1).to_vec();
        x1.rotate_left(7);
        let permuted = TwoSampleData::new(x0, x1).unwrap();
        assert_eq!(emp_gini(&permuted).g(), emp.g());
        assert_eq!(jel_gini(&permuted).unwrap().g(), jel.g());
        for c in [0.5, 2.0, 8.0] {
            assert_eq!(emp_gini(&d.scaled(c)).g(), emp.g());
            assert_eq!(jel_gini(&d.scaled(c)).unwrap().g(), jel.g());
        }
        let e = emp_gini(&d.scaled(3.7));
        assert!((e.g0 - emp.g0).abs() < 1e-14 && (e.g1 - emp.g1).abs() < 1e-14);
    }

    #[test]
    fn zero_theta_single_pool_reduces_to_emp() {
        let x = [0.0, 1.2, 3.4, 0.0, 2.2, 5.1];
        let d = data(&x, &x);
        let fit = DrmFit::at_theta(&d, &Basis::identity(), vec![0.0, 0.0]).unwrap();
        let mele = mele_gini(&fit);
        let emp = emp_gini(&d);
        assert!((mele.g0 - emp.g0).abs() < 1e-14);
        assert!((mele.g1 - emp.g1).abs() < 1e-14);
    }

    #[test]
    fn estimates_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..20 {
            let d = random_data(&mut rng, 30, 0.4);
            let fit = fit_theta(&d, &Basis::identity(), &FitOptions::default()).unwrap();
            for est in [mele_gini(&fit), emp_gini(&d)] {
                for i in 0..2 {
                    assert!(est.m[i] > 0.0);
                    assert!(est.g()[i] <= 1.0 + 1e-12);
                    assert!(est.g()[i] >= 2.0 * est.nu[i] - 1.0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_precision_estimates() {
        let x0: Vec<f32> = vec![0.4, 1.1, 0.0, 2.3, 0.9, 3.1, 0.2, 1.7];
        let x1: Vec<f32> = vec![1.9, 0.7, 4.2, 2.8, 0.0, 5.5, 1.3, 3.6];
        let d32 = TwoSampleData::new(x0.clone(), x1.clone()).unwrap();
        let d64 = TwoSampleData::new(
            x0.iter().map(|&v| v as f64).collect(),
            x1.iter().map(|&v| v as f64).collect(),
        )
        .unwrap();
        let a = emp_gini(&d32);
        let b = emp_gini(&d64);
        assert!((a.g0 as f64 - b.g0).abs() < 1e-5);
        let fit = fit_theta(&d32, &Basis::identity(), &FitOptions::for_scalar::<f32>()).unwrap();
        let m = mele_gini(&fit);
        assert!(m.g0.is_finite() && m.g1.is_finite());
    }

    #[test]
    fn continuous_gini_values() {
        // Gamma(2): Gamma(2.5) / (Gamma(3) sqrt(pi)) = 3/8.
        let g = ContinuousLaw::ChiSquare { df: 4.0 }.gini().unwrap();
        assert!((g - 0.375).abs() < 1e-13);
        // Exponential is gamma with shape 1.
        let e = ContinuousLaw::Gamma { shape: 1.0, scale: 3.0 }.gini().unwrap();
        assert!((e - 0.5).abs() < 1e-13);
        // Lognormal: 2 Phi(sigma / sqrt 2) - 1 at sigma = 1 is 0.5205.
        let l = ContinuousLaw::LogNormal { mu: 0.0, sigma: 1.0 }.gini().unwrap();
        assert!((l - 0.520499876).abs() < 1e-8);
        assert!(ContinuousLaw::Exponential { rate: -1.0 }.gini().is_err());
    }

    #[test]
    fn scenario_table_alternatives() {
        let cells: [(&[ContinuousLaw; 2], [f64; 2], f64, f64); 6] = [
            (&CHISQ, [0.0, 0.0], 0.049, 0.206),
            (&CHISQ, [0.1, 0.3], -0.081, -0.323),
            (&CHISQ, [0.4, 0.65], -0.127, -0.633),
            (&EXP, [0.1, 0.3], -0.100, -0.418),
            (&EXP, [0.3, 0.45], -0.075, -0.350),
            (&EXP, [0.5, 0.4], 0.050, 0.251),
        ];
        for (laws, nu, diff, logit_diff) in cells {
            let t = true_gini_mixture(nu, laws).unwrap();
            assert!((t.diff - diff).abs() <= 0.001, "{nu:?}: {}", t.diff);
            assert!((t.logit_diff - logit_diff).abs() <= 0.001, "{nu:?}: {}", t.logit_diff);
        }
        let t = true_gini_mixture([0.0, 0.0], &EXP).unwrap();
        assert_eq!((t.g0, t.g1, t.logit_diff), (0.5, 0.5, 0.0));
        assert!(true_gini_mixture([1.0, 0.0], &EXP).is_err());
    }

    #[test]
    fn scenario_table_nulls() {
        for (nu0, nu1) in [(0.0, 0.079), (0.3, 0.355), (0.7, 0.724)] {
            let g0 = mixture_gini(nu0, &CHISQ[0]).unwrap();
            let got = null_nu1(g0, &CHISQ[1]).unwrap();
            assert!((got - nu1).abs() < 0.0005, "{got}");
        }
        assert_eq!(null_nu1(0.5, &EXP[1]).unwrap(), 0.0);
        assert!(null_nu1(0.2, &CHISQ[1]).is_err());
    }

    #[test]
    fn estimate_serializes_with_method_tag() {
        let d = data(&[1.0, 3.0], &[2.0, 5.0]);
        let json = serde_json::to_value(emp_gini(&d)).unwrap();
        assert_eq!(json["method"], "EMP");
        assert!(json["g0"].is_number());
    }
}
