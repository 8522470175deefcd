//! Confidence intervals and tests for two Gini indices.
//!
//! Interval methods:
//!
//! | method  | construction                                              |
//! |---------|-----------------------------------------------------------|
//! | NA-DRM  | Wald interval from the DRM estimate and plug-in variance  |
//! | NL-DRM  | Wald interval on the logit scale, back-transformed        |
//! | BT-DRM  | bootstrap-t with the DRM estimate                         |
//! | BL-DRM  | bootstrap-t on the logit scale                            |
//! | NA-EMP  | Wald interval from the empirical estimate                 |
//! | NL-EMP  | logit Wald interval from the empirical estimate           |
//! | BT-EMP  | bootstrap-t with the empirical estimate                   |
//! | JEL     | jackknife empirical likelihood                            |
//! | AJEL    | adjusted jackknife empirical likelihood                   |

mod bootstrap;
mod el;
mod gof;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::drm::{fit_theta, FitError, FitOptions};
use crate::gini::{emp_gini, jel_pseudo_values, mele_gini, GiniError};
use crate::linalg::Matrix;
use crate::sample::{Basis, TwoSampleData};
use crate::variance::{
    delta_variance, estimate_sigma_drm, estimate_sigma_nonparam, Contrast, SmoothContrast, VarianceError,
};

pub use bootstrap::{bootstrap_t_ci, quantile_type7, replicate_rng, IdentityResampler, Resampler, WithReplacement};
pub use el::{
    el_centered, el_difference_interval, el_mean_interval, el_mean_logratio, jel_difference_statistic,
    jel_statistic, ElSolution,
};
pub use gof::{gof_statistic, gof_test};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Gini(#[from] GiniError),
    #[error(transparent)]
    Variance(#[from] VarianceError),
    #[error("{failed} of {total} bootstrap replicates failed (more than 10%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error("no {side} bound: the likelihood ratio statistic stays below the critical value")]
    OpenEndedBound { side: &'static str },
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Quantity an interval is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Target {
    G0,
    G1,
    Diff,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::G0, Target::G1, Target::Diff];

    pub fn contrast(self) -> Contrast {
        match self {
            Target::G0 => Contrast::Component(0),
            Target::G1 => Contrast::Component(1),
            Target::Diff => Contrast::Difference,
        }
    }

    fn logit_contrast(self) -> Result<Contrast, InferenceError> {
        match self {
            Target::G0 => Ok(Contrast::LogitComponent(0)),
            Target::G1 => Ok(Contrast::LogitComponent(1)),
            Target::Diff => Err(InferenceError::InvalidArgument(
                "logit intervals are defined for a single Gini index".into(),
            )),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::G0 => "G0",
            Target::G1 => "G1",
            Target::Diff => "DIFF",
        })
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "g0" => Ok(Target::G0),
            "g1" => Ok(Target::G1),
            "diff" => Ok(Target::Diff),
            other => Err(format!("unknown target '{other}' (expected g0, g1 or diff)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IntervalMethod {
    #[serde(rename = "NA-EMP")]
    NaEmp,
    #[serde(rename = "NL-EMP")]
    NlEmp,
    #[serde(rename = "BT-EMP")]
    BtEmp,
    #[serde(rename = "JEL")]
    Jel,
    #[serde(rename = "AJEL")]
    Ajel,
    #[serde(rename = "NA-DRM")]
    NaDrm,
    #[serde(rename = "NL-DRM")]
    NlDrm,
    #[serde(rename = "BT-DRM")]
    BtDrm,
    #[serde(rename = "BL-DRM")]
    BlDrm,
}

impl IntervalMethod {
    pub const ALL: [IntervalMethod; 9] = [
        IntervalMethod::NaEmp,
        IntervalMethod::NlEmp,
        IntervalMethod::BtEmp,
        IntervalMethod::Jel,
        IntervalMethod::Ajel,
        IntervalMethod::NaDrm,
        IntervalMethod::NlDrm,
        IntervalMethod::BtDrm,
        IntervalMethod::BlDrm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntervalMethod::NaEmp => "NA-EMP",
            IntervalMethod::NlEmp => "NL-EMP",
            IntervalMethod::BtEmp => "BT-EMP",
            IntervalMethod::Jel => "JEL",
            IntervalMethod::Ajel => "AJEL",
            IntervalMethod::NaDrm => "NA-DRM",
            IntervalMethod::NlDrm => "NL-DRM",
            IntervalMethod::BtDrm => "BT-DRM",
            IntervalMethod::BlDrm => "BL-DRM",
        }
    }

    /// Whether the method resamples.
    pub fn is_bootstrap(self) -> bool {
        matches!(self, IntervalMethod::BtEmp | IntervalMethod::BtDrm | IntervalMethod::BlDrm)
    }
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntervalMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IntervalMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown interval method '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalEstimate {
    pub target: Target,
    pub method: IntervalMethod,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalEstimate {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    /// Rejection decision at the levels 0.01, 0.05 and 0.10.
    pub reject: BTreeMap<String, bool>,
}

impl TestResult {
    pub fn new(method: impl Into<String>, statistic: f64, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        let reject = [0.01, 0.05, 0.10]
            .into_iter()
            .map(|a| (format!("{a:.2}"), p_value < a))
            .collect();
        Self {
            method: method.into(),
            statistic,
            p_value,
            reject,
        }
    }

    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn check_level(level: f64) -> Result<(), InferenceError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(InferenceError::InvalidArgument(format!("confidence level {level} is not in (0, 1)")))
    }
}

/// Upper `(1 - level) / 2` standard normal quantile.
pub fn normal_critical(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// `level` quantile of the chi-square distribution with one degree of freedom.
pub fn chisq1_critical(level: f64) -> f64 {
    let z = normal_critical(level);
    z * z
}

/// Two-sided standard normal p-value.
pub fn normal_two_sided_p(statistic: f64) -> f64 {
    erfc(statistic.abs() / std::f64::consts::SQRT_2)
}

/// `phi_hat -/+ z sigma_phi / sqrt(n)`.
pub fn wald_ci(
    phi_hat: f64,
    sigma_phi: f64,
    n: usize,
    level: f64,
    target: Target,
    method: IntervalMethod,
) -> Result<IntervalEstimate, InferenceError> {
    check_level(level)?;
    if !(sigma_phi >= 0.0) || n == 0 {
        return Err(InferenceError::InvalidArgument(format!(
            "standard deviation {sigma_phi} and sample size {n} must be nonnegative and positive"
        )));
    }
    let half = normal_critical(level) * sigma_phi / (n as f64).sqrt();
    Ok(IntervalEstimate {
        target,
        method,
        level,
        lower: phi_hat - half,
        upper: phi_hat + half,
    })
}

fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Wald interval for `logit(G)` mapped back by the inverse logit. `variance`
/// is the `sqrt(n)`-scale variance of the Gini estimate.
pub fn logit_ci(
    g: f64,
    variance: f64,
    n: usize,
    level: f64,
    target: Target,
    method: IntervalMethod,
) -> Result<IntervalEstimate, InferenceError> {
    if !(g > 0.0 && g < 1.0) {
        return Err(VarianceError::LogitSingular { g }.into());
    }
    let logit = (g / (1.0 - g)).ln();
    let sd = variance.max(0.0).sqrt() / (g * (1.0 - g));
    let w = wald_ci(logit, sd, n, level, target, method)?;
    Ok(IntervalEstimate {
        lower: inv_logit(w.lower),
        upper: inv_logit(w.upper),
        ..w
    })
}

/// Which point estimator and covariance drive a normal or bootstrap method.
#[derive(Debug, Clone)]
pub enum EstimatorCore {
    Drm { basis: Basis<f64>, fit: FitOptions },
    Emp,
}

/// Point estimates with their `sqrt(n)`-scale covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub g: [f64; 2],
    pub sigma: Matrix<f64>,
    pub n: usize,
}

impl Estimates {
    pub fn compute(data: &TwoSampleData<f64>, core: &EstimatorCore) -> Result<Self, InferenceError> {
        match core {
            EstimatorCore::Drm { basis, fit } => {
                let fitted = fit_theta(data, basis, fit)?;
                let est = mele_gini(&fitted);
                let cov = estimate_sigma_drm(&fitted, &est)?;
                Ok(Self {
                    g: est.g(),
                    sigma: cov.sigma,
                    n: data.total(),
                })
            }
            EstimatorCore::Emp => {
                let est = emp_gini(data);
                let cov = estimate_sigma_nonparam(data)?;
                Ok(Self {
                    g: est.g(),
                    sigma: cov.sigma,
                    n: data.total(),
                })
            }
        }
    }

    /// `(phi_hat, sigma_phi)` for a contrast.
    pub fn contrast(&self, phi: &Contrast) -> Result<(f64, f64), InferenceError> {
        let value = phi.value(self.g)?;
        let var = delta_variance(phi, self.g, &self.sigma)?;
        Ok((value, var.max(0.0).sqrt()))
    }

    /// Normal-approximation interval (`NA-*` or `NL-*`).
    pub fn normal_interval(
        &self,
        target: Target,
        method: IntervalMethod,
        level: f64,
    ) -> Result<IntervalEstimate, InferenceError> {
        match method {
            IntervalMethod::NaDrm | IntervalMethod::NaEmp => {
                let (phi, sd) = self.contrast(&target.contrast())?;
                wald_ci(phi, sd, self.n, level, target, method)
            }
            IntervalMethod::NlDrm | IntervalMethod::NlEmp => {
                let i = match target.logit_contrast()? {
                    Contrast::LogitComponent(i) => i,
                    _ => unreachable!("single-index logit contrast"),
                };
                logit_ci(self.g[i], self.sigma[(i, i)], self.n, level, target, method)
            }
            other => Err(InferenceError::InvalidArgument(format!(
                "{other} is not a normal-approximation interval"
            ))),
        }
    }
}

/// Jackknife pseudo-values of both groups.
pub fn pseudo_values(data: &TwoSampleData<f64>) -> Result<[Vec<f64>; 2], InferenceError> {
    Ok([jel_pseudo_values(data.group(0), 0)?, jel_pseudo_values(data.group(1), 1)?])
}

/// JEL or AJEL interval.
pub fn jel_ci(
    data: &TwoSampleData<f64>,
    target: Target,
    level: f64,
    adjusted: bool,
) -> Result<IntervalEstimate, InferenceError> {
    check_level(level)?;
    let pv = pseudo_values(data)?;
    jel_ci_from_pseudo(&pv, target, level, adjusted)
}

pub fn jel_ci_from_pseudo(
    pv: &[Vec<f64>; 2],
    target: Target,
    level: f64,
    adjusted: bool,
) -> Result<IntervalEstimate, InferenceError> {
    let crit = chisq1_critical(level);
    let (lower, upper) = match target {
        Target::G0 => el_mean_interval(&pv[0], crit, adjusted)?,
        Target::G1 => el_mean_interval(&pv[1], crit, adjusted)?,
        Target::Diff => el_difference_interval([&pv[0], &pv[1]], crit, adjusted)?,
    };
    Ok(IntervalEstimate {
        target,
        method: if adjusted { IntervalMethod::Ajel } else { IntervalMethod::Jel },
        level,
        lower,
        upper,
    })
}

/// Equality test methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TestMethod {
    #[serde(rename = "NA-DRM")]
    NaDrm,
    #[serde(rename = "NL-DRM")]
    NlDrm,
    #[serde(rename = "NA-EMP")]
    NaEmp,
    #[serde(rename = "NL-EMP")]
    NlEmp,
    #[serde(rename = "JEL")]
    Jel,
    #[serde(rename = "AJEL")]
    Ajel,
}

impl TestMethod {
    pub const ALL: [TestMethod; 6] = [
        TestMethod::NaEmp,
        TestMethod::NlEmp,
        TestMethod::Jel,
        TestMethod::Ajel,
        TestMethod::NaDrm,
        TestMethod::NlDrm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestMethod::NaDrm => "NA-DRM",
            TestMethod::NlDrm => "NL-DRM",
            TestMethod::NaEmp => "NA-EMP",
            TestMethod::NlEmp => "NL-EMP",
            TestMethod::Jel => "JEL",
            TestMethod::Ajel => "AJEL",
        }
    }
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TestMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown test method '{s}'"))
    }
}

/// Scale of the Wald equality test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestScale {
    /// `G0 - G1`.
    Na,
    /// `logit(G0) - logit(G1)`.
    Nl,
}

/// Wald test of `G0 = G1`: `sqrt(n) phi_hat / sigma_phi` against N(0, 1).
pub fn equality_test(
    g: [f64; 2],
    sigma: &Matrix<f64>,
    n: usize,
    scale: TestScale,
    label: &str,
) -> Result<TestResult, InferenceError> {
    let phi = match scale {
        TestScale::Na => Contrast::Difference,
        TestScale::Nl => Contrast::LogitDifference,
    };
    let value = phi.value(g)?;
    let sd = delta_variance(&phi, g, sigma)?.max(0.0).sqrt();
    let statistic = if sd > 0.0 {
        (n as f64).sqrt() * value / sd
    } else if value == 0.0 {
        0.0
    } else {
        return Err(InferenceError::Degenerate(format!(
            "zero standard deviation with contrast {value}"
        )));
    };
    Ok(TestResult::new(label, statistic, normal_two_sided_p(statistic)))
}

/// JEL (or AJEL) test of `G0 = G1` from the profile statistic at zero.
pub fn jel_equality_test(data: &TwoSampleData<f64>, adjusted: bool) -> Result<TestResult, InferenceError> {
    let pv = pseudo_values(data)?;
    let statistic = jel_difference_statistic([&pv[0], &pv[1]], 0.0, adjusted);
    let p_value = if statistic.is_finite() {
        let chi = ChiSquared::new(1.0).expect("one degree of freedom");
        chi.sf(statistic)
    } else {
        0.0
    };
    Ok(TestResult::new(
        if adjusted { "AJEL" } else { "JEL" },
        statistic,
        p_value,
    ))
}

/// Options shared by the high-level interval and test drivers.
#[derive(Debug, Clone)]
pub struct InferenceOptions {
    pub basis: Basis<f64>,
    pub fit: FitOptions,
    pub level: f64,
    /// Bootstrap replicates.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            basis: Basis::log(),
            fit: FitOptions::default(),
            level: 0.95,
            replicates: 1000,
            seed: 0,
        }
    }
}

impl InferenceOptions {
    pub fn drm_core(&self) -> EstimatorCore {
        EstimatorCore::Drm {
            basis: self.basis.clone(),
            fit: self.fit,
        }
    }
}

/// Any interval method on one target.
pub fn confidence_interval(
    data: &TwoSampleData<f64>,
    target: Target,
    method: IntervalMethod,
    options: &InferenceOptions,
) -> Result<IntervalEstimate, InferenceError> {
    check_level(options.level)?;
    match method {
        IntervalMethod::NaDrm | IntervalMethod::NlDrm => {
            Estimates::compute(data, &options.drm_core())?.normal_interval(target, method, options.level)
        }
        IntervalMethod::NaEmp | IntervalMethod::NlEmp => {
            Estimates::compute(data, &EstimatorCore::Emp)?.normal_interval(target, method, options.level)
        }
        IntervalMethod::Jel => jel_ci(data, target, options.level, false),
        IntervalMethod::Ajel => jel_ci(data, target, options.level, true),
        IntervalMethod::BtDrm | IntervalMethod::BlDrm | IntervalMethod::BtEmp => {
            let core = if method == IntervalMethod::BtEmp {
                EstimatorCore::Emp
            } else {
                options.drm_core()
            };
            bootstrap_t_ci(
                data,
                target,
                method,
                &core,
                options.replicates,
                options.level,
                options.seed,
                &WithReplacement,
            )
        }
    }
}

/// Any equality test.
pub fn test_equality(
    data: &TwoSampleData<f64>,
    method: TestMethod,
    options: &InferenceOptions,
) -> Result<TestResult, InferenceError> {
    let run = |core: EstimatorCore, scale| -> Result<TestResult, InferenceError> {
        let e = Estimates::compute(data, &core)?;
        equality_test(e.g, &e.sigma, e.n, scale, method.name())
    };
    match method {
        TestMethod::NaDrm => run(options.drm_core(), TestScale::Na),
        TestMethod::NlDrm => run(options.drm_core(), TestScale::Nl),
        TestMethod::NaEmp => run(EstimatorCore::Emp, TestScale::Na),
        TestMethod::NlEmp => run(EstimatorCore::Emp, TestScale::Nl),
        TestMethod::Jel => jel_equality_test(data, false),
        TestMethod::Ajel => jel_equality_test(data, true),
    }
}
