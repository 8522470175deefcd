//! Simulation scenarios and study drivers for point estimation, intervals and
//! equality tests.
//!
//! Every replicate `r` draws its data from the ChaCha8 stream `r` of the study
//! seed, so studies are reproducible and do not depend on the thread schedule.
//! Aggregates are compensated sums taken in replicate order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drm::{fit_theta, FitOptions};
use crate::gini::{emp_gini, jel_gini, mele_gini, true_gini_mixture, ContinuousLaw, GiniError, ScenarioTruth};
use crate::inference::{
    confidence_interval, replicate_rng, test_equality, InferenceError, InferenceOptions, IntervalMethod, Target,
    TestMethod, TestResult,
};
use crate::sample::{Basis, BasisKind, TwoSampleData};
use crate::scalar::stable_sum;
use crate::variance::{delta_variance, estimate_sigma_drm, estimate_sigma_nonparam, CovarianceEstimate};

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("{method}: {failed} of {total} replicates failed (limit {limit_percent}%)", limit_percent = MAX_FAILURE_RATE * 100.0)]
    TooManyFailures { method: String, failed: usize, total: usize },
    #[error(transparent)]
    Gini(#[from] GiniError),
}

/// Pair of continuous laws the positive parts are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// chi-square with 3 and 4 degrees of freedom.
    Chisq,
    /// Exponential with rates 0.5 and 1.
    Exp,
}

impl Family {
    pub fn laws(self) -> [ContinuousLaw; 2] {
        match self {
            Family::Chisq => [ContinuousLaw::ChiSquare { df: 3.0 }, ContinuousLaw::ChiSquare { df: 4.0 }],
            Family::Exp => [
                ContinuousLaw::Exponential { rate: 0.5 },
                ContinuousLaw::Exponential { rate: 1.0 },
            ],
        }
    }

    /// Correctly specified basis: `log x` for chi-square, `x` for exponential.
    pub fn default_basis(self) -> BasisKind {
        match self {
            Family::Chisq => BasisKind::Log,
            Family::Exp => BasisKind::Identity,
        }
    }

    /// Zero-proportion pairs under which the two Gini indices are equal.
    pub fn null_cells(self) -> [[f64; 2]; 3] {
        match self {
            Family::Chisq => [[0.0, 0.079], [0.3, 0.355], [0.7, 0.724]],
            Family::Exp => [[0.0, 0.0], [0.3, 0.3], [0.7, 0.7]],
        }
    }

    /// Zero-proportion pairs of the power study.
    pub fn alternative_cells(self) -> [[f64; 2]; 3] {
        match self {
            Family::Chisq => [[0.0, 0.0], [0.1, 0.3], [0.4, 0.65]],
            Family::Exp => [[0.1, 0.3], [0.3, 0.45], [0.5, 0.4]],
        }
    }

    /// `nu1` giving group 1 the same Gini as group 0 with zero proportion `nu0`.
    pub fn null_partner(self, nu0: f64) -> Result<f64, GiniError> {
        let [l0, l1] = self.laws();
        let g0 = crate::gini::mixture_gini(nu0, &l0)?;
        crate::gini::null_nu1(g0, &l1)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Chisq => "chisq",
            Family::Exp => "exp",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chisq" | "chi2" | "chisquare" => Ok(Family::Chisq),
            "exp" | "exponential" => Ok(Family::Exp),
            other => Err(format!("unknown family '{other}' (expected chisq or exp)")),
        }
    }
}

fn serialize_basis<S: serde::Serializer>(kind: &BasisKind, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(kind)
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub family: Family,
    #[serde(serialize_with = "serialize_basis")]
    pub basis: BasisKind,
    pub nu: [f64; 2],
    pub n: [usize; 2],
    pub replications: usize,
    pub level: f64,
    /// Bootstrap replicates for the `BT-*` methods.
    pub bootstrap: usize,
    pub seed: u64,
    /// Run replicates on the rayon pool; results are identical either way.
    #[serde(skip)]
    pub parallel: bool,
}

impl ScenarioConfig {
    pub fn new(family: Family, nu: [f64; 2], n: [usize; 2]) -> Self {
        Self {
            family,
            basis: family.default_basis(),
            nu,
            n,
            replications: 2000,
            level: 0.95,
            bootstrap: 1000,
            seed: 0,
            parallel: true,
        }
    }

    /// Named cell `<family>-<n>-<nu>`, e.g. `chisq-100-00` or `exp-300-null3`.
    ///
    /// `<nu>` is `00`, `33`, `77`, `13` or `64` for equal-size cells with
    /// (0,0), (0.3,0.3), (0.7,0.7), (0.1,0.3), (0.6,0.4); `null0`, `null3`,
    /// `null7` for the equal-Gini cells and `alt1`..`alt3` for the power cells
    /// of the family.
    pub fn preset(name: &str) -> Result<Self, StudyError> {
        let bad = || StudyError::InvalidConfig(format!("unknown preset '{name}'"));
        let mut parts = name.split('-');
        let (Some(fam), Some(n), Some(cell), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let family: Family = fam.parse().map_err(|_| bad())?;
        let n: usize = n.parse().map_err(|_| bad())?;
        let nu = match cell {
            "00" => [0.0, 0.0],
            "33" => [0.3, 0.3],
            "77" => [0.7, 0.7],
            "13" => [0.1, 0.3],
            "64" => [0.6, 0.4],
            "null0" => family.null_cells()[0],
            "null3" => family.null_cells()[1],
            "null7" => family.null_cells()[2],
            "alt1" => family.alternative_cells()[0],
            "alt2" => family.alternative_cells()[1],
            "alt3" => family.alternative_cells()[2],
            _ => return Err(bad()),
        };
        Ok(Self::new(family, nu, [n, n]))
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let fail = |m: String| Err(StudyError::InvalidConfig(m));
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if self.nu.iter().any(|v| !(0.0..1.0).contains(v)) {
            return fail(format!("zero proportions {:?} must lie in [0, 1)", self.nu));
        }
        if self.n.iter().any(|&n| n < 3) {
            return fail(format!("group sizes {:?} must be at least 3", self.n));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail(format!("level {} is not in (0, 1)", self.level));
        }
        if matches!(self.basis, BasisKind::Custom { .. }) {
            return fail("simulation studies use a built-in basis".into());
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<ScenarioTruth, StudyError> {
        Ok(true_gini_mixture(self.nu, &self.family.laws())?)
    }

    pub fn basis_fn(&self) -> Basis<f64> {
        Basis::from_kind(self.basis.clone())
    }

    /// Applies `key=value` lines or a JSON object on top of `self`.
    ///
    /// Keys: `preset` (applied first), `family`, `basis`, `nu`, `n`,
    /// `replications` (or `R`), `level`, `bootstrap` (or `B`), `seed`. Pairs
    /// are written `a,b`; a single value is used for both groups.
    pub fn apply_config_text(self, text: &str) -> Result<Self, StudyError> {
        let trimmed = text.trim_start();
        let pairs: Vec<(String, String)> = if trimmed.starts_with('{') {
            let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(trimmed)
                .map_err(|e| StudyError::InvalidConfig(format!("config JSON: {e}")))?;
            map.into_iter()
                .map(|(k, v)| {
                    let v = match v {
                        serde_json::Value::String(s) => s,
                        serde_json::Value::Array(items) => {
                            items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
                        }
                        other => other.to_string(),
                    };
                    (k, v)
                })
                .collect()
        } else {
            let mut pairs = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    StudyError::InvalidConfig(format!("line {}: expected key=value", lineno + 1))
                })?;
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
            pairs
        };
        let mut cfg = self;
        if let Some((_, p)) = pairs.iter().find(|(k, _)| k == "preset") {
            let keep = (cfg.replications, cfg.level, cfg.bootstrap, cfg.seed, cfg.parallel);
            cfg = Self::preset(p)?;
            (cfg.replications, cfg.level, cfg.bootstrap, cfg.seed, cfg.parallel) = keep;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), StudyError> {
        let bad = |what: &str| StudyError::InvalidConfig(format!("{key}: cannot parse '{value}' as {what}"));
        match key {
            "family" => {
                self.family = value.parse().map_err(StudyError::InvalidConfig)?;
                self.basis = self.family.default_basis();
            }
            "basis" => self.basis = value.parse().map_err(StudyError::InvalidConfig)?,
            "nu" => self.nu = parse_pair(value).ok_or_else(|| bad("a pair of proportions"))?,
            "n" => self.n = parse_pair(value).ok_or_else(|| bad("a pair of sizes"))?,
            "replications" | "R" => self.replications = value.parse().map_err(|_| bad("a count"))?,
            "level" => self.level = value.parse().map_err(|_| bad("a number"))?,
            "bootstrap" | "B" => self.bootstrap = value.parse().map_err(|_| bad("a count"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
            other => return Err(StudyError::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

fn parse_pair<T: FromStr + Copy>(s: &str) -> Option<[T; 2]> {
    let s = s.trim().trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
    let items: Vec<T> = s.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    match items.as_slice() {
        [a] => Some([*a, *a]),
        [a, b] => Some([*a, *b]),
        _ => None,
    }
}

/// One draw from a continuous law. Exponentials use the inverse CDF.
pub fn draw_positive<R: Rng + ?Sized>(law: &ContinuousLaw, rng: &mut R) -> f64 {
    match *law {
        ContinuousLaw::Exponential { rate } => -(1.0 - rng.random::<f64>()).ln() / rate,
        ContinuousLaw::ChiSquare { df } => ChiSquared::new(df).expect("valid df").sample(rng),
        ContinuousLaw::Gamma { shape, scale } => Gamma::new(shape, scale).expect("valid gamma").sample(rng),
        ContinuousLaw::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).expect("valid lognormal").sample(rng),
    }
}

/// `n` draws from the mixture with a point mass `nu` at zero.
pub fn draw_group<R: Rng + ?Sized>(law: &ContinuousLaw, nu: f64, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if nu > 0.0 && rng.random::<f64>() < nu {
                0.0
            } else {
                draw_positive(law, rng)
            }
        })
        .collect()
}

/// Draws both groups of a scenario; `None` if a group has fewer than two
/// positive values.
pub fn gen_sample<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Option<TwoSampleData<f64>> {
    let laws = config.family.laws();
    let x0 = draw_group(&laws[0], config.nu[0], config.n[0], rng);
    let x1 = draw_group(&laws[1], config.nu[1], config.n[1], rng);
    TwoSampleData::new(x0, x1).ok()
}

/// Per-replicate information handed to interval and test procedures.
#[derive(Debug, Clone)]
pub struct ReplicateContext {
    pub index: usize,
    /// Seed for any resampling inside the replicate.
    pub seed: u64,
    pub level: f64,
    pub bootstrap: usize,
    pub basis: Basis<f64>,
}

impl ReplicateContext {
    fn inference_options(&self) -> InferenceOptions {
        InferenceOptions {
            basis: self.basis.clone(),
            fit: FitOptions::default(),
            level: self.level,
            replicates: self.bootstrap,
            seed: self.seed,
        }
    }
}

/// An interval construction evaluated by [`run_ci_study`].
pub trait IntervalProcedure: Sync {
    fn name(&self) -> String;
    fn interval(
        &self,
        data: &TwoSampleData<f64>,
        target: Target,
        ctx: &ReplicateContext,
    ) -> Result<(f64, f64), InferenceError>;
}

impl IntervalProcedure for IntervalMethod {
    fn name(&self) -> String {
        IntervalMethod::name(*self).to_string()
    }

    fn interval(
        &self,
        data: &TwoSampleData<f64>,
        target: Target,
        ctx: &ReplicateContext,
    ) -> Result<(f64, f64), InferenceError> {
        let ci = confidence_interval(data, target, *self, &ctx.inference_options())?;
        Ok((ci.lower, ci.upper))
    }
}

/// An equality test evaluated by [`run_test_study`].
pub trait TestProcedure: Sync {
    fn name(&self) -> String;
    fn test(&self, data: &TwoSampleData<f64>, ctx: &ReplicateContext) -> Result<TestResult, InferenceError>;
}

impl TestProcedure for TestMethod {
    fn name(&self) -> String {
        TestMethod::name(*self).to_string()
    }

    fn test(&self, data: &TwoSampleData<f64>, ctx: &ReplicateContext) -> Result<TestResult, InferenceError> {
        test_equality(data, *self, &ctx.inference_options())
    }
}

/// Bias and MSE of one estimator for one target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRow {
    pub estimator: String,
    pub target: Target,
    pub used: usize,
    pub bias_x1000: f64,
    pub mse_x1000: f64,
    pub mse_se_x1000: f64,
    /// Across-replicate variance of the estimates; absent with one replicate.
    pub variance_x1000: Option<f64>,
    /// Mean plug-in variance `sigma^2 / n`, for estimators that have one.
    pub plugin_variance_x1000: Option<f64>,
}

/// Coverage and length of one interval method for one target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalRow {
    pub method: String,
    pub target: Target,
    pub used: usize,
    pub failed: usize,
    pub cp_percent: f64,
    pub cp_se: f64,
    pub average_length: f64,
}

/// Rejection rate of one test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRow {
    pub method: String,
    pub used: usize,
    pub failed: usize,
    pub alpha: f64,
    pub rejection_percent: f64,
    pub rejection_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Point,
    Interval,
    Test,
}

/// Result of a study. Only the rows of its kind are filled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub study: StudyKind,
    pub config: ScenarioConfig,
    pub truth: ScenarioTruth,
    /// Replicates whose data or shared fit could not be produced.
    pub failed_replications: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub point: Vec<PointRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<IntervalRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<TestRow>,
}

impl StudySummary {
    fn empty(study: StudyKind, config: &ScenarioConfig, truth: ScenarioTruth) -> Self {
        Self {
            study,
            config: config.clone(),
            truth,
            failed_replications: 0,
            point: Vec::new(),
            intervals: Vec::new(),
            tests: Vec::new(),
        }
    }

    pub fn point_row(&self, estimator: &str, target: Target) -> Option<&PointRow> {
        self.point.iter().find(|r| r.estimator == estimator && r.target == target)
    }

    pub fn interval_row(&self, method: &str, target: Target) -> Option<&IntervalRow> {
        self.intervals.iter().find(|r| r.method == method && r.target == target)
    }

    pub fn test_row(&self, method: &str) -> Option<&TestRow> {
        self.tests.iter().find(|r| r.method == method)
    }

    /// Tab-separated table, one line per estimator or method.
    pub fn to_tsv(&self) -> String {
        let c = &self.config;
        let lead = format!("{}\t{}\t{}\t{}\t{}", c.family, c.n[0], c.n[1], c.nu[0], c.nu[1]);
        let mut out = String::from("family\tn0\tn1\tnu0\tnu1");
        match self.study {
            StudyKind::Point => {
                out.push_str("\testimator");
                for t in Target::ALL {
                    out.push_str(&format!("\t{t}_Bias_x1000\t{t}_MSE_x1000"));
                }
                out.push('\n');
                for est in unique(self.point.iter().map(|r| r.estimator.as_str())) {
                    out.push_str(&format!("{lead}\t{est}"));
                    for t in Target::ALL {
                        match self.point_row(est, t) {
                            Some(r) => out.push_str(&format!("\t{:.2}\t{:.2}", r.bias_x1000, r.mse_x1000)),
                            None => out.push_str("\tNA\tNA"),
                        }
                    }
                    out.push('\n');
                }
            }
            StudyKind::Interval => {
                let targets: Vec<Target> = unique(self.intervals.iter().map(|r| r.target)).collect();
                out.push_str("\tmethod");
                for t in &targets {
                    out.push_str(&format!("\t{t}_CP\t{t}_AL\t{t}_CP_SE"));
                }
                out.push('\n');
                for m in unique(self.intervals.iter().map(|r| r.method.as_str())) {
                    out.push_str(&format!("{lead}\t{m}"));
                    for &t in &targets {
                        match self.interval_row(m, t) {
                            Some(r) => {
                                out.push_str(&format!("\t{:.2}\t{:.3}\t{:.2}", r.cp_percent, r.average_length, r.cp_se))
                            }
                            None => out.push_str("\tNA\tNA\tNA"),
                        }
                    }
                    out.push('\n');
                }
            }
            StudyKind::Test => {
                out.push_str("\tmethod\trejection_pct\trejection_SE\n");
                for r in &self.tests {
                    out.push_str(&format!("{lead}\t{}\t{:.2}\t{:.2}\n", r.method, r.rejection_percent, r.rejection_se));
                }
            }
        }
        out
    }
}

fn unique<T: PartialEq + Copy>(items: impl Iterator<Item = T>) -> impl Iterator<Item = T> {
    let mut seen: Vec<T> = Vec::new();
    for i in items {
        if !seen.contains(&i) {
            seen.push(i);
        }
    }
    seen.into_iter()
}

/// Runs `f` on every replicate index, in parallel or serially, keeping order.
fn map_replicates<T: Send>(config: &ScenarioConfig, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if config.parallel {
        (0..config.replications).into_par_iter().map(f).collect()
    } else {
        (0..config.replications).map(f).collect()
    }
}

/// Data and context of replicate `index`; `None` if the sample is invalid.
fn replicate(config: &ScenarioConfig, index: usize) -> Option<(TwoSampleData<f64>, ReplicateContext)> {
    let mut rng: ChaCha8Rng = replicate_rng(config.seed, index as u64);
    let data = gen_sample(config, &mut rng)?;
    let ctx = ReplicateContext {
        index,
        seed: rng.random(),
        level: config.level,
        bootstrap: config.bootstrap,
        basis: config.basis_fn(),
    };
    Some((data, ctx))
}

fn check_failures(method: &str, failed: usize, total: usize) -> Result<(), StudyError> {
    if failed as f64 > MAX_FAILURE_RATE * total as f64 {
        Err(StudyError::TooManyFailures {
            method: method.to_string(),
            failed,
            total,
        })
    } else {
        Ok(())
    }
}

fn rate_se(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}

fn mean(v: &[f64]) -> f64 {
    stable_sum(v.iter().copied()) / v.len() as f64
}

/// Estimates of one replicate: per estimator `[G0, G1, diff]` and plug-in
/// variances where available.
struct PointReplicate {
    values: [[f64; 3]; 3],
    plugin: [Option<[f64; 3]>; 3],
}

const POINT_ESTIMATORS: [&str; 3] = ["EMP", "JEL", "DRM"];

fn plugin_variances(cov: &CovarianceEstimate<f64>, g: [f64; 2]) -> Option<[f64; 3]> {
    let n = cov.n as f64;
    let mut out = [0.0; 3];
    for (k, t) in Target::ALL.into_iter().enumerate() {
        out[k] = delta_variance(&t.contrast(), g, &cov.sigma).ok()? / n;
    }
    Some(out)
}

fn point_replicate(config: &ScenarioConfig, index: usize) -> Option<PointReplicate> {
    let (data, ctx) = replicate(config, index)?;
    let fit = fit_theta(&data, &ctx.basis, &FitOptions::default()).ok()?;
    let drm = mele_gini(&fit);
    let emp = emp_gini(&data);
    let jel = jel_gini(&data).ok()?;
    let drm_cov = estimate_sigma_drm(&fit, &drm).ok();
    let emp_cov = estimate_sigma_nonparam(&data).ok();
    let row = |e: &crate::gini::GiniEstimate<f64>| [e.g0, e.g1, e.diff];
    Some(PointReplicate {
        values: [row(&emp), row(&jel), row(&drm)],
        plugin: [
            emp_cov.and_then(|c| plugin_variances(&c, emp.g())),
            None,
            drm_cov.and_then(|c| plugin_variances(&c, drm.g())),
        ],
    })
}

/// Bias and MSE (both x1000) of the EMP, JEL and DRM estimators.
pub fn run_point_study(config: &ScenarioConfig) -> Result<StudySummary, StudyError> {
    config.validate()?;
    let truth = config.truth()?;
    let truths = [truth.g0, truth.g1, truth.diff];
    let reps = map_replicates(config, |r| point_replicate(config, r));
    let ok: Vec<&PointReplicate> = reps.iter().flatten().collect();
    let failed = reps.len() - ok.len();
    check_failures("DRM", failed, config.replications)?;
    let mut summary = StudySummary::empty(StudyKind::Point, config, truth);
    summary.failed_replications = failed;
    for (e, name) in POINT_ESTIMATORS.iter().enumerate() {
        for (k, target) in Target::ALL.into_iter().enumerate() {
            let est: Vec<f64> = ok.iter().map(|p| p.values[e][k]).collect();
            let err: Vec<f64> = est.iter().map(|v| v - truths[k]).collect();
            let sq: Vec<f64> = err.iter().map(|v| v * v).collect();
            let used = est.len();
            let mse = mean(&sq);
            let mse_se = if used > 1 {
                let dev: Vec<f64> = sq.iter().map(|s| (s - mse).powi(2)).collect();
                (stable_sum(dev) / ((used - 1) * used) as f64).sqrt()
            } else {
                0.0
            };
            let variance = (used > 1).then(|| {
                let m = mean(&est);
                stable_sum(est.iter().map(|v| (v - m).powi(2))) / (used - 1) as f64
            });
            let plugin: Option<Vec<f64>> = ok.iter().map(|p| p.plugin[e].map(|v| v[k])).collect();
            summary.point.push(PointRow {
                estimator: name.to_string(),
                target,
                used,
                bias_x1000: 1000.0 * mean(&err),
                mse_x1000: 1000.0 * mse,
                mse_se_x1000: 1000.0 * mse_se,
                variance_x1000: variance.map(|v| 1000.0 * v),
                plugin_variance_x1000: plugin.filter(|p| !p.is_empty()).map(|p| 1000.0 * mean(&p)),
            });
        }
    }
    Ok(summary)
}

/// Coverage probability (%) and average length of each method on each target.
pub fn run_ci_study(
    config: &ScenarioConfig,
    methods: &[&dyn IntervalProcedure],
    targets: &[Target],
) -> Result<StudySummary, StudyError> {
    config.validate()?;
    let truth = config.truth()?;
    let cells: Vec<(usize, Target)> = (0..methods.len())
        .flat_map(|m| targets.iter().map(move |&t| (m, t)))
        .collect();
    let reps: Vec<Option<Vec<Option<(f64, f64)>>>> = map_replicates(config, |r| {
        let (data, ctx) = replicate(config, r)?;
        Some(
            cells
                .iter()
                .map(|&(m, t)| methods[m].interval(&data, t, &ctx).ok())
                .collect(),
        )
    });
    let generated: Vec<&Vec<Option<(f64, f64)>>> = reps.iter().flatten().collect();
    let mut summary = StudySummary::empty(StudyKind::Interval, config, truth);
    summary.failed_replications = reps.len() - generated.len();
    check_failures("data generation", summary.failed_replications, config.replications)?;
    for (c, &(m, target)) in cells.iter().enumerate() {
        let name = methods[m].name();
        let value = match target {
            Target::G0 => truth.g0,
            Target::G1 => truth.g1,
            Target::Diff => truth.diff,
        };
        let ivs: Vec<(f64, f64)> = generated.iter().filter_map(|v| v[c]).collect();
        let failed = config.replications - ivs.len();
        check_failures(&format!("{name} {target}"), failed, config.replications)?;
        let covered: Vec<f64> = ivs
            .iter()
            .map(|&(lo, hi)| if lo <= value && value <= hi { 1.0 } else { 0.0 })
            .collect();
        let p = mean(&covered);
        summary.intervals.push(IntervalRow {
            method: name,
            target,
            used: ivs.len(),
            failed,
            cp_percent: 100.0 * p,
            cp_se: 100.0 * rate_se(p, ivs.len()),
            average_length: mean(&ivs.iter().map(|(lo, hi)| hi - lo).collect::<Vec<_>>()),
        });
    }
    Ok(summary)
}

/// Rejection rate (%) of each test at significance `1 - level`.
pub fn run_test_study(config: &ScenarioConfig, methods: &[&dyn TestProcedure]) -> Result<StudySummary, StudyError> {
    config.validate()?;
    let truth = config.truth()?;
    let alpha = 1.0 - config.level;
    let reps: Vec<Option<Vec<Option<bool>>>> = map_replicates(config, |r| {
        let (data, ctx) = replicate(config, r)?;
        Some(
            methods
                .iter()
                .map(|m| m.test(&data, &ctx).ok().map(|t| t.rejects_at(alpha)))
                .collect(),
        )
    });
    let generated: Vec<&Vec<Option<bool>>> = reps.iter().flatten().collect();
    let mut summary = StudySummary::empty(StudyKind::Test, config, truth);
    summary.failed_replications = reps.len() - generated.len();
    check_failures("data generation", summary.failed_replications, config.replications)?;
    for (k, m) in methods.iter().enumerate() {
        let name = m.name();
        let rejected: Vec<f64> = generated
            .iter()
            .filter_map(|v| v[k])
            .map(|r| if r { 1.0 } else { 0.0 })
            .collect();
        let failed = config.replications - rejected.len();
        check_failures(&name, failed, config.replications)?;
        let p = mean(&rejected);
        summary.tests.push(TestRow {
            method: name,
            used: rejected.len(),
            failed,
            alpha,
            rejection_percent: 100.0 * p,
            rejection_se: 100.0 * rate_se(p, rejected.len()),
        });
    }
    Ok(summary)
}
