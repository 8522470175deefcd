//! Dual empirical likelihood of the density ratio model.
//!
//! The positive observations of both groups are pooled and the baseline
//! distribution `G0` is placed on them with weights `p`. The tilt
//! `omega(x) = exp(theta^T Q(x))` links `G1` to `G0`. The parameter `theta`
//! maximizes the concave dual log-likelihood
//!
//! ```text
//! l(theta) = -sum_{all positives} log{1 + rho (omega(x) - 1)} + sum_{group 1 positives} theta^T Q(x)
//! ```
//!
//! and the weights follow as `p = 1 / (N h(x))`, `h = 1 + rho (omega - 1)`,
//! renormalized to sum to one.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{cholesky, cholesky_solve, spd_condition_number, Matrix};
use crate::sample::{Basis, TwoSampleData, ZeroProportions};
use crate::scalar::{stable_sum, CompensatedSum, Real};

/// Hessians with a larger spectral condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Consecutive gradient fallback steps tolerated before giving up.
const MAX_FALLBACK_STEPS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("theta component {index} is not finite")]
    NonFiniteTheta { index: usize },
    #[error("theta has length {got}, the basis needs {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis function is not finite at x = {x}")]
    NonFiniteBasis { x: f64 },
    #[error(
        "dual likelihood maximization did not converge after {iterations} iterations \
         (gradient sup-norm {grad_norm:e}, last theta {theta:?})"
    )]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        theta: Vec<f64>,
    },
    #[error(
        "dual Hessian is rank deficient (condition number {condition:e}); \
         the basis function is degenerate on these observations"
    )]
    RankDeficient { condition: f64 },
}

/// Newton iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Sup-norm tolerance on the dual gradient.
    pub grad_tol: f64,
    /// Maximum step halvings per Newton iteration.
    pub step_halvings: usize,
}

impl FitOptions {
    /// Defaults with the gradient tolerance suited to `T`.
    pub fn for_scalar<T: Real>() -> Self {
        Self {
            grad_tol: T::DEFAULT_GRAD_TOL,
            ..Self::default()
        }
    }
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-8,
            step_halvings: 50,
        }
    }
}

/// A positive observation in the pooled sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledPoint<T> {
    pub value: T,
    pub group: usize,
    /// Index within the group's original observation vector.
    pub index: usize,
}

/// Pooled positives sorted by `(value, group, index)`.
pub(crate) fn pooled_positives<T: Real>(data: &TwoSampleData<T>) -> Vec<PooledPoint<T>> {
    let mut pts: Vec<PooledPoint<T>> = (0..2)
        .flat_map(|g| {
            data.positives(g).map(move |(index, value)| PooledPoint {
                value,
                group: g,
                index,
            })
        })
        .collect();
    pts.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .expect("finite observations")
            .then(a.group.cmp(&b.group))
            .then(a.index.cmp(&b.index))
    });
    pts
}

fn exponent_bound<T: Real>() -> T {
    T::lit(700.0).min(T::max_value().ln() * T::lit(0.9))
}

/// The dual problem with the design `Q(x)` evaluated once per pooled point.
#[derive(Debug, Clone)]
pub struct DualProblem<T> {
    points: Vec<PooledPoint<T>>,
    design: Vec<T>,
    k: usize,
    rho: T,
    group1_design_sum: Vec<T>,
}

impl<T: Real> DualProblem<T> {
    pub fn new(data: &TwoSampleData<T>, basis: &Basis<T>) -> Result<Self, FitError> {
        let points = pooled_positives(data);
        let k = basis.dim() + 1;
        let mut design = vec![T::zero(); points.len() * k];
        for (row, p) in design.chunks_mut(k).zip(&points) {
            basis.design_into(p.value, row);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(FitError::NonFiniteBasis { x: p.value.as_f64() });
            }
        }
        let mut sums = vec![CompensatedSum::new(); k];
        for (row, p) in design.chunks(k).zip(&points) {
            if p.group == 1 {
                for (acc, &q) in sums.iter_mut().zip(row) {
                    acc.add(q);
                }
            }
        }
        Ok(Self {
            points,
            design,
            k,
            rho: data.zero_proportions().rho,
            group1_design_sum: sums.iter().map(CompensatedSum::value).collect(),
        })
    }

    /// Length of `theta`, `d + 1`.
    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn points(&self) -> &[PooledPoint<T>] {
        &self.points
    }

    pub fn design_row(&self, i: usize) -> &[T] {
        &self.design[i * self.k..(i + 1) * self.k]
    }

    fn check(&self, theta: &[T]) -> Result<(), FitError> {
        if theta.len() != self.k {
            return Err(FitError::DimensionMismatch {
                expected: self.k,
                got: theta.len(),
            });
        }
        if let Some(index) = theta.iter().position(|t| !t.is_finite()) {
            return Err(FitError::NonFiniteTheta { index });
        }
        Ok(())
    }

    /// Clamped exponent `theta^T Q(x_i)`.
    fn exponent(&self, theta: &[T], i: usize) -> T {
        let s = dot(theta, self.design_row(i));
        let bound = exponent_bound::<T>();
        s.max(-bound).min(bound)
    }

    pub fn loglik(&self, theta: &[T]) -> Result<T, FitError> {
        self.check(theta)?;
        let rho = self.rho;
        let mut acc = CompensatedSum::new();
        for i in 0..self.points.len() {
            acc.add(-log_h(self.exponent(theta, i), rho));
        }
        acc.add(dot(theta, &self.group1_design_sum));
        Ok(acc.value())
    }

    pub fn gradient(&self, theta: &[T]) -> Result<Vec<T>, FitError> {
        self.check(theta)?;
        let mut acc = vec![CompensatedSum::new(); self.k];
        for i in 0..self.points.len() {
            let (h1, _) = tilt_shares(self.exponent(theta, i), self.rho);
            for (a, &q) in acc.iter_mut().zip(self.design_row(i)) {
                a.add(-h1 * q);
            }
        }
        Ok(acc
            .iter()
            .zip(&self.group1_design_sum)
            .map(|(a, &s)| a.value() + s)
            .collect())
    }

    pub fn hessian(&self, theta: &[T]) -> Result<Matrix<T>, FitError> {
        self.check(theta)?;
        let mut h = Matrix::zeros(self.k, self.k);
        for i in 0..self.points.len() {
            let (h1, h0) = tilt_shares(self.exponent(theta, i), self.rho);
            let row = self.design_row(i);
            h.add_outer(-(h1 * h0), row, row);
        }
        Ok(h.symmetrize())
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `log{1 + rho (e^s - 1)}` without overflow.
#[inline]
fn log_h<T: Real>(s: T, rho: T) -> T {
    if s <= T::zero() {
        (rho * s.exp_m1()).ln_1p()
    } else {
        s + (rho + (T::one() - rho) * (-s).exp()).ln()
    }
}

/// `(h1, h0) = (rho omega / h, (1 - rho) / h)`, computed stably.
#[inline]
fn tilt_shares<T: Real>(s: T, rho: T) -> (T, T) {
    let one = T::one();
    if s <= T::zero() {
        let e = s.exp();
        let h = one + rho * s.exp_m1();
        (rho * e / h, (one - rho) / h)
    } else {
        let e = (-s).exp();
        let denom = rho + (one - rho) * e;
        (rho / denom, (one - rho) * e / denom)
    }
}

/// Dual log-likelihood at `theta`.
pub fn dual_loglik<T: Real>(theta: &[T], data: &TwoSampleData<T>, basis: &Basis<T>) -> Result<T, FitError> {
    DualProblem::new(data, basis)?.loglik(theta)
}

pub fn dual_grad<T: Real>(theta: &[T], data: &TwoSampleData<T>, basis: &Basis<T>) -> Result<Vec<T>, FitError> {
    DualProblem::new(data, basis)?.gradient(theta)
}

pub fn dual_hessian<T: Real>(
    theta: &[T],
    data: &TwoSampleData<T>,
    basis: &Basis<T>,
) -> Result<Matrix<T>, FitError> {
    DualProblem::new(data, basis)?.hessian(theta)
}

/// Convergence record of a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics<T> {
    pub iterations: usize,
    pub grad_norm: T,
    pub loglik: T,
    pub converged: bool,
    pub fallback_steps: usize,
}

/// Fitted density ratio model.
#[derive(Debug, Clone)]
pub struct DrmFit<T> {
    theta: Vec<T>,
    zero: ZeroProportions<T>,
    basis: Basis<T>,
    points: Vec<PooledPoint<T>>,
    design: Vec<T>,
    omega: Vec<T>,
    weights: Vec<T>,
    diagnostics: FitDiagnostics<T>,
}

/// Maximizes the dual log-likelihood by damped Newton from `theta = 0`.
pub fn fit_theta<T: Real>(
    data: &TwoSampleData<T>,
    basis: &Basis<T>,
    options: &FitOptions,
) -> Result<DrmFit<T>, FitError> {
    let problem = DualProblem::new(data, basis)?;
    let tol = T::lit(options.grad_tol);
    let max_cond = T::lit(MAX_CONDITION);
    let k = problem.dim();
    let mut theta = vec![T::zero(); k];
    let mut loglik = problem.loglik(&theta)?;
    let mut iterations = 0;
    let mut fallback_steps = 0;
    let mut consecutive_fallbacks = 0;
    loop {
        let grad = problem.gradient(&theta)?;
        let grad_norm = sup_norm(&grad);
        let neg_hessian = problem.hessian(&theta)?.scale(-T::one());
        let condition = spd_condition_number(&neg_hessian);
        if grad_norm <= tol {
            if !(condition <= max_cond) {
                return Err(FitError::RankDeficient {
                    condition: condition.as_f64(),
                });
            }
            let diagnostics = FitDiagnostics {
                iterations,
                grad_norm,
                loglik,
                converged: true,
                fallback_steps,
            };
            return Ok(DrmFit::assemble(data, basis.clone(), problem, theta, diagnostics));
        }
        if iterations >= options.max_iter {
            return Err(non_convergence(iterations, grad_norm, &theta));
        }
        iterations += 1;

        let newton = if condition <= max_cond {
            cholesky(&neg_hessian).map(|l| cholesky_solve(&l, &grad))
        } else {
            None
        };
        let direction = match newton {
            Some(d) => {
                consecutive_fallbacks = 0;
                d
            }
            None => {
                consecutive_fallbacks += 1;
                fallback_steps += 1;
                if consecutive_fallbacks > MAX_FALLBACK_STEPS {
                    return Err(FitError::RankDeficient {
                        condition: condition.as_f64(),
                    });
                }
                let norm = neg_hessian.frobenius_norm().max(T::epsilon());
                grad.iter().map(|&g| g / norm).collect()
            }
        };

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=options.step_halvings {
            let candidate: Vec<T> = theta
                .iter()
                .zip(&direction)
                .map(|(&t, &d)| t + step * d)
                .collect();
            let value = problem.loglik(&candidate)?;
            if value > loglik {
                accepted = Some((candidate, value));
                break;
            }
            step = step * T::lit(0.5);
        }
        match accepted {
            Some((candidate, value)) => {
                theta = candidate;
                loglik = value;
            }
            None => {
                // Near the optimum the likelihood can be flat to rounding.
                // Take the full step when it stays within that noise and
                // reduces the gradient.
                let candidate: Vec<T> = theta.iter().zip(&direction).map(|(&t, &d)| t + d).collect();
                let value = problem.loglik(&candidate)?;
                let noise = T::lit(64.0) * T::epsilon() * (loglik.abs() + T::from_count(problem.points.len()));
                let reduced = sup_norm(&problem.gradient(&candidate)?) < grad_norm;
                if value >= loglik - noise && reduced {
                    theta = candidate;
                    loglik = loglik.max(value);
                } else {
                    return Err(non_convergence(iterations, grad_norm, &theta));
                }
            }
        }
    }
}

fn non_convergence<T: Real>(iterations: usize, grad_norm: T, theta: &[T]) -> FitError {
    FitError::NonConvergence {
        iterations,
        grad_norm: grad_norm.as_f64(),
        theta: theta.iter().map(|t| t.as_f64()).collect(),
    }
}

fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

impl<T: Real> DrmFit<T> {
    /// Builds the fitted quantities at a given `theta` without optimizing.
    /// `diagnostics.converged` reports whether the gradient there is within
    /// the default tolerance for `T`.
    pub fn at_theta(data: &TwoSampleData<T>, basis: &Basis<T>, theta: Vec<T>) -> Result<Self, FitError> {
        let problem = DualProblem::new(data, basis)?;
        let loglik = problem.loglik(&theta)?;
        let grad_norm = sup_norm(&problem.gradient(&theta)?);
        let diagnostics = FitDiagnostics {
            iterations: 0,
            grad_norm,
            loglik,
            converged: grad_norm <= T::lit(T::DEFAULT_GRAD_TOL),
            fallback_steps: 0,
        };
        Ok(Self::assemble(data, basis.clone(), problem, theta, diagnostics))
    }

    fn assemble(
        data: &TwoSampleData<T>,
        basis: Basis<T>,
        problem: DualProblem<T>,
        theta: Vec<T>,
        diagnostics: FitDiagnostics<T>,
    ) -> Self {
        let zero = data.zero_proportions();
        let rho = zero.rho;
        let n_pos = T::from_count(problem.points.len());
        let bound = exponent_bound::<T>();
        let omega: Vec<T> = (0..problem.points.len())
            .map(|i| dot(&theta, problem.design_row(i)).max(-bound).min(bound).exp())
            .collect();
        let raw: Vec<T> = omega
            .iter()
            .map(|&w| T::one() / (n_pos * ((T::one() - rho) + rho * w)))
            .collect();
        let total = stable_sum(raw.iter().copied());
        let weights = raw.iter().map(|&p| p / total).collect();
        Self {
            theta,
            zero,
            basis,
            points: problem.points,
            design: problem.design,
            omega,
            weights,
            diagnostics,
        }
    }

    /// `theta = (alpha, beta)`.
    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn rho(&self) -> T {
        self.zero.rho
    }

    pub fn zero_proportions(&self) -> &ZeroProportions<T> {
        &self.zero
    }

    pub fn basis(&self) -> &Basis<T> {
        &self.basis
    }

    pub fn diagnostics(&self) -> &FitDiagnostics<T> {
        &self.diagnostics
    }

    /// Pooled positives in `(value, group, index)` order; every per-point
    /// slice of the fit is aligned with this one.
    pub fn points(&self) -> &[PooledPoint<T>] {
        &self.points
    }

    /// Baseline weights `p`, summing to one.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `omega(x) = exp(theta^T Q(x))` at each pooled point.
    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    /// Tilted weights `p omega`, the mass of `G1` at each pooled point.
    pub fn tilted_weights(&self) -> Vec<T> {
        self.weights.iter().zip(&self.omega).map(|(&p, &w)| p * w).collect()
    }

    /// `Q(x)` at pooled point `i`.
    pub fn design_row(&self, i: usize) -> &[T] {
        let k = self.theta.len();
        &self.design[i * k..(i + 1) * k]
    }

    /// Weight of the positive observation `index` of `group`.
    pub fn weight_of(&self, group: usize, index: usize) -> Option<T> {
        self.points
            .iter()
            .position(|p| p.group == group && p.index == index)
            .map(|i| self.weights[i])
    }

    /// `omega` at an arbitrary positive `x`.
    pub fn omega_at(&self, x: T) -> T {
        let q = self.basis.design(x);
        let bound = exponent_bound::<T>();
        dot(&self.theta, &q).max(-bound).min(bound).exp()
    }

    pub fn fitted_cdfs(&self) -> FittedCdfPair<T> {
        let values: Vec<T> = self.points.iter().map(|p| p.value).collect();
        let (support, g0) = step_cdf(&values, &self.weights);
        let total = g0[g0.len() - 1];
        let g0 = g0.into_iter().map(|c| c / total).collect();
        let (_, g1) = step_cdf(&values, &self.tilted_weights());
        FittedCdfPair { support, g0, g1 }
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            basis: self.basis.kind().to_string(),
            theta_hat: self.theta.iter().map(|t| t.as_f64()).collect(),
            rho_hat: self.zero.rho.as_f64(),
            nu_hat: self.zero.nu.map(|v| v.as_f64()),
            loglik: self.diagnostics.loglik.as_f64(),
            grad_norm: self.diagnostics.grad_norm.as_f64(),
            iterations: self.diagnostics.iterations,
            converged: self.diagnostics.converged,
        }
    }
}

/// Distinct sorted values and cumulative mass at each, `<=` convention.
/// `values` must be sorted.
pub(crate) fn step_cdf<T: Real>(values: &[T], mass: &[T]) -> (Vec<T>, Vec<T>) {
    let mut support = Vec::new();
    let mut cum = Vec::new();
    let mut acc = CompensatedSum::new();
    for (i, (&x, &m)) in values.iter().zip(mass).enumerate() {
        acc.add(m);
        let last_of_block = i + 1 == values.len() || values[i + 1] != x;
        if last_of_block {
            support.push(x);
            cum.push(acc.value());
        }
    }
    (support, cum)
}

/// Cumulative mass `sum_j m_j I(x_j <= x_i)` at every (sorted) point,
/// assigning tied points the mass accumulated through the whole tie block.
pub(crate) fn cdf_at_points<T: Real>(values: &[T], mass: &[T]) -> Vec<T> {
    let n = values.len();
    let mut out = vec![T::zero(); n];
    let mut acc = CompensatedSum::new();
    let mut start = 0;
    for i in 0..n {
        acc.add(mass[i]);
        if i + 1 == n || values[i + 1] != values[i] {
            let c = acc.value();
            out[start..=i].iter_mut().for_each(|v| *v = c);
            start = i + 1;
        }
    }
    out
}

/// Right-continuous step CDFs of the fitted `G0` and `G1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedCdfPair<T> {
    pub support: Vec<T>,
    pub g0: Vec<T>,
    pub g1: Vec<T>,
}

impl<T: Real> FittedCdfPair<T> {
    fn lookup(&self, cdf: &[T], x: T) -> T {
        let k = self.support.partition_point(|&s| s <= x);
        if k == 0 {
            T::zero()
        } else {
            cdf[k - 1]
        }
    }

    pub fn g0_at(&self, x: T) -> T {
        self.lookup(&self.g0, x)
    }

    pub fn g1_at(&self, x: T) -> T {
        self.lookup(&self.g1, x)
    }
}

/// JSON view of a fit.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FitSummary {
    pub basis: String,
    pub theta_hat: Vec<f64>,
    pub rho_hat: f64,
    pub nu_hat: [f64; 2],
    pub loglik: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}
