//! Plug-in asymptotic covariance of the Gini estimators.
//!
//! All matrices are on the `sqrt(n)` scale, `n = n0 + n1`: the variance of an
//! estimate is `sigma / n`.
//!
//! For the DRM estimator,
//!
//! ```text
//! Sigma = J [ E0{u u^T / h} / Delta + B / rho^2 ] J^T
//!         + diag{ nu0 (1 - G0)^2 / (Delta (1 - rho)), nu1 (1 - G1)^2 / (Delta rho) }
//! B     = E0{h1 ut Q^T} A^{-1} E0{h1 Q ut^T},   A = Delta (1 - rho) E0{h1 Q Q^T}
//! ```
//!
//! with `E0` the expectation under the fitted `G0`. The first term carries
//! `1 / Delta` alone; `B` already scales as `1 / Delta` through `A`.

use serde::Serialize;
use thiserror::Error;

use crate::drm::{cdf_at_points, DrmFit};
use crate::gini::{sorted_positives, GiniError, GiniEstimate};
use crate::linalg::{spd_condition_number, spd_inverse, symmetric_eigenvalues, Matrix};
use crate::sample::TwoSampleData;
use crate::scalar::{CompensatedSum, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarianceError {
    #[error("A_theta is singular or ill-conditioned (condition number {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("logit gradient is singular at Gini value {g}")]
    LogitSingular { g: f64 },
    #[error("gradient of the contrast is not finite")]
    NonFiniteGradient,
    #[error(transparent)]
    Gini(#[from] GiniError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    /// MELE under the density ratio model.
    Drm,
    /// Fully nonparametric estimator.
    Nonparametric,
}

/// Plug-in matrices behind the DRM covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DrmIngredients<T> {
    pub delta: T,
    pub rho: T,
    pub a_theta: Matrix<T>,
    pub b: Matrix<T>,
    pub j: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate<T> {
    pub kind: CovarianceKind,
    /// 2x2 covariance on the `sqrt(n)` scale.
    pub sigma: Matrix<T>,
    /// Total sample size `n`.
    pub n: usize,
    pub ingredients: Option<DrmIngredients<T>>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CovarianceSummary {
    pub kind: CovarianceKind,
    pub n: usize,
    /// Row-major `sigma`.
    pub sigma: [[f64; 2]; 2],
}

impl<T: Real> CovarianceEstimate<T> {
    /// Variance of the estimate of Gini `i`, `sigma_ii / n`.
    pub fn variance(&self, i: usize) -> T {
        self.sigma[(i, i)] / T::from_count(self.n)
    }

    pub fn summary(&self) -> CovarianceSummary {
        let s = |i, j| self.sigma[(i, j)].as_f64();
        CovarianceSummary {
            kind: self.kind,
            n: self.n,
            sigma: [[s(0, 0), s(0, 1)], [s(1, 0), s(1, 1)]],
        }
    }
}

/// Plug-in evaluators of the functions entering the covariance.
#[derive(Debug, Clone)]
pub struct AuxFunctions<T> {
    theta: Vec<T>,
    basis: crate::sample::Basis<T>,
    rho: T,
    nu: [T; 2],
    m: [T; 2],
    psi: [T; 2],
    values: Vec<T>,
    /// `G_i(x)` at each sorted pooled point.
    cdf: [Vec<T>; 2],
    /// `sum mass x I(X <= x)` at each sorted pooled point.
    partial_mean: [Vec<T>; 2],
}

impl<T: Real> AuxFunctions<T> {
    /// Builds the evaluators from a fit and its MELE.
    pub fn new(fit: &DrmFit<T>, gini: &GiniEstimate<T>) -> Self {
        let values: Vec<T> = fit.points().iter().map(|p| p.value).collect();
        let masses = [fit.weights().to_vec(), fit.tilted_weights()];
        let cdf = [cdf_at_points(&values, &masses[0]), cdf_at_points(&values, &masses[1])];
        let weighted = |mass: &[T]| -> Vec<T> {
            let mx: Vec<T> = mass.iter().zip(&values).map(|(&w, &x)| w * x).collect();
            cdf_at_points(&values, &mx)
        };
        let partial_mean = [weighted(&masses[0]), weighted(&masses[1])];
        Self {
            theta: fit.theta().to_vec(),
            basis: fit.basis().clone(),
            rho: fit.rho(),
            nu: gini.nu,
            m: gini.m,
            psi: gini.psi.expect("MELE carries psi"),
            values,
            cdf,
            partial_mean,
        }
    }

    fn locate(&self, x: T) -> Option<usize> {
        let k = self.values.partition_point(|&v| v <= x);
        k.checked_sub(1)
    }

    pub fn omega(&self, x: T) -> T {
        let q = self.basis.design(x);
        let s = self.theta.iter().zip(&q).fold(T::zero(), |a, (&t, &v)| a + t * v);
        s.min(T::lit(700.0).min(T::max_value().ln() * T::lit(0.9))).exp()
    }

    /// `h(x) = 1 + rho (omega - 1)`.
    pub fn h(&self, x: T) -> T {
        (T::one() - self.rho) + self.rho * self.omega(x)
    }

    pub fn h1(&self, x: T) -> T {
        self.rho * self.omega(x) / self.h(x)
    }

    pub fn h0(&self, x: T) -> T {
        (T::one() - self.rho) / self.h(x)
    }

    /// Fitted `G_i(x)` with the `<=` convention.
    pub fn cdf(&self, i: usize, x: T) -> T {
        self.locate(x).map_or(T::zero(), |k| self.cdf[i][k])
    }

    /// `int_{y > a} y dG_i(y)`.
    pub fn tail(&self, i: usize, a: T) -> T {
        self.m[i] - self.locate(a).map_or(T::zero(), |k| self.partial_mean[i][k])
    }

    /// `H_i(a) = a G_i(a) + tail_i(a)`.
    pub fn big_h(&self, i: usize, a: T) -> T {
        a * self.cdf(i, a) + self.tail(i, a)
    }

    /// `u_i(x) = (2 nu_i - 1) x + (1 - nu_i) {2 H_i(x) - psi_i}`.
    pub fn u(&self, i: usize, x: T) -> T {
        let two = T::lit(2.0);
        (two * self.nu[i] - T::one()) * x + (T::one() - self.nu[i]) * (two * self.big_h(i, x) - self.psi[i])
    }

    /// `(x, u0, omega x, omega u1)`.
    pub fn u_vec(&self, x: T) -> [T; 4] {
        let w = self.omega(x);
        let u1 = self.u(1, x);
        [x, self.u(0, x), w * x, w * u1]
    }

    /// `(-rho x, -rho u0, (1 - rho) x, (1 - rho) u1)`.
    pub fn u_tilde(&self, x: T) -> [T; 4] {
        let r = self.rho;
        let s = T::one() - r;
        [-r * x, -r * self.u(0, x), s * x, s * self.u(1, x)]
    }
}

fn jacobian<T: Real>(g: [T; 2], m: [T; 2]) -> Matrix<T> {
    let z = T::zero();
    Matrix::from_rows(&[
        &[-g[0] / m[0], T::one() / m[0], z, z],
        &[z, z, -g[1] / m[1], T::one() / m[1]],
    ])
}

fn zero_term<T: Real>(nu: [T; 2], g: [T; 2], delta: T, rho: T) -> Matrix<T> {
    let one = T::one();
    let mut d = Matrix::zeros(2, 2);
    d[(0, 0)] = nu[0] * (one - g[0]) * (one - g[0]) / (delta * (one - rho));
    d[(1, 1)] = nu[1] * (one - g[1]) * (one - g[1]) / (delta * rho);
    d
}

/// `J M J^T`.
fn sandwich<T: Real>(j: &Matrix<T>, m: &Matrix<T>) -> Matrix<T> {
    j.matmul(m).matmul(&j.transpose())
}

/// Plug-in `E0` moments shared by the DRM covariance routines.
struct DrmMoments<T> {
    delta: T,
    rho: T,
    /// `E0{u u^T / h}`.
    uu_over_h: Matrix<T>,
    /// `E0{ut ut^T}` restricted to each group block, with `omega` on block 1.
    np_blocks: Matrix<T>,
    /// `E0{h1 ut Q^T}`.
    h1_utq: Matrix<T>,
    a_theta: Matrix<T>,
    a_inv: Matrix<T>,
}

fn drm_moments<T: Real>(fit: &DrmFit<T>, gini: &GiniEstimate<T>) -> Result<DrmMoments<T>, VarianceError> {
    let aux = AuxFunctions::new(fit, gini);
    let k = fit.theta().len();
    let zp = fit.zero_proportions();
    let (delta, rho) = (zp.delta, zp.rho);
    let mut uu_over_h = Matrix::zeros(4, 4);
    let mut np_blocks = Matrix::zeros(4, 4);
    let mut h1_utq = Matrix::zeros(4, k);
    let mut h1_qq = Matrix::zeros(k, k);
    for (i, (pt, &p)) in fit.points().iter().zip(fit.weights()).enumerate() {
        let x = pt.value;
        let q = fit.design_row(i);
        let w = fit.omega()[i];
        let h = (T::one() - rho) + rho * w;
        let h1 = rho * w / h;
        let u = aux.u_vec(x);
        let ut = aux.u_tilde(x);
        uu_over_h.add_outer(p / h, &u, &u);
        let ut0 = [ut[0], ut[1], T::zero(), T::zero()];
        np_blocks.add_outer(p, &ut0, &ut0);
        let ut1 = [T::zero(), T::zero(), ut[2], ut[3]];
        np_blocks.add_outer(p * w, &ut1, &ut1);
        h1_utq.add_outer(p * h1, &ut, q);
        h1_qq.add_outer(p * h1, q, q);
    }
    let a_theta = h1_qq.scale(delta * (T::one() - rho)).symmetrize();
    let condition = spd_condition_number(&a_theta);
    if !(condition <= T::lit(crate::drm::MAX_CONDITION)) {
        return Err(VarianceError::RankDeficient {
            condition: condition.as_f64(),
        });
    }
    let a_inv = spd_inverse(&a_theta).ok_or(VarianceError::RankDeficient {
        condition: condition.as_f64(),
    })?;
    Ok(DrmMoments {
        delta,
        rho,
        uu_over_h: uu_over_h.symmetrize(),
        np_blocks: np_blocks.symmetrize(),
        h1_utq,
        a_theta,
        a_inv,
    })
}

fn total_n<T: Real>(fit: &DrmFit<T>) -> usize {
    // Delta = N_pos / n, so the quotient is an integer up to rounding.
    let n_pos = T::from_count(fit.points().len());
    (n_pos / fit.zero_proportions().delta).round().to_usize().unwrap_or(0)
}

/// Plug-in covariance of the MELE pair.
pub fn estimate_sigma_drm<T: Real>(
    fit: &DrmFit<T>,
    gini: &GiniEstimate<T>,
) -> Result<CovarianceEstimate<T>, VarianceError> {
    let mm = drm_moments(fit, gini)?;
    let b = mm.h1_utq.matmul(&mm.a_inv).matmul(&mm.h1_utq.transpose()).symmetrize();
    let inner = mm
        .uu_over_h
        .scale(T::one() / mm.delta)
        .add(&b.scale(T::one() / (mm.rho * mm.rho)));
    let g = gini.g();
    let j = jacobian(g, gini.m);
    let sigma = sandwich(&j, &inner)
        .add(&zero_term(gini.nu, g, mm.delta, mm.rho))
        .symmetrize();
    Ok(CovarianceEstimate {
        kind: CovarianceKind::Drm,
        sigma,
        n: total_n(fit),
        ingredients: Some(DrmIngredients {
            delta: mm.delta,
            rho: mm.rho,
            a_theta: mm.a_theta,
            b,
            j,
        }),
    })
}

/// Nonparametric covariance written with the DRM plug-in moments,
/// `J Sigma_np1 J^T + diag{...}`. Together with [`estimate_sigma_drm`] it
/// gives the efficiency gap at the fitted model.
pub fn sigma_nonparam_under_drm<T: Real>(
    fit: &DrmFit<T>,
    gini: &GiniEstimate<T>,
) -> Result<CovarianceEstimate<T>, VarianceError> {
    let mm = drm_moments(fit, gini)?;
    let (delta, rho) = (mm.delta, mm.rho);
    let one = T::one();
    let mut np1 = mm.np_blocks.clone();
    for r in 0..4 {
        for c in 0..4 {
            let scale = if r < 2 && c < 2 {
                one / (delta * rho * rho * (one - rho))
            } else if r >= 2 && c >= 2 {
                one / (delta * rho * (one - rho) * (one - rho))
            } else {
                T::zero()
            };
            np1[(r, c)] = np1[(r, c)] * scale;
        }
    }
    let g = gini.g();
    let j = jacobian(g, gini.m);
    let sigma = sandwich(&j, &np1).add(&zero_term(gini.nu, g, delta, rho)).symmetrize();
    Ok(CovarianceEstimate {
        kind: CovarianceKind::Nonparametric,
        sigma,
        n: total_n(fit),
        ingredients: None,
    })
}

/// Efficiency gap in the closed form `J E0{h1 D D^T} J^T / (Delta rho^2 (1 - rho))`.
pub fn efficiency_gap_closed_form<T: Real>(
    fit: &DrmFit<T>,
    gini: &GiniEstimate<T>,
) -> Result<Matrix<T>, VarianceError> {
    let mm = drm_moments(fit, gini)?;
    let (delta, rho) = (mm.delta, mm.rho);
    let one = T::one();
    let c = mm.h1_utq.matmul(&mm.a_inv).scale(delta * (one - rho));
    let aux = AuxFunctions::new(fit, gini);
    let mut m = Matrix::zeros(4, 4);
    for (i, (pt, &p)) in fit.points().iter().zip(fit.weights()).enumerate() {
        let x = pt.value;
        let ut = aux.u_tilde(x);
        let proj = c.mul_vec(fit.design_row(i));
        let d: Vec<T> = ut.iter().zip(&proj).map(|(&a, &b)| a - b).collect();
        let w = fit.omega()[i];
        let h1 = rho * w / ((one - rho) + rho * w);
        m.add_outer(p * h1, &d, &d);
    }
    let j = jacobian(gini.g(), gini.m);
    Ok(sandwich(&j, &m)
        .scale(one / (delta * rho * rho * (one - rho)))
        .symmetrize())
}

/// Nonparametric covariance from the per-group empirical distributions.
pub fn estimate_sigma_nonparam<T: Real>(data: &TwoSampleData<T>) -> Result<CovarianceEstimate<T>, VarianceError> {
    let zp = data.zero_proportions();
    let two = T::lit(2.0);
    let mut sigma = Matrix::zeros(2, 2);
    for i in 0..2 {
        let x = data.group(i);
        let pos = sorted_positives(x);
        let n_pos = pos.len();
        let mass = vec![T::one() / T::from_count(n_pos); n_pos];
        let (m, psi) = crate::gini::mean_and_psi(&pos, &mass);
        let nu = zp.nu[i];
        let g = crate::gini::gini_from_parts(nu, psi, m);
        let cdf = cdf_at_points(&pos, &mass);
        let mx: Vec<T> = pos.iter().zip(&mass).map(|(&v, &w)| v * w).collect();
        let partial = cdf_at_points(&pos, &mx);
        let mean_all = x.iter().copied().sum::<T>() / T::from_count(x.len());
        if mean_all <= T::zero() {
            return Err(GiniError::ZeroMean { group: i }.into());
        }
        let u_at_zero = (T::one() - nu) * (two * m - psi);
        let mut vals = Vec::with_capacity(x.len());
        vals.extend(std::iter::repeat_n(u_at_zero, x.len() - n_pos));
        for (k, &v) in pos.iter().enumerate() {
            let big_h = v * cdf[k] + (m - partial[k]);
            let u = (two * nu - T::one()) * v + (T::one() - nu) * (two * big_h - psi);
            vals.push(u - g * v);
        }
        let n_i = T::from_count(vals.len());
        let mut mean = CompensatedSum::new();
        vals.iter().for_each(|&v| mean.add(v));
        let mean = mean.value() / n_i;
        let mut var = CompensatedSum::new();
        vals.iter().for_each(|&v| var.add((v - mean) * (v - mean)));
        let var = var.value() / n_i;
        sigma[(i, i)] = var / (zp.w[i] * mean_all * mean_all);
    }
    Ok(CovarianceEstimate {
        kind: CovarianceKind::Nonparametric,
        sigma,
        n: data.total(),
        ingredients: None,
    })
}

/// A smooth function of the two Gini indices.
pub trait SmoothContrast<T> {
    fn value(&self, g: [T; 2]) -> Result<T, VarianceError>;
    fn gradient(&self, g: [T; 2]) -> Result<[T; 2], VarianceError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contrast {
    /// Gini of group 0 or 1.
    Component(usize),
    /// `logit(G_i)`.
    LogitComponent(usize),
    /// `G0 - G1`.
    Difference,
    /// `logit(G0) - logit(G1)`.
    LogitDifference,
}

fn logit_checked<T: Real>(g: T) -> Result<(T, T), VarianceError> {
    if !(g > T::zero() && g < T::one()) {
        return Err(VarianceError::LogitSingular { g: g.as_f64() });
    }
    let value = (g / (T::one() - g)).ln();
    let slope = T::one() / (g * (T::one() - g));
    Ok((value, slope))
}

impl<T: Real> SmoothContrast<T> for Contrast {
    fn value(&self, g: [T; 2]) -> Result<T, VarianceError> {
        Ok(match *self {
            Contrast::Component(i) => g[i],
            Contrast::LogitComponent(i) => logit_checked(g[i])?.0,
            Contrast::Difference => g[0] - g[1],
            Contrast::LogitDifference => logit_checked(g[0])?.0 - logit_checked(g[1])?.0,
        })
    }

    fn gradient(&self, g: [T; 2]) -> Result<[T; 2], VarianceError> {
        let (z, o) = (T::zero(), T::one());
        Ok(match *self {
            Contrast::Component(0) => [o, z],
            Contrast::Component(_) => [z, o],
            Contrast::LogitComponent(i) => {
                let s = logit_checked(g[i])?.1;
                if i == 0 {
                    [s, z]
                } else {
                    [z, s]
                }
            }
            Contrast::Difference => [o, -o],
            Contrast::LogitDifference => [logit_checked(g[0])?.1, -logit_checked(g[1])?.1],
        })
    }
}

/// `grad phi^T Sigma grad phi` at `g`.
pub fn delta_variance<T: Real, C: SmoothContrast<T> + ?Sized>(
    phi: &C,
    g: [T; 2],
    sigma: &Matrix<T>,
) -> Result<T, VarianceError> {
    let grad = phi.gradient(g)?;
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(VarianceError::NonFiniteGradient);
    }
    Ok(sigma.quadratic_form(&grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyGap<T> {
    pub min_eigenvalue: T,
    pub trace: T,
    pub psd: bool,
}

/// Smallest eigenvalue of `sigma_non - sigma_drm`; `psd` when it is at
/// least `-tolerance`.
pub fn efficiency_gap<T: Real>(sigma_non: &Matrix<T>, sigma_drm: &Matrix<T>, tolerance: T) -> EfficiencyGap<T> {
    let diff = sigma_non.sub(sigma_drm);
    let min_eigenvalue = symmetric_eigenvalues(&diff)[0];
    EfficiencyGap {
        min_eigenvalue,
        trace: diff.trace(),
        psd: min_eigenvalue >= -tolerance,
    }
}
