//! Gini indices of two semicontinuous populations under a density ratio model.
//!
//! Each group is a mixture of a point mass at zero and a positive continuous
//! part; the positive parts are linked by `dG1(x) = exp{theta' Q(x)} dG0(x)`.
//! [`drm::fit_theta`] fits the model, [`gini::mele_gini`] turns the fit into
//! Gini estimates, [`variance`] supplies their asymptotic covariance and
//! [`inference`] builds intervals and tests on top.
//!
//! ```
//! use gini_drm::{fit_theta, mele_gini, Basis, FitOptions, TwoSampleData};
//!
//! let data = TwoSampleData::new(vec![0.0, 1.0, 2.5, 3.0, 4.2], vec![0.0, 0.0, 1.5, 2.0, 6.0]).unwrap();
//! let fit = fit_theta(&data, &Basis::log(), &FitOptions::default()).unwrap();
//! let g = mele_gini(&fit);
//! assert!(g.g0 > 0.0 && g.g1 < 1.0);
//! ```

pub mod drm;
pub mod gini;
pub mod inference;
pub mod linalg;
pub mod montecarlo;
pub mod sample;
pub mod scalar;
pub mod variance;

pub use drm::{fit_theta, DrmFit, FitError, FitOptions};
pub use gini::{emp_gini, jel_gini, mele_gini, true_gini_mixture, ContinuousLaw, GiniEstimate, GiniMethod};
pub use inference::{confidence_interval, test_equality, InferenceOptions, IntervalMethod, Target, TestMethod};
pub use sample::{Basis, BasisKind, TwoSampleData};
pub use variance::{estimate_sigma_drm, estimate_sigma_nonparam, CovarianceEstimate};

/// Double-precision sample.
pub type Sample = TwoSampleData<f64>;
/// Double-precision fit.
pub type Fit = DrmFit<f64>;
/// Double-precision Gini estimate.
pub type Estimate = GiniEstimate<f64>;
