//! Bootstrap-t intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_level, inv_logit, EstimatorCore, Estimates, InferenceError, IntervalEstimate, IntervalMethod, Target};
use crate::sample::TwoSampleData;

/// Draws one bootstrap sample.
pub trait Resampler: Sync {
    /// `None` when the draw cannot form a valid sample.
    fn resample(&self, data: &TwoSampleData<f64>, rng: &mut ChaCha8Rng) -> Option<TwoSampleData<f64>>;
}

/// Resamples every group with replacement, zeros included.
#[derive(Debug, Clone, Copy, Default)]
pub struct WithReplacement;

impl Resampler for WithReplacement {
    fn resample(&self, data: &TwoSampleData<f64>, rng: &mut ChaCha8Rng) -> Option<TwoSampleData<f64>> {
        let mut draw = |x: &[f64]| -> Vec<f64> { (0..x.len()).map(|_| x[rng.random_range(0..x.len())]).collect() };
        let x0 = draw(data.group(0));
        let x1 = draw(data.group(1));
        TwoSampleData::new(x0, x1).ok()
    }
}

/// Returns the original sample unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityResampler;

impl Resampler for IdentityResampler {
    fn resample(&self, data: &TwoSampleData<f64>, _rng: &mut ChaCha8Rng) -> Option<TwoSampleData<f64>> {
        Some(data.clone())
    }
}

/// Independent stream for replicate `index` under a master seed.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Linear-interpolation sample quantile of sorted data (type 7).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap-t interval.
///
/// `BT-*` methods studentize the contrast itself; `BL-DRM` works on the logit
/// scale and maps the bounds back.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_t_ci(
    data: &TwoSampleData<f64>,
    target: Target,
    method: IntervalMethod,
    core: &EstimatorCore,
    replicates: usize,
    level: f64,
    seed: u64,
    resampler: &dyn Resampler,
) -> Result<IntervalEstimate, InferenceError> {
    check_level(level)?;
    if replicates < 50 {
        return Err(InferenceError::InvalidArgument(format!(
            "bootstrap needs at least 50 replicates, got {replicates}"
        )));
    }
    let logit = match method {
        IntervalMethod::BtDrm | IntervalMethod::BtEmp => false,
        IntervalMethod::BlDrm => true,
        other => {
            return Err(InferenceError::InvalidArgument(format!("{other} is not a bootstrap interval")));
        }
    };
    let phi = if logit { target.logit_contrast()? } else { target.contrast() };
    let base = Estimates::compute(data, core)?;
    let (phi_hat, sd_hat) = base.contrast(&phi)?;
    let root_n = (base.n as f64).sqrt();

    let stats: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b as u64);
            let sample = resampler.resample(data, &mut rng)?;
            let est = Estimates::compute(&sample, core).ok()?;
            let (phi_b, sd_b) = est.contrast(&phi).ok()?;
            studentize(phi_b - phi_hat, sd_b, root_n)
        })
        .collect();
    let mut t: Vec<f64> = stats.iter().flatten().copied().collect();
    let failed = replicates - t.len();
    if failed * 10 > replicates {
        return Err(InferenceError::TooManyFailures {
            failed,
            total: replicates,
        });
    }
    t.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let tau = 1.0 - level;
    let q_lo = quantile_type7(&t, tau / 2.0);
    let q_hi = quantile_type7(&t, 1.0 - tau / 2.0);
    let mut lower = phi_hat - q_hi * sd_hat / root_n;
    let mut upper = phi_hat - q_lo * sd_hat / root_n;
    if logit {
        lower = inv_logit(lower);
        upper = inv_logit(upper);
    }
    Ok(IntervalEstimate {
        target,
        method,
        level,
        lower,
        upper,
    })
}

fn studentize(shift: f64, sd: f64, root_n: f64) -> Option<f64> {
    let t = if sd > 0.0 {
        root_n * shift / sd
    } else if shift == 0.0 {
        0.0
    } else {
        return None;
    };
    t.is_finite().then_some(t)
}
