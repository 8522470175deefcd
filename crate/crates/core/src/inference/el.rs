//! Empirical likelihood for a mean and the jackknife intervals built on it.

use serde::Serialize;

use super::InferenceError;

/// Solution of the one-dimensional empirical likelihood problem for a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElSolution {
    /// `-2 log ELR`; infinite when the candidate mean is outside the hull.
    pub neg2_log_elr: f64,
    pub lambda: f64,
    pub converged: bool,
    pub feasible: bool,
}

impl ElSolution {
    fn infeasible() -> Self {
        Self {
            neg2_log_elr: f64::INFINITY,
            lambda: f64::NAN,
            converged: true,
            feasible: false,
        }
    }
}

/// `-2 log` empirical likelihood ratio of the centered values `z` at mean 0.
pub fn el_centered(z: &[f64]) -> ElSolution {
    let n = z.len() as f64;
    let (zmin, zmax) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(zmin < 0.0 && zmax > 0.0) {
        return ElSolution::infeasible();
    }
    // The root keeps every 1 + lambda z_j >= 1/n.
    let mut lo = (1.0 / n - 1.0) / zmax;
    let mut hi = (1.0 / n - 1.0) / zmin;
    let score = |l: f64| -> (f64, f64) {
        z.iter().fold((0.0, 0.0), |(g, d), &v| {
            let den = 1.0 + l * v;
            (g + v / den, d - v * v / (den * den))
        })
    };
    let mut lambda = 0.0;
    let mut converged = false;
    for _ in 0..200 {
        let (g, d) = score(lambda);
        if g == 0.0 {
            converged = true;
            break;
        }
        // The score is decreasing in lambda.
        if g > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda - g / d;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - lambda).abs();
        lambda = next;
        if step <= 1e-15 * lambda.abs().max(1e-300) || hi - lo <= 1e-15 * lambda.abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    let value = 2.0 * z.iter().map(|&v| (lambda * v).ln_1p()).sum::<f64>();
    ElSolution {
        neg2_log_elr: value.max(0.0),
        lambda,
        converged,
        feasible: true,
    }
}

/// `-2 log ELR` of `values` at candidate mean `mu`.
pub fn el_mean_logratio(values: &[f64], mu: f64) -> Result<ElSolution, InferenceError> {
    if values.len() < 2 {
        return Err(InferenceError::InvalidArgument(format!(
            "empirical likelihood needs at least 2 values, got {}",
            values.len()
        )));
    }
    let z: Vec<f64> = values.iter().map(|&v| v - mu).collect();
    Ok(el_centered(&z))
}

/// `-2 log ELR` at `mu`, with the adjustment point `-a_n mean(z)`,
/// `a_n = log(n) / 2`, appended when `adjusted`.
pub fn jel_statistic(pseudo: &[f64], mu: f64, adjusted: bool) -> f64 {
    let mut z: Vec<f64> = pseudo.iter().map(|&v| v - mu).collect();
    if adjusted {
        let n = z.len() as f64;
        let zbar = z.iter().sum::<f64>() / n;
        if zbar == 0.0 {
            return 0.0;
        }
        z.push(-0.5 * n.ln() * zbar);
    }
    el_centered(&z).neg2_log_elr
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn span(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Solves `stat(x) = crit` on the side `direction` (+1 or -1) of `center`,
/// where `stat(center) = 0` and `stat` increases away from `center`.
/// `reach` is the initial search radius; it doubles up to 60 times.
pub(crate) fn find_bound(
    stat: impl Fn(f64) -> f64,
    center: f64,
    direction: f64,
    reach: f64,
    crit: f64,
) -> Result<f64, InferenceError> {
    let side = if direction > 0.0 { "upper" } else { "lower" };
    let mut inner = center;
    let mut radius = reach.max(f64::MIN_POSITIVE);
    let mut outer = None;
    for _ in 0..60 {
        let x = center + direction * radius;
        if stat(x) > crit {
            outer = Some(x);
            break;
        }
        inner = x;
        radius *= 2.0;
    }
    let mut outer = outer.ok_or(InferenceError::OpenEndedBound { side })?;
    for _ in 0..200 {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        if stat(mid) > crit {
            outer = mid;
        } else {
            inner = mid;
        }
    }
    Ok(0.5 * (inner + outer))
}

/// Confidence interval for the mean of `pseudo` from the (adjusted) EL
/// statistic.
pub fn el_mean_interval(pseudo: &[f64], crit: f64, adjusted: bool) -> Result<(f64, f64), InferenceError> {
    let center = mean(pseudo);
    let (lo, hi) = span(pseudo);
    let stat = |mu: f64| jel_statistic(pseudo, mu, adjusted);
    // For the plain statistic the hull edge is already infinite.
    let reach_up = (hi - center).max(f64::EPSILON * center.abs().max(1.0));
    let reach_dn = (center - lo).max(f64::EPSILON * center.abs().max(1.0));
    let upper = find_bound(stat, center, 1.0, reach_up, crit)?;
    let lower = find_bound(stat, center, -1.0, reach_dn, crit)?;
    Ok((lower, upper))
}

/// Minimizes a unimodal function on `[a, b]` by golden-section search.
fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= 1e-13 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    f(x).min(fc).min(fd)
}

/// Profile statistic for `mean0 - mean1 = delta` from two independent
/// samples of pseudo-values, minimizing over the nuisance mean of group 1.
pub fn jel_difference_statistic(pseudo: [&[f64]; 2], delta: f64, adjusted: bool) -> f64 {
    let s = |mu1: f64| jel_statistic(pseudo[0], delta + mu1, adjusted) + jel_statistic(pseudo[1], mu1, adjusted);
    // Each term is minimized at its own pseudo-value mean; the profile
    // minimizer lies between the two.
    let a = mean(pseudo[1]);
    let b = mean(pseudo[0]) - delta;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    if !adjusted {
        let (l0, h0) = span(pseudo[0]);
        let (l1, h1) = span(pseudo[1]);
        lo = lo.max(l1).max(l0 - delta);
        hi = hi.min(h1).min(h0 - delta);
        if !(lo < hi) {
            return if lo == hi { s(lo) } else { f64::INFINITY };
        }
    }
    if lo == hi {
        return s(lo);
    }
    golden_min(s, lo, hi)
}

/// Confidence interval for `mean0 - mean1`.
pub fn el_difference_interval(pseudo: [&[f64]; 2], crit: f64, adjusted: bool) -> Result<(f64, f64), InferenceError> {
    let center = mean(pseudo[0]) - mean(pseudo[1]);
    let (l0, h0) = span(pseudo[0]);
    let (l1, h1) = span(pseudo[1]);
    let stat = |d: f64| jel_difference_statistic(pseudo, d, adjusted);
    let floor = f64::EPSILON * center.abs().max(1.0);
    let upper = find_bound(stat, center, 1.0, (h0 - l1 - center).max(floor), crit)?;
    let lower = find_bound(stat, center, -1.0, (center - (l0 - h1)).max(floor), crit)?;
    Ok((lower, upper))
}
