//! Small statistical toolbox shared by the estimators, the limit-process
//! sampler, and the test suites: normal quantiles, Kolmogorov–Smirnov
//! statistics, binomial-proportion intervals, and least-squares lines.

use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal quantile. Inputs are clamped away from {0, 1} by one
/// 53-bit ulp so that uniform draws from `[0, 1)` map to finite values.
pub fn standard_normal_quantile(u: f64) -> f64 {
    const EPS: f64 = 1.0 / (1u64 << 53) as f64;
    let u = u.clamp(EPS, 1.0 - EPS);
    Normal::standard().inverse_cdf(u)
}

/// Two-sided z value for a central confidence level, e.g. 0.99 -> 2.5758.
pub fn z_for_confidence(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// One-sample KS statistic against the uniform CDF on [0, 1).
/// `draws` need not be sorted.
pub fn ks_uniform(draws: &[f64]) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &u) in sorted.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - u).max(u - i as f64 / n);
    }
    d
}

/// Two-sample KS statistic between integer samples (ties allowed).
pub fn ks_two_sample(a: &[i64], b: &[i64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_unstable();
    xb.sort_unstable();
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut d = 0.0f64;
    while ia < xa.len() && ib < xb.len() {
        let x = xa[ia].min(xb[ib]);
        while ia < xa.len() && xa[ia] == x {
            ia += 1;
        }
        while ib < xb.len() && xb[ib] == x {
            ib += 1;
        }
        d = d.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at significance `alpha`:
/// c(alpha) * sqrt((n + m) / (n * m)) with c(alpha) = sqrt(-ln(alpha/2)/2).
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Half-width of a binomial-proportion confidence interval for `successes`
/// out of `trials` at the given confidence level. Uses the normal
/// approximation, falling back to the Wilson interval when either tail count
/// is below 30.
pub fn proportion_ci_halfwidth(successes: u64, trials: u64, level: f64) -> f64 {
    assert!(trials > 0);
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let z = z_for_confidence(level);
    let failures = trials - successes;
    if successes >= 30 && failures >= 30 {
        z * (p_hat * (1.0 - p_hat) / n).sqrt()
    } else {
        // Wilson: center (p + z^2/2n)/(1 + z^2/n), half-width from the same
        // denominator. Report the larger distance from p_hat so the interval
        // [p_hat - hw, p_hat + hw] covers the Wilson interval.
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (p_hat + z2 / (2.0 * n)) / denom;
        let hw = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        let lo = center - hw;
        let hi = center + hw;
        (p_hat - lo).max(hi - p_hat)
    }
}

/// Binomial standard deviation of an empirical proportion when the true
/// success probability is known.
pub fn proportion_sigma(p_true: f64, trials: u64) -> f64 {
    (p_true * (1.0 - p_true) / trials as f64).sqrt()
}

/// Ordinary least squares line through (x, y) points.
/// Returns (slope, intercept, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, intercept, r2)
}

/// Sample mean and (unbiased) variance.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Empirical quantile of a pre-sorted slice (lower interpolation).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[idx - 1]
}
