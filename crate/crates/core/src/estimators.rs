//! Monte Carlo estimation of escape-time distributions, with confidence
//! intervals, exponential-tail slope fits, quadratic-scaling (theta)
//! analysis, and the classical SRW bound checks.
//!
//! Every replicate draws from its own counter-based stream, results are
//! collected in replicate order, and all aggregation folds that order
//! sequentially, so every estimate is bit-identical across thread counts.

use crate::exact::{CurveSource, SurvivalCurve};
use crate::exec::Threads;
use crate::rng::{StreamKey, StreamPurpose};
use crate::stats;
use crate::walks::{
    simulate_abs_erw, simulate_signed_erw_memory, simulate_urn, step_abs_erw, step_reflected_srw,
    validate_memory, Representation,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest replicate count for which the raw escape-time sample is retained
/// in memory (needed to build survival curves); summaries are always kept.
pub const RAW_SAMPLE_CAP: u64 = 1 << 21;

/// A censoring fraction above this is treated as an error: the horizon cap is
/// too small for the requested (p, N).
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;

pub fn default_horizon_cap(n_barrier: u64) -> u64 {
    10_000u64.saturating_mul(n_barrier * n_barrier)
}

/// Replicate-level escape times plus aggregate statistics for one (p, N).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeSummary {
    pub p: f64,
    #[serde(rename = "N")]
    pub n_barrier: u64,
    pub replicates: u64,
    /// Replicates that hit the horizon cap. Reported, never silently dropped.
    pub censored: u64,
    pub horizon_cap: u64,
    pub mean: f64,
    pub variance: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    /// 99% half-width for the mean.
    pub mean_ci_halfwidth: f64,
    /// Raw escape times of the uncensored replicates, in replicate order;
    /// retained only below [`RAW_SAMPLE_CAP`].
    #[serde(skip)]
    pub escape_times: Option<Vec<u64>>,
}

/// Escape time of one absolute-value ERW replicate, or None when the cap was
/// reached first.
fn one_escape(
    p: f64,
    n_barrier: u64,
    cap: u64,
    stream: &mut crate::rng::UniformStream,
) -> Option<u64> {
    let target = n_barrier as i64;
    let mut state = 0i64;
    for k in 1..=cap {
        let u = stream.next_uniform();
        state = step_abs_erw(state, k - 1, u, p);
        if state == target {
            return Some(k);
        }
    }
    None
}

/// Simulates `replicates` escape times of the absolute-value ERW with barrier
/// `n_barrier`, replicate r drawing from stream key
/// (master_seed, replicate_offset + r, WalkDriver).
pub fn mc_escape_times(
    p: f64,
    n_barrier: u64,
    replicates: u64,
    master_seed: u64,
    replicate_offset: u64,
    horizon_cap: u64,
    threads: Threads,
) -> Result<EscapeSummary> {
    validate_memory(p)?;
    if n_barrier < 2 {
        return Err(Error::InvalidParam("escape estimation needs N >= 2".into()));
    }
    if replicates < 2 {
        return Err(Error::InvalidParam("need at least 2 replicates".into()));
    }
    let raw = crate::exec::map_replicates(replicates, threads, |r| {
        let mut stream =
            StreamKey::new(master_seed, replicate_offset + r, StreamPurpose::WalkDriver).derive();
        one_escape(p, n_barrier, horizon_cap, &mut stream)
    });

    let censored = raw.iter().filter(|t| t.is_none()).count() as u64;
    if censored as f64 / replicates as f64 > MAX_CENSORED_FRACTION {
        return Err(Error::Censoring {
            censored,
            replicates,
        });
    }
    let times: Vec<u64> = raw.into_iter().flatten().collect();
    let as_f64: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    let (mean, variance) = stats::mean_variance(&as_f64);
    let mut sorted = as_f64;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let uncensored = times.len() as f64;
    let summary = EscapeSummary {
        p,
        n_barrier,
        replicates,
        censored,
        horizon_cap,
        mean,
        variance,
        q50: stats::quantile_sorted(&sorted, 0.5),
        q90: stats::quantile_sorted(&sorted, 0.9),
        q99: stats::quantile_sorted(&sorted, 0.99),
        mean_ci_halfwidth: stats::z_for_confidence(0.99) * (variance / uncensored).sqrt(),
        escape_times: (replicates <= RAW_SAMPLE_CAP).then_some(times),
    };
    debug_assert!(summary.mean >= n_barrier as f64);
    Ok(summary)
}

impl EscapeSummary {
    /// Monte Carlo survival curve P(tau_N > t) on the given time grid, with
    /// 99% binomial-proportion half-widths per point. Censored replicates are
    /// alive past the cap and therefore count as survivors at every grid time
    /// (grid times beyond the cap are rejected).
    pub fn survival_curve(&self, grid: &[u64]) -> Result<SurvivalCurve> {
        let times = self
            .escape_times
            .as_ref()
            .ok_or_else(|| Error::InvalidParam("raw escape sample was not retained".into()))?;
        if grid.iter().any(|&t| t > self.horizon_cap) {
            return Err(Error::InvalidParam(
                "survival grid extends beyond the horizon cap".into(),
            ));
        }
        let mut sorted = times.clone();
        sorted.sort_unstable();
        let n = self.replicates;
        let mut survival = Vec::with_capacity(grid.len());
        let mut ci = Vec::with_capacity(grid.len());
        for &t in grid {
            // tau > t  <=>  not absorbed by t; censored replicates qualify.
            let absorbed_by_t = sorted.partition_point(|&x| x <= t) as u64;
            let alive = n - absorbed_by_t;
            survival.push(alive as f64 / n as f64);
            ci.push(stats::proportion_ci_halfwidth(alive, n, 0.99));
        }
        Ok(SurvivalCurve {
            n_barrier: self.n_barrier,
            p: self.p,
            times: grid.to_vec(),
            survival,
            source: CurveSource::MonteCarlo,
            ci_halfwidth: Some(ci),
        })
    }
}

/// Picks a survival-level-based time grid from an exact curve: for each level
/// the first time the curve drops to or below it. Deduplicated, ascending.
pub fn level_grid(curve: &SurvivalCurve, levels: &[f64]) -> Vec<u64> {
    let mut grid: Vec<u64> = Vec::new();
    for &level in levels {
        if let Some(idx) = curve.survival.iter().position(|&s| s <= level) {
            grid.push(curve.times[idx]);
        }
    }
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Fitted exponential tail of a survival curve: least-squares line through
/// (t, ln survival) on a survival-level window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailFit {
    #[serde(rename = "N")]
    pub n_barrier: u64,
    pub p: f64,
    /// Time range [t_lo, t_hi] actually used.
    pub fit_window: (u64, u64),
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub const DEFAULT_FIT_WINDOW: (f64, f64) = (1e-6, 1e-2);

/// Fits the log-survival slope on the window of survival values
/// [window.0, window.1]. Requires at least 10 strictly positive points in the
/// window and a negative fitted slope.
pub fn fit_tail(curve: &SurvivalCurve, window: (f64, f64)) -> Result<TailFit> {
    if !(window.0 > 0.0 && window.0 < window.1) {
        return Err(Error::InvalidParam(format!(
            "fit window must satisfy 0 < lo < hi, got {window:?}"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &s) in curve.times.iter().zip(&curve.survival) {
        if s >= window.0 && s <= window.1 {
            xs.push(t as f64);
            ys.push(s.ln());
        }
    }
    if xs.len() < 10 {
        return Err(Error::CurveFit(format!(
            "only {} curve points fall in the survival window [{}, {}]",
            xs.len(),
            window.0,
            window.1
        )));
    }
    let (slope, intercept, r_squared) = stats::linear_fit(&xs, &ys);
    if slope >= 0.0 {
        return Err(Error::CurveFit(format!(
            "fitted slope {slope} is not negative; curve is not decaying on the window"
        )));
    }
    Ok(TailFit {
        n_barrier: curve.n_barrier,
        p: curve.p,
        fit_window: (xs[0] as u64, xs[xs.len() - 1] as u64),
        slope,
        intercept,
        r_squared,
        points: xs.len(),
    })
}

/// One entry of the quadratic-scaling analysis: E[tau_N] / N^2 with its CI.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaPoint {
    #[serde(rename = "N")]
    pub n_barrier: u64,
    pub normalized_mean: f64,
    /// 99% half-width of the normalized mean.
    pub ci_halfwidth: f64,
    pub mean: f64,
    pub replicates: u64,
}

/// Estimates E[tau_N] / N^2 along an ascending grid of barriers. The
/// largest-N entry is the theta estimate; no extrapolation is attempted.
/// Sub-runs use disjoint replicate index ranges of the same master seed.
pub fn estimate_theta(
    p: f64,
    n_grid: &[u64],
    replicates_per_n: u64,
    master_seed: u64,
    threads: Threads,
) -> Result<Vec<ThetaPoint>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] < 2 {
        return Err(Error::InvalidParam(
            "N grid must be ascending with all entries >= 2".into(),
        ));
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let summary = mc_escape_times(
            p,
            n,
            replicates_per_n,
            master_seed,
            i as u64 * replicates_per_n,
            default_horizon_cap(n),
            threads,
        )?;
        let n2 = (n * n) as f64;
        points.push(ThetaPoint {
            n_barrier: n,
            normalized_mean: summary.mean / n2,
            ci_halfwidth: summary.mean_ci_halfwidth / n2,
            mean: summary.mean,
            replicates: replicates_per_n,
        });
    }
    Ok(points)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// P(sigma_N > c N^2) <= 1/c, for c > 1.
    MarkovUpper,
    /// P(sigma_N > c N^2) >= 1 - c, for c in (0, 1).
    KolmogorovLower,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCheck {
    pub c: f64,
    pub kind: BoundKind,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial sigma of the empirical proportion.
    pub sigma: f64,
    /// Bound holds within 3 sigma.
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "N")]
    pub n_barrier: u64,
    pub replicates: u64,
    pub checks: Vec<BoundCheck>,
}

/// Empirically checks the SRW escape-time bounds
/// P(sigma_N > c N^2) <= 1/c (c > 1) and >= 1 - c (c in (0,1)) against
/// simulated symmetric-walk escape times.
pub fn verify_markov_kolmogorov_bounds(
    n_barrier: u64,
    c_values: &[f64],
    replicates: u64,
    master_seed: u64,
    threads: Threads,
) -> Result<BoundReport> {
    if n_barrier < 2 || replicates < 2 {
        return Err(Error::InvalidParam(
            "need N >= 2 and replicates >= 2".into(),
        ));
    }
    if c_values.iter().any(|&c| !(c > 0.0) || c == 1.0) {
        return Err(Error::InvalidParam(
            "c values must be positive and distinct from 1".into(),
        ));
    }
    // The SRW hits the barrier almost surely with E[sigma] = N^2; this cap is
    // astronomically beyond the exponential tail and only guards against bugs.
    let cap = 1_000_000u64.saturating_mul(n_barrier * n_barrier);
    let times = crate::exec::map_replicates(replicates, threads, |r| {
        let mut stream = StreamKey::new(master_seed, r, StreamPurpose::WalkDriver).derive();
        let target = n_barrier as i64;
        let mut state = 0i64;
        let mut k = 0u64;
        loop {
            k += 1;
            state = step_reflected_srw(state, stream.next_uniform());
            if state == target {
                return k;
            }
            assert!(
                k < cap,
                "symmetric walk failed to escape within {cap} steps"
            );
        }
    });
    let n2 = (n_barrier * n_barrier) as f64;
    let checks = c_values
        .iter()
        .map(|&c| {
            let exceed = times.iter().filter(|&&t| t as f64 > c * n2).count() as u64;
            let empirical = exceed as f64 / replicates as f64;
            let sigma = (empirical * (1.0 - empirical) / replicates as f64).sqrt();
            let (kind, bound, satisfied) = if c > 1.0 {
                let b = 1.0 / c;
                (BoundKind::MarkovUpper, b, empirical <= b + 3.0 * sigma)
            } else {
                let b = 1.0 - c;
                (BoundKind::KolmogorovLower, b, empirical >= b - 3.0 * sigma)
            };
            BoundCheck {
                c,
                kind,
                empirical,
                bound,
                sigma,
                satisfied,
            }
        })
        .collect();
    Ok(BoundReport {
        n_barrier,
        replicates,
        checks,
    })
}

/// One pairwise two-sample KS comparison between ERW representations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KsPair {
    pub a: Representation,
    pub b: Representation,
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub p: f64,
    pub horizon: u64,
    pub replicates: u64,
    pub alpha: f64,
    pub pairs: Vec<KsPair>,
}

/// Samples |Z_horizon| under all three ERW representations and runs pairwise
/// two-sample KS tests at level `alpha`. The three representations share the
/// master seed but use disjoint replicate ranges.
pub fn representation_equivalence(
    p: f64,
    horizon: u64,
    replicates: u64,
    alpha: f64,
    master_seed: u64,
    threads: Threads,
) -> Result<RepresentationReport> {
    validate_memory(p)?;
    if horizon < 1 || replicates < 10 {
        return Err(Error::InvalidParam(
            "need horizon >= 1 and replicates >= 10".into(),
        ));
    }
    let reps = [
        Representation::Kernel,
        Representation::Memory,
        Representation::Urn,
    ];
    let mut samples: Vec<Vec<i64>> = Vec::with_capacity(3);
    for (i, rep) in reps.iter().enumerate() {
        let offset = i as u64 * replicates;
        let sample = crate::exec::map_replicates(replicates, threads, |r| {
            let mut stream =
                StreamKey::new(master_seed, offset + r, StreamPurpose::WalkDriver).derive();
            let traj = match rep {
                Representation::Kernel => simulate_abs_erw(p, horizon, &mut stream),
                Representation::Memory => simulate_signed_erw_memory(p, horizon, &mut stream),
                Representation::Urn => simulate_urn(p, horizon, &mut stream),
            };
            traj.last().abs()
        });
        samples.push(sample);
    }
    let critical = stats::ks_two_sample_critical(replicates as usize, replicates as usize, alpha);
    let mut pairs = Vec::new();
    for i in 0..3 {
        for j in (i + 1)..3 {
            let statistic = stats::ks_two_sample(&samples[i], &samples[j]);
            pairs.push(KsPair {
                a: reps[i],
                b: reps[j],
                statistic,
                critical,
                pass: statistic < critical,
            });
        }
    }
    Ok(RepresentationReport {
        p,
        horizon,
        replicates,
        alpha,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escape_summary_basics() {
        let s = mc_escape_times(
            0.5,
            3,
            5000,
            0,
            0,
            default_horizon_cap(3),
            Threads::Fixed(1),
        )
        .unwrap();
        assert_eq!(s.censored, 0);
        assert!(s.mean >= 3.0);
        assert!(s.q50 <= s.q90 && s.q90 <= s.q99);
        let times = s.escape_times.as_ref().unwrap();
        assert!(times.iter().all(|&t| t >= 3));
        // E[sigma_3] = 9 for the symmetric case.
        assert!((s.mean - 9.0).abs() < 3.0 * s.mean_ci_halfwidth / 2.5758 * 3.0 + 0.5);
    }

    #[test]
    fn censoring_is_an_error_when_the_cap_is_too_small() {
        let err = mc_escape_times(0.5, 8, 200, 0, 0, 10, Threads::Fixed(1)).unwrap_err();
        assert!(matches!(err, Error::Censoring { .. }));
    }

    #[test]
    fn mean_is_bitwise_thread_invariant() {
        let a = mc_escape_times(
            0.6,
            4,
            4000,
            9,
            0,
            default_horizon_cap(4),
            Threads::Fixed(1),
        )
        .unwrap();
        let b = mc_escape_times(
            0.6,
            4,
            4000,
            9,
            0,
            default_horizon_cap(4),
            Threads::Fixed(4),
        )
        .unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
    }

    #[test]
    fn survival_curve_is_monotone_with_ci() {
        let s = mc_escape_times(
            0.5,
            4,
            20_000,
            1,
            0,
            default_horizon_cap(4),
            Threads::Fixed(1),
        )
        .unwrap();
        let grid: Vec<u64> = (0..=60).collect();
        let curve = s.survival_curve(&grid).unwrap();
        assert_eq!(curve.survival[0], 1.0);
        for w in curve.survival.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(curve.ci_halfwidth.unwrap().iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn fit_tail_recovers_synthetic_geometric_decay() {
        let survival: Vec<f64> = (0..400).map(|t| 0.9f64.powi(t)).collect();
        let curve = SurvivalCurve {
            n_barrier: 5,
            p: 0.5,
            times: (0..400).collect(),
            survival,
            source: CurveSource::Exact,
            ci_halfwidth: None,
        };
        let fit = fit_tail(&curve, DEFAULT_FIT_WINDOW).unwrap();
        assert!(
            (fit.slope - 0.9f64.ln()).abs() < 1e-9,
            "slope = {}",
            fit.slope
        );
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn fit_tail_needs_enough_points() {
        let curve = SurvivalCurve {
            n_barrier: 5,
            p: 0.5,
            times: (0..5).collect(),
            survival: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            source: CurveSource::Exact,
            ci_halfwidth: None,
        };
        assert!(matches!(
            fit_tail(&curve, (1e-3, 1.0)).unwrap_err(),
            Error::CurveFit(_)
        ));
    }

    #[test]
    fn theta_grid_must_ascend() {
        assert!(estimate_theta(0.5, &[10, 10], 100, 0, Threads::Fixed(1)).is_err());
        assert!(estimate_theta(0.5, &[1, 2], 100, 0, Threads::Fixed(1)).is_err());
    }

    #[test]
    fn bound_report_smoke() {
        let report =
            verify_markov_kolmogorov_bounds(5, &[3.0, 0.5], 4000, 0, Threads::Fixed(1)).unwrap();
        assert_eq!(report.checks.len(), 2);
        for check in &report.checks {
            assert!(check.satisfied, "{check:?}");
        }
    }

    #[test]
    fn deep_tail_is_numerically_extinct() {
        // c = 1e6 puts the threshold far beyond the exponential tail: no
        // simulated escape takes that long.
        let report =
            verify_markov_kolmogorov_bounds(10, &[1e6], 10_000, 0, Threads::Fixed(1)).unwrap();
        assert_eq!(report.checks[0].empirical, 0.0);
        assert!(report.checks[0].satisfied);
    }

    #[test]
    fn bound_report_rejects_c_of_one() {
        assert!(verify_markov_kolmogorov_bounds(5, &[1.0], 100, 0, Threads::Fixed(1)).is_err());
    }

    #[test]
    fn representation_report_shape() {
        let report = representation_equivalence(0.5, 400, 800, 0.01, 0, Threads::Fixed(1)).unwrap();
        assert_eq!(report.pairs.len(), 3);
        for pair in &report.pairs {
            assert!(pair.critical > 0.0);
            assert!(pair.pass, "representations diverged: {pair:?}");
        }
    }
}
