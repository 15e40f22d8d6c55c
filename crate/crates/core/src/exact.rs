//! Exact, sampling-free computation of escape-time distributions.
//!
//! The absolute-value ERW is a time-inhomogeneous Markov chain on
//! {0, 1, ..., N-1} with an absorbing barrier at N. Pushing its probability
//! mass forward one kernel step at a time yields the survival function
//! P(tau_N > t) to floating-point accuracy, with no Monte Carlo noise. The
//! module also carries the classical closed forms for the simple random walk
//! (expected ruin duration, asymmetric ruin probability) that the simulation
//! side is checked against.

use crate::walks::{kernel_up, validate_memory};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Where a survival curve came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveSource {
    Exact,
    MonteCarlo,
}

/// P(escape time > t) on an ascending grid of integer times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalCurve {
    #[serde(rename = "N")]
    pub n_barrier: u64,
    pub p: f64,
    pub times: Vec<u64>,
    pub survival: Vec<f64>,
    pub source: CurveSource,
    /// Per-point confidence half-widths; Monte Carlo curves only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_halfwidth: Option<Vec<f64>>,
}

impl SurvivalCurve {
    /// Survival value at integer time `t`, if `t` is on the grid.
    pub fn at(&self, t: u64) -> Option<f64> {
        self.times.binary_search(&t).ok().map(|i| self.survival[i])
    }
}

/// Forward dynamic-programming state: the sub-probability mass of the
/// unabsorbed chain over states {0..N-1} at the current time.
///
/// Invariants: `sum(mass) + absorbed == 1` up to 1e-12, mass is zero on
/// states exceeding the elapsed time or of the wrong parity, and all entries
/// stay nonnegative.
#[derive(Clone, Debug)]
pub struct AbsorbingDp {
    n_barrier: u64,
    p: f64,
    mass: Vec<f64>,
    scratch: Vec<f64>,
    time: u64,
    absorbed: f64,
    absorbed_comp: f64, // Kahan compensation for the absorbed accumulator
}

impl AbsorbingDp {
    /// Starts the chain at time 1 with all mass at state 1 (the first step is
    /// forced, so |Z_1| = 1 surely). Requires `n_barrier >= 2`.
    pub fn new(n_barrier: u64, p: f64) -> Result<Self> {
        validate_memory(p)?;
        if n_barrier < 2 {
            return Err(Error::InvalidParam(format!(
                "absorbing DP needs a barrier >= 2, got {n_barrier}"
            )));
        }
        let mut mass = vec![0.0; n_barrier as usize];
        mass[1] = 1.0;
        Ok(Self {
            n_barrier,
            p,
            scratch: vec![0.0; mass.len()],
            mass,
            time: 1,
            absorbed: 0.0,
            absorbed_comp: 0.0,
        })
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn n_barrier(&self) -> u64 {
        self.n_barrier
    }

    /// P(tau_N > current time) = 1 - absorbed. Exactly 1 while the barrier is
    /// unreachable; afterwards accurate to the compensated absorbed sum,
    /// which drifts far less than the mass vector itself.
    pub fn survival(&self) -> f64 {
        1.0 - self.absorbed
    }

    /// Total unabsorbed mass, summed over the state vector. Agrees with
    /// [`Self::survival`] up to the conservation tolerance.
    pub fn mass_total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn absorbed(&self) -> f64 {
        self.absorbed
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn absorb(&mut self, x: f64) {
        // Kahan summation: absorbed grows to ~1 while increments shrink below
        // 1e-12, and the plain running sum would drift past the conservation
        // tolerance over ~1e6 steps.
        let y = x - self.absorbed_comp;
        let t = self.absorbed + y;
        self.absorbed_comp = (t - self.absorbed) - y;
        self.absorbed = t;
    }

    /// Pushes the mass one kernel step forward. State 0 sends everything to
    /// state 1; interior states split by the kernel at the current time; mass
    /// arriving at the barrier is absorbed.
    pub fn advance(&mut self) {
        let n = self.time;
        let size = self.mass.len();
        // Only states matching the current time's parity carry mass.
        let start = (n % 2) as usize;
        self.scratch[..size].fill(0.0);
        let mut absorbed_now = 0.0;
        let mut i = start;
        while i < size {
            let m = self.mass[i];
            if m != 0.0 {
                if i == 0 {
                    self.scratch[1] += m;
                } else {
                    let up = kernel_up(self.p, n, i as i64);
                    let down = 1.0 - up;
                    if i + 1 == size {
                        absorbed_now += m * up;
                    } else {
                        self.scratch[i + 1] += m * up;
                    }
                    self.scratch[i - 1] += m * down;
                }
            }
            i += 2;
        }
        std::mem::swap(&mut self.mass, &mut self.scratch);
        self.absorb(absorbed_now);
        self.time = n + 1;
    }
}

/// Exact survival curve P(tau_N > t) for t = 0..=t_max. `n_barrier = 1` is
/// accepted as the degenerate case tau_1 = 1.
pub fn exact_survival(n_barrier: u64, p: f64, t_max: u64) -> Result<SurvivalCurve> {
    validate_memory(p)?;
    if n_barrier == 0 {
        return Err(Error::InvalidParam("barrier must be >= 1".into()));
    }
    let times: Vec<u64> = (0..=t_max).collect();
    let mut survival = Vec::with_capacity(times.len());
    survival.push(1.0);
    if n_barrier == 1 {
        survival.resize(times.len(), 0.0);
    } else {
        let mut dp = AbsorbingDp::new(n_barrier, p)?;
        if t_max >= 1 {
            survival.push(dp.survival());
        }
        for _ in 2..=t_max {
            dp.advance();
            survival.push(dp.survival());
        }
    }
    Ok(SurvivalCurve {
        n_barrier,
        p,
        times,
        survival,
        source: CurveSource::Exact,
        ci_halfwidth: None,
    })
}

/// Exact survival curve extended until the survival drops below `threshold`
/// (or `hard_cap` is hit, which is an error). Used when the caller needs the
/// whole relevant tail, e.g. for slope fitting, without guessing t_max.
pub fn exact_survival_until(
    n_barrier: u64,
    p: f64,
    threshold: f64,
    hard_cap: u64,
) -> Result<SurvivalCurve> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParam(format!(
            "threshold must lie in (0,1), got {threshold}"
        )));
    }
    let mut dp = AbsorbingDp::new(n_barrier, p)?;
    let mut survival = vec![1.0, 1.0];
    loop {
        dp.advance();
        let s = dp.survival();
        survival.push(s);
        if s < threshold {
            break;
        }
        if dp.time() >= hard_cap {
            return Err(Error::Numeric(format!(
                "survival has not decayed below {threshold} within {hard_cap} steps \
                 (N = {n_barrier}, p = {p})"
            )));
        }
    }
    Ok(SurvivalCurve {
        n_barrier,
        p,
        times: (0..survival.len() as u64).collect(),
        survival,
        source: CurveSource::Exact,
        ci_halfwidth: None,
    })
}

/// E[tau_N] with a truncation error bar.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpectedEscape {
    #[serde(rename = "N")]
    pub n_barrier: u64,
    pub p: f64,
    pub expectation: f64,
    pub truncation_bound: f64,
    /// Last time included in the sum.
    pub truncated_at: u64,
}

pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

/// E[tau_N] = sum over t >= 0 of P(tau_N > t), truncated once the survival
/// drops below `tail_eps`. The discarded tail is bounded by
/// `survival(T) * r / (1 - r)`, with r the per-step geometric decay ratio
/// observed over the last decade of the curve, and reported as
/// `truncation_bound`. Fails if the curve has not decayed below `tail_eps`
/// within `10^4 * N^2` steps.
pub fn exact_expected_escape(n_barrier: u64, p: f64, tail_eps: f64) -> Result<ExpectedEscape> {
    let cap = 10_000u64.saturating_mul(n_barrier * n_barrier);
    exact_expected_escape_with_cap(n_barrier, p, tail_eps, cap)
}

pub fn exact_expected_escape_with_cap(
    n_barrier: u64,
    p: f64,
    tail_eps: f64,
    hard_cap: u64,
) -> Result<ExpectedEscape> {
    if !(tail_eps > 0.0 && tail_eps <= 1e-6) {
        return Err(Error::InvalidParam(format!(
            "tail_eps must lie in (0, 1e-6], got {tail_eps}"
        )));
    }
    let mut dp = AbsorbingDp::new(n_barrier, p)?;
    // t = 0 and t = 1 both contribute survival 1.
    let mut expectation = 2.0;
    // First crossing below 10 * tail_eps anchors the decay-rate estimate.
    let mut decade_anchor: Option<(u64, f64)> = None;
    let mut prev_survival = 1.0;
    loop {
        dp.advance();
        let t = dp.time();
        let s = dp.survival();
        if s < tail_eps {
            let (t0, s0) = decade_anchor.unwrap_or((t - 1, prev_survival));
            let steps = (t - t0).max(1) as f64;
            let ratio = (s / s0).powf(1.0 / steps);
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(Error::Numeric(format!(
                    "could not estimate a geometric decay ratio (r = {ratio})"
                )));
            }
            expectation += s;
            let truncation_bound = s * ratio / (1.0 - ratio);
            return Ok(ExpectedEscape {
                n_barrier,
                p,
                expectation,
                truncation_bound,
                truncated_at: t,
            });
        }
        if decade_anchor.is_none() && s < 10.0 * tail_eps {
            decade_anchor = Some((t, s));
        }
        expectation += s;
        prev_survival = s;
        if t >= hard_cap {
            return Err(Error::Numeric(format!(
                "survival has not decayed below {tail_eps} within {hard_cap} steps \
                 (N = {n_barrier}, p = {p})"
            )));
        }
    }
}

/// Expected ruin duration of the simple random walk started at `start`
/// with absorbing barriers at +-N.
///
/// Symmetric case (q = 1/2): (N - x)(N + x). Asymmetric case: the classical
/// closed form N/(2q-1) * (1 - rho^N)/(1 + rho^N) with rho = (1-q)/q, which
/// is only available from the origin.
pub fn srw_expected_duration(n_barrier: u64, start: i64, up_probability: f64) -> Result<f64> {
    if start.unsigned_abs() >= n_barrier {
        return Err(Error::InvalidParam(format!(
            "start {start} must lie strictly inside (-{n_barrier}, {n_barrier})"
        )));
    }
    if !(up_probability > 0.0 && up_probability < 1.0) {
        return Err(Error::InvalidParam(format!(
            "up probability must lie in (0,1), got {up_probability}"
        )));
    }
    let n = n_barrier as f64;
    let x = start as f64;
    if up_probability == 0.5 {
        return Ok((n - x) * (n + x));
    }
    if start != 0 {
        return Err(Error::InvalidParam(
            "asymmetric duration formula is only defined from the origin".into(),
        ));
    }
    let q = up_probability;
    let rho = (1.0 - q) / q;
    let rho_n = rho.powi(n_barrier as i32);
    Ok(n / (2.0 * q - 1.0) * ((1.0 - rho_n) / (1.0 + rho_n)))
}

/// Ruin probability of the asymmetric simple random walk started at A*N with
/// absorbing barriers at 0 and 2*A*N: rho^(AN) / (rho^(AN) + 1) with
/// rho = (1 - p_n)/p_n, evaluated in log space so large exponents neither
/// overflow nor underflow.
pub fn asym_ruin_probability(a_scale: u64, n_barrier: u64, p_n: f64) -> Result<f64> {
    if a_scale < 1 || n_barrier < 1 {
        return Err(Error::InvalidParam("need A >= 1 and N >= 1".into()));
    }
    if !(p_n > 0.0 && p_n < 1.0) {
        return Err(Error::InvalidParam(format!(
            "p_n must lie in (0,1), got {p_n}"
        )));
    }
    if p_n == 0.5 {
        return Err(Error::InvalidParam(
            "p_n = 1/2 is the symmetric case; its ruin probability is 1/2".into(),
        ));
    }
    let exponent = (a_scale * n_barrier) as f64;
    let y = exponent * ((1.0 - p_n).ln() - p_n.ln()); // log rho^(AN)
                                                      // Stable logistic: rho^(AN)/(rho^(AN)+1) = 1/(1 + e^(-y)).
    Ok(if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_step_from_barrier_two() {
        for &p in &[0.1, 0.37, 0.5, 0.9] {
            let mut dp = AbsorbingDp::new(2, p).unwrap();
            dp.advance();
            assert!((dp.absorbed() - p).abs() < 1e-15);
            assert!((dp.mass()[0] - (1.0 - p)).abs() < 1e-15);
            assert!((dp.survival() - (1.0 - p)).abs() < 1e-15);
        }
    }

    #[test]
    fn survival_of_barrier_two_after_two_steps_is_one_minus_p() {
        // The first nontrivial absorption happens at t = 2 with probability p,
        // and the arithmetic chain reproduces 1 - p bit-exactly.
        for &p in &[0.1, 0.5, 0.9] {
            let curve = exact_survival(2, p, 4).unwrap();
            assert_eq!(curve.at(2).unwrap(), 1.0 - p);
        }
    }

    #[test]
    fn conservation_holds_over_many_steps() {
        for &(n, p) in &[(2u64, 0.3), (5, 0.7), (8, 0.25), (10, 0.5)] {
            let mut dp = AbsorbingDp::new(n, p).unwrap();
            for _ in 0..20_000 {
                dp.advance();
                let total = dp.mass_total() + dp.absorbed();
                assert!(
                    (total - 1.0).abs() <= 1e-12,
                    "conservation drift {} at t = {} (N = {n}, p = {p})",
                    (total - 1.0).abs(),
                    dp.time()
                );
            }
        }
    }

    #[test]
    fn mass_respects_parity_and_reachability() {
        let mut dp = AbsorbingDp::new(9, 0.6).unwrap();
        for _ in 0..50 {
            let t = dp.time();
            for (i, &m) in dp.mass().iter().enumerate() {
                assert!(m >= 0.0);
                if i as u64 > t || (i as u64) % 2 != t % 2 {
                    assert_eq!(m, 0.0, "mass at unreachable state {i} at time {t}");
                }
            }
            dp.advance();
        }
    }

    #[test]
    fn degenerate_barrier_one() {
        let curve = exact_survival(1, 0.4, 10).unwrap();
        assert_eq!(curve.survival[0], 1.0);
        for t in 1..=10 {
            assert_eq!(curve.at(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn curve_is_one_before_the_barrier_is_reachable() {
        let curve = exact_survival(6, 0.33, 40).unwrap();
        for t in 0..6 {
            assert_eq!(curve.at(t).unwrap(), 1.0, "t = {t}");
        }
        assert!(curve.at(6).unwrap() < 1.0);
    }

    #[test]
    fn curve_is_non_increasing() {
        for &p in &[0.25, 0.5, 0.7] {
            let curve = exact_survival(7, p, 500).unwrap();
            for w in curve.survival.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
            assert!(curve.survival.iter().all(|&s| (0.0..=1.0).contains(&s)));
        }
    }

    #[test]
    fn symmetric_expected_escape_is_n_squared() {
        for n in 2..=8u64 {
            let out = exact_expected_escape(n, 0.5, 1e-12).unwrap();
            let target = (n * n) as f64;
            assert!(
                (out.expectation - target).abs() <= 1e-9 + out.truncation_bound,
                "N = {n}: got {} vs {target}",
                out.expectation
            );
        }
    }

    #[test]
    fn expected_escape_rejects_bad_inputs() {
        assert!(exact_expected_escape(1, 0.5, 1e-12).is_err());
        assert!(exact_expected_escape(4, 0.5, 1e-3).is_err());
        assert!(exact_expected_escape(4, 0.5, 0.0).is_err());
        // A cap far too small to let the curve decay must fail loudly.
        assert!(exact_expected_escape_with_cap(6, 0.5, 1e-12, 10).is_err());
    }

    #[test]
    fn srw_duration_examples() {
        assert_eq!(srw_expected_duration(5, 0, 0.5).unwrap(), 25.0);
        assert_eq!(srw_expected_duration(3, 1, 0.5).unwrap(), 8.0);
        let asym = srw_expected_duration(4, 0, 0.6).unwrap();
        // 20 * (1 - (2/3)^4) / (1 + (2/3)^4)
        let rho4 = (2.0f64 / 3.0).powi(4);
        let direct = 20.0 * (1.0 - rho4) / (1.0 + rho4);
        assert!((asym - direct).abs() < 1e-12);
        assert!((asym - 13.402061855670103).abs() < 1e-9);
    }

    #[test]
    fn srw_duration_rejects_out_of_range_start() {
        assert!(srw_expected_duration(5, 5, 0.5).is_err());
        assert!(srw_expected_duration(5, -6, 0.5).is_err());
        assert!(srw_expected_duration(5, 1, 0.6).is_err());
    }

    #[test]
    fn asym_ruin_matches_direct_evaluation() {
        let got = asym_ruin_probability(1, 10, 0.55).unwrap();
        let rho = 0.45f64 / 0.55;
        let direct = rho.powi(10) / (rho.powi(10) + 1.0);
        assert!((got - direct).abs() < 1e-12);
        // Independent algebraic route via the three-point ruin formula.
        let phi = |y: i32| rho.powi(y);
        let three_point = (phi(20) - phi(10)) / (phi(20) - phi(0));
        assert!((got - three_point).abs() < 1e-12);
        assert!((got - 0.118498).abs() < 1e-5);
    }

    #[test]
    fn asym_ruin_survives_extreme_exponents() {
        // Direct evaluation would overflow rho^(AN) here.
        let deep = asym_ruin_probability(10, 1000, 0.45).unwrap();
        assert!((deep - 1.0).abs() < 1e-12);
        let tiny = asym_ruin_probability(10, 1000, 0.55).unwrap();
        assert!((0.0..1e-300).contains(&tiny));
    }

    #[test]
    fn asym_ruin_rejects_symmetric_and_invalid() {
        assert!(asym_ruin_probability(1, 10, 0.5).is_err());
        assert!(asym_ruin_probability(0, 10, 0.6).is_err());
        assert!(asym_ruin_probability(1, 10, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn asym_ruin_is_decreasing_in_p(pa in 0.51f64..0.74, delta in 0.005f64..0.2) {
            let pb = (pa + delta).min(0.99);
            let a = asym_ruin_probability(1, 10, pa).unwrap();
            let b = asym_ruin_probability(1, 10, pb).unwrap();
            prop_assert!(b < a, "ruin({pb}) = {b} !< ruin({pa}) = {a}");
        }

        #[test]
        fn conservation_for_random_params(n in 2u64..12, p in 0.05f64..0.95, steps in 1u64..300) {
            let mut dp = AbsorbingDp::new(n, p).unwrap();
            for _ in 0..steps {
                dp.advance();
            }
            prop_assert!((dp.mass_total() + dp.absorbed() - 1.0).abs() <= 1e-12);
        }
    }
}
