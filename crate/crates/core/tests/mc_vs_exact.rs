//! Monte Carlo against the exact engine, plus the distributional sanity
//! checks of the step-level simulators. All runs are seeded; tolerances are
//! 3 sigma unless the quoted contract says otherwise.

use erw_core::estimators::{default_horizon_cap, level_grid, mc_escape_times};
use erw_core::exact::{exact_expected_escape, exact_survival};
use erw_core::exec::Threads;
use erw_core::rng::{StreamKey, StreamPurpose};
use erw_core::walks::simulate_abs_erw;

#[test]
fn barrier_two_mean_matches_exact_engine() {
    for &p in &[0.3, 0.7] {
        let exact = exact_expected_escape(2, p, 1e-12).unwrap();
        let mc =
            mc_escape_times(p, 2, 1_000_000, 0, 0, default_horizon_cap(2), Threads::Auto).unwrap();
        let se = mc.mean_ci_halfwidth / 2.5758;
        assert!(
            (mc.mean - exact.expectation).abs() <= 3.0 * se + exact.truncation_bound,
            "p = {p}: mc = {} vs exact = {}",
            mc.mean,
            exact.expectation
        );
    }
}

#[test]
fn drifted_escape_mean_matches_exact_engine() {
    let (p, n) = (0.6, 4u64);
    let exact = exact_expected_escape(n, p, 1e-12).unwrap();
    let mc = mc_escape_times(p, n, 1_000_000, 0, 0, default_horizon_cap(n), Threads::Auto).unwrap();
    let se = mc.mean_ci_halfwidth / 2.5758;
    assert!(
        (mc.mean - exact.expectation).abs() <= 3.0 * se + exact.truncation_bound,
        "mc = {} vs exact = {}",
        mc.mean,
        exact.expectation
    );
}

#[test]
fn symmetric_barrier_five_mean_is_twenty_five() {
    let mc = mc_escape_times(0.5, 5, 100_000, 0, 0, default_horizon_cap(5), Threads::Auto).unwrap();
    let se = mc.mean_ci_halfwidth / 2.5758;
    assert!((mc.mean - 25.0).abs() <= 3.0 * se, "mean = {}", mc.mean);
}

#[test]
fn mc_survival_matches_exact_curve_pointwise() {
    let (p, n) = (0.7, 6u64);
    let replicates = 200_000u64;
    let exact = exact_survival(n, p, 4000).unwrap();
    let levels = [0.9, 0.7, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 3e-3, 1e-3];
    let grid = level_grid(&exact, &levels);
    assert!(grid.len() >= 10);
    let mc = mc_escape_times(
        p,
        n,
        replicates,
        0,
        0,
        default_horizon_cap(n),
        Threads::Auto,
    )
    .unwrap()
    .survival_curve(&grid)
    .unwrap();
    for (i, &t) in grid.iter().enumerate() {
        let truth = exact.at(t).unwrap();
        let sigma = (truth * (1.0 - truth) / replicates as f64).sqrt();
        assert!(
            (mc.survival[i] - truth).abs() <= 3.0 * sigma,
            "t = {t}: mc = {} vs exact = {truth} (sigma = {sigma})",
            mc.survival[i]
        );
    }
}

/// At p = 1/2 the ERW is the simple random walk, so E[Z_n^2] = n.
#[test]
fn symmetric_walk_has_diffusive_normalization() {
    let horizon = 100_000u64;
    let replicates = 10_000u64;
    let mean_sq = erw_core::exec::map_replicates(replicates, Threads::Auto, |r| {
        let mut stream = StreamKey::new(2, r, StreamPurpose::WalkDriver).derive();
        let z = simulate_abs_erw(0.5, horizon, &mut stream).last() as f64;
        z * z
    })
    .iter()
    .sum::<f64>()
        / replicates as f64;
    let ratio = mean_sq / horizon as f64;
    assert!((ratio - 1.0).abs() < 0.05, "E[Z_n^2]/n = {ratio}");
}

/// In the diffusive regime the second moment is bounded by n/(3-4p).
#[test]
fn diffusive_second_moment_bound_at_p_07() {
    let horizon = 10_000u64;
    let replicates = 10_000u64;
    let mean_sq = erw_core::exec::map_replicates(replicates, Threads::Auto, |r| {
        let mut stream = StreamKey::new(3, r, StreamPurpose::WalkDriver).derive();
        let z = simulate_abs_erw(0.7, horizon, &mut stream).last() as f64;
        z * z
    })
    .iter()
    .sum::<f64>()
        / replicates as f64;
    let ratio = mean_sq / horizon as f64;
    // 1/(3 - 4 * 0.7) = 5, plus 10% slack.
    assert!(ratio <= 5.5, "E[Z_n^2]/n = {ratio}");
}
