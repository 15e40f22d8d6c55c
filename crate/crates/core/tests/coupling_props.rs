//! Moderate-size sweeps of the coupling invariants and the statistical
//! consequences the couplings certify. The full-size versions run in the
//! acceptance suite; these keep the properties exercised on every test run.

use erw_core::couplings::{
    measure_distance_moment, run_asym_coupling, run_dominance_coupling, run_shifted_coupling,
};
use erw_core::exact::asym_ruin_probability;
use erw_core::exec::Threads;
use erw_core::rng::{StreamKey, StreamPurpose};

fn stream(seed: u64, rep: u64) -> erw_core::rng::UniformStream {
    StreamKey::new(seed, rep, StreamPurpose::WalkDriver).derive()
}

#[test]
fn dominance_sweep_has_no_violations() {
    for &p in &[0.75, 0.25] {
        for rep in 0..500 {
            run_dominance_coupling(p, 2000, &mut stream(0, rep), false)
                .unwrap_or_else(|e| panic!("p = {p}, replicate {rep}: {e}"));
        }
    }
}

#[test]
fn shifted_sweep_has_no_violations_and_counts_window_hits() {
    let (p, n, d) = (0.25, 10u64, 13u64);
    let horizon = 12 * n * n;
    let mut hits_total = 0u64;
    let replicates = 400u64;
    for rep in 0..replicates {
        let out = run_shifted_coupling(p, n, d, horizon, &mut stream(1, rep), false).unwrap();
        assert_eq!(out.window_steps, horizon);
        hits_total += out.window_hits;
    }
    // Binomial(12 N^2, (1-2p)/(dN)): mean 12(1-2p)N/d ~ 4.615.
    let mean = hits_total as f64 / replicates as f64;
    let expected = 12.0 * (1.0 - 2.0 * p) * n as f64 / d as f64;
    let sigma = (expected / replicates as f64).sqrt(); // upper bound on binomial sd
    assert!(
        (mean - expected).abs() <= 4.0 * sigma,
        "window-hit mean {mean} vs binomial mean {expected}"
    );
}

#[test]
fn distance_moment_respects_sqrt_k_bound() {
    let k = 1000u64;
    for &p in &[0.6, 0.7] {
        let est = measure_distance_moment(p, k, 2000, 0, Threads::Auto).unwrap();
        let bound = 4.0 * (2.0 * p - 1.0) / (3.0 - 4.0 * p).sqrt() * (k as f64).sqrt();
        assert!(
            est.mean <= bound + 3.0 * est.std_error,
            "p = {p}: E[D_k] = {} vs bound {bound}",
            est.mean
        );
    }
}

#[test]
fn asym_companion_ruin_frequency_matches_formula() {
    let (p, a, n, c) = (0.6, 1u64, 8u64, 1.0);
    let replicates = 10_000u64;
    let outcomes = erw_core::exec::map_replicates(replicates, Threads::Auto, |rep| {
        run_asym_coupling(p, a, n, c, 5_000_000, &mut stream(2, rep), false).unwrap()
    });
    let resolved: Vec<_> = outcomes
        .iter()
        .filter(|o| o.activated_at.is_some() && o.resolved)
        .collect();
    assert!(
        resolved.len() as u64 > replicates * 9 / 10,
        "only {} of {replicates} replicates resolved",
        resolved.len()
    );
    let p_n = resolved[0].companion_up_probability;
    let formula = asym_ruin_probability(a, n, p_n).unwrap();
    let companion_rate =
        resolved.iter().filter(|o| o.companion_hit_zero).count() as f64 / resolved.len() as f64;
    let sigma = (formula * (1.0 - formula) / resolved.len() as f64).sqrt();
    assert!(
        (companion_rate - formula).abs() <= 4.0 * sigma,
        "companion ruin {companion_rate} vs formula {formula}"
    );
    // Coupling consequence: ERW ruin is at least as frequent.
    let erw_rate =
        resolved.iter().filter(|o| o.erw_hit_zero).count() as f64 / resolved.len() as f64;
    assert!(
        erw_rate >= companion_rate - 1e-12,
        "erw ruin {erw_rate} < companion ruin {companion_rate}"
    );
}
