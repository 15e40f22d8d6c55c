//! Independent oracles for the exact engine: brute-force path enumeration
//! for the symmetric case, a closed-form product for the barrier-2 chain,
//! and the pointwise ordering of survival curves in the memory parameter.

use erw_core::exact::{exact_expected_escape, exact_survival};

/// Survival function of the SRW escape time sigma_N for t = 0..=t_max,
/// computed by enumerating all 2^t_max sign sequences. Exact up to one
/// division per value; completely independent of the DP implementation.
fn enumerated_srw_survival(n_barrier: i64, t_max: u32) -> Vec<f64> {
    assert!(t_max <= 22, "enumeration is exponential in t_max");
    let total: u64 = 1 << t_max;
    let mut hits = vec![0u64; t_max as usize + 1];
    for bits in 0..total {
        let mut s = 0i64;
        for j in 0..t_max {
            s += if bits >> j & 1 == 1 { 1 } else { -1 };
            if s.abs() == n_barrier {
                hits[j as usize + 1] += 1;
                break;
            }
        }
    }
    // hits[h] counts full-length paths whose first hit is at time h; each
    // carries probability 2^-t_max.
    let mut survival = Vec::with_capacity(t_max as usize + 1);
    let mut absorbed = 0u64;
    survival.push(1.0);
    for &h in &hits[1..] {
        absorbed += h;
        survival.push((total - absorbed) as f64 / total as f64);
    }
    survival
}

#[test]
fn dp_matches_path_enumeration_for_symmetric_walk() {
    for &n in &[2i64, 3, 4] {
        let oracle = enumerated_srw_survival(n, 20);
        let dp = exact_survival(n as u64, 0.5, 20).unwrap();
        for (t, (got, want)) in dp.survival.iter().zip(&oracle).enumerate() {
            assert!(
                (got - want).abs() < 1e-12,
                "N = {n}, t = {t}: dp = {got} vs enumeration = {want}"
            );
        }
    }
}

/// For N = 2 the surviving chain alternates between states 1 (odd times) and
/// 0 (even times), so P(tau_2 > 2k) is the product of the down-move
/// probabilities at the odd times 1, 3, ..., 2k-1.
#[test]
fn dp_matches_barrier_two_product_formula() {
    for &p in &[0.25, 0.6, 0.9] {
        let t_max = 400u64;
        let dp = exact_survival(2, p, t_max).unwrap();
        let mut product = 1.0f64;
        for k in 1..=(t_max / 2) {
            let odd_time = (2 * k - 1) as f64;
            product *= 0.5 - (2.0 * p - 1.0) / (2.0 * odd_time);
            let even = (2 * k) as usize;
            assert!(
                (dp.survival[even] - product).abs() < 1e-12,
                "p = {p}, t = {even}: dp = {} vs product = {product}",
                dp.survival[even]
            );
            // Absorption only happens on even steps.
            if even < t_max as usize {
                assert_eq!(dp.survival[even], dp.survival[even + 1]);
            }
        }
    }
}

#[test]
fn survival_is_pointwise_non_increasing_in_p() {
    let ps = [0.2, 0.35, 0.5, 0.65, 0.8];
    for &n in &[3u64, 5, 8] {
        let curves: Vec<_> = ps
            .iter()
            .map(|&p| exact_survival(n, p, 2000).unwrap())
            .collect();
        for pair in curves.windows(2) {
            for t in 0..pair[0].survival.len() {
                assert!(
                    pair[1].survival[t] <= pair[0].survival[t] + 1e-12,
                    "N = {n}, t = {t}: survival rose from p = {} to p = {}",
                    pair[0].p,
                    pair[1].p
                );
            }
        }
    }
}

#[test]
fn expectation_agrees_with_direct_curve_summation() {
    for &(n, p) in &[(4u64, 0.3), (6, 0.65)] {
        let expected = exact_expected_escape(n, p, 1e-12).unwrap();
        let curve = exact_survival(n, p, expected.truncated_at).unwrap();
        let direct: f64 = curve.survival.iter().sum();
        assert!(
            (expected.expectation - direct).abs() < 1e-9,
            "N = {n}, p = {p}: {} vs {direct}",
            expected.expectation
        );
    }
}
