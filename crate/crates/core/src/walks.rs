//! Step-level simulation of the walks under study: the elephant random walk
//! (ERW) in three equivalent representations, the symmetric simple random
//! walk, the asymmetric simple random walk, and their reflected variants.
//!
//! The authoritative ERW transition law is the time-inhomogeneous kernel
//!
//! ```text
//! P(Z_{n+1} = i+1 | Z_n = i) = 1/2 + (2p-1) i / (2n),   n >= 1,
//! ```
//!
//! with the absolute-value chain forced from state 0 to 1. All simulators
//! decide each +-1 move by comparing one uniform draw against the relevant
//! threshold, which is what makes the pathwise couplings in
//! [`crate::couplings`] possible.

use crate::rng::UniformStream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which mechanism generates the ERW steps. All three produce the same law
/// for `|Z_n|`; they differ in how many uniforms they consume and in state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Time-inhomogeneous kernel on the absolute value chain, one uniform
    /// per step. This is the workhorse used by escape-time estimation.
    Kernel,
    /// Literal memory mechanism: pick a uniformly random past step, repeat it
    /// with probability p, flip it otherwise. Two uniforms per step.
    Memory,
    /// Reinforced-urn betting game: draw a ball, reinforce with the same
    /// color with probability p. Two uniforms per step.
    Urn,
}

/// Memory parameter and representation choice for one ERW.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub p: f64,
    pub representation: Representation,
}

impl WalkParams {
    pub fn new(p: f64, representation: Representation) -> Result<Self> {
        validate_memory(p)?;
        Ok(Self { p, representation })
    }

    /// Simulates one trajectory of length `horizon + 1` with this
    /// representation. Kernel yields the absolute-value chain; Memory and Urn
    /// yield signed positions.
    pub fn simulate(&self, horizon: u64, stream: &mut UniformStream) -> Trajectory {
        match self.representation {
            Representation::Kernel => simulate_abs_erw(self.p, horizon, stream),
            Representation::Memory => simulate_signed_erw_memory(self.p, horizon, stream),
            Representation::Urn => simulate_urn(self.p, horizon, stream),
        }
    }
}

/// Up-step probability of an asymmetric simple random walk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymParams {
    pub up_probability: f64,
}

impl AsymParams {
    pub fn new(up_probability: f64) -> Result<Self> {
        if !(up_probability > 0.0 && up_probability < 1.0) {
            return Err(Error::InvalidParam(format!(
                "up_probability must lie in (0,1), got {up_probability}"
            )));
        }
        Ok(Self { up_probability })
    }
}

/// One simulated path: `positions[n]` is the walk's position at time n.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub positions: Vec<i64>,
    pub params: WalkParams,
}

impl Trajectory {
    pub fn horizon(&self) -> u64 {
        (self.positions.len() - 1) as u64
    }

    pub fn last(&self) -> i64 {
        *self.positions.last().unwrap()
    }
}

pub(crate) fn validate_memory(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParam(format!(
            "memory parameter p must lie in (0,1), got {p}"
        )));
    }
    Ok(())
}

/// ERW up-move probability at time `n >= 1` in state `i`:
/// `1/2 + (2p-1) i / (2n)`. Rejects the unreachable `|i| > n` and the
/// undefined time `n = 0`. The forced move from state 0 of the
/// absolute-value chain is handled by the step functions, not here.
pub fn erw_up_probability(p: f64, n: u64, i: i64) -> Result<f64> {
    validate_memory(p)?;
    if n == 0 {
        return Err(Error::InvalidParam("kernel is undefined at time 0".into()));
    }
    if i.unsigned_abs() > n {
        return Err(Error::InvalidParam(format!(
            "state {i} is unreachable at time {n}"
        )));
    }
    Ok(kernel_up(p, n, i))
}

/// Unchecked kernel evaluation for hot loops; callers guarantee `n >= 1` and
/// `|i| <= n`.
#[inline]
pub(crate) fn kernel_up(p: f64, n: u64, i: i64) -> f64 {
    0.5 + (2.0 * p - 1.0) * i as f64 / (2.0 * n as f64)
}

/// One step of the absolute-value ERW at time `n` in state `state >= 0`.
/// State 0 moves to 1 deterministically; otherwise the step is +1 exactly
/// when `u` falls below the kernel threshold.
#[inline]
pub fn step_abs_erw(state: i64, n: u64, u: f64, p: f64) -> i64 {
    debug_assert!(state >= 0 && state as u64 <= n.max(1));
    if state == 0 {
        1
    } else if u < kernel_up(p, n, state) {
        state + 1
    } else {
        state - 1
    }
}

/// One step of the signed symmetric simple random walk.
#[inline]
pub fn step_srw(state: i64, u: f64) -> i64 {
    if u < 0.5 {
        state + 1
    } else {
        state - 1
    }
}

/// One step of the signed asymmetric simple random walk: up exactly when
/// `u < up_probability`.
#[inline]
pub fn step_asym_srw(state: i64, u: f64, params: AsymParams) -> i64 {
    if u < params.up_probability {
        state + 1
    } else {
        state - 1
    }
}

/// One step of the reflected symmetric walk: forced up from 0, otherwise
/// threshold 1/2.
#[inline]
pub fn step_reflected_srw(state: i64, u: f64) -> i64 {
    debug_assert!(state >= 0);
    if state == 0 {
        1
    } else {
        step_srw(state, u)
    }
}

/// Simulates the absolute-value ERW under the kernel representation.
/// Consumes exactly one uniform per time step, including the forced steps
/// from state 0, so that coupled walks can share the same stream positions.
pub fn simulate_abs_erw(p: f64, horizon: u64, stream: &mut UniformStream) -> Trajectory {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut positions = Vec::with_capacity(horizon as usize + 1);
    positions.push(0i64);
    let mut state = 0i64;
    for k in 1..=horizon {
        let u = stream.next_uniform();
        state = step_abs_erw(state, k - 1, u, p);
        positions.push(state);
    }
    Trajectory {
        positions,
        params: WalkParams {
            p,
            representation: Representation::Kernel,
        },
    }
}

/// Simulates the signed ERW by the literal memory mechanism: step k+1 picks
/// a uniform index K in {1..k} (one uniform), then repeats X_K with
/// probability p and flips it otherwise (a second uniform). The first step is
/// +1 by convention; only |Z| is distribution-relevant.
pub fn simulate_signed_erw_memory(p: f64, horizon: u64, stream: &mut UniformStream) -> Trajectory {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut positions = Vec::with_capacity(horizon as usize + 1);
    let mut steps: Vec<i8> = Vec::with_capacity(horizon as usize);
    positions.push(0i64);
    let mut pos = 0i64;
    for k in 1..=horizon {
        let step: i8 = if k == 1 {
            1
        } else {
            let idx = ((stream.next_uniform() * (k - 1) as f64) as usize).min(k as usize - 2);
            let past = steps[idx];
            if stream.next_uniform() < p {
                past
            } else {
                -past
            }
        };
        steps.push(step);
        pos += step as i64;
        positions.push(pos);
    }
    Trajectory {
        positions,
        params: WalkParams {
            p,
            representation: Representation::Memory,
        },
    }
}

/// Simulates the signed ERW as the reinforced-urn game. Balls stand for past
/// steps (green = +1), so the urn starts with the single green ball that is
/// the conventional first step. Each later round draws a ball uniformly (one
/// uniform) and adds a new ball of the same color with probability p,
/// opposite color otherwise (a second uniform); the gambler's +-1 gain at
/// each round is the color of the ball the sampling adds. State is just the
/// two counts, since a uniform ball draw depends only on them.
pub fn simulate_urn(p: f64, horizon: u64, stream: &mut UniformStream) -> Trajectory {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut positions = Vec::with_capacity(horizon as usize + 1);
    positions.push(0i64);
    if horizon >= 1 {
        positions.push(1i64);
    }
    let mut green = 1u64;
    let mut pos = 1i64;
    for k in 2..=horizon {
        let total = k - 1; // one ball per step taken so far
        let drew_green = stream.next_uniform() < green as f64 / total as f64;
        let same_color = stream.next_uniform() < p;
        let new_green = drew_green == same_color;
        pos += if new_green { 1 } else { -1 };
        positions.push(pos);
        if new_green {
            green += 1;
        }
    }
    Trajectory {
        positions,
        params: WalkParams {
            p,
            representation: Representation::Urn,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamKey, StreamPurpose};
    use proptest::prelude::*;

    fn stream(rep: u64) -> UniformStream {
        StreamKey::new(7, rep, StreamPurpose::WalkDriver).derive()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(erw_up_probability(0.5, 10, 4).unwrap(), 0.5);
        for &p in &[0.1, 0.3, 0.6, 0.9] {
            assert!((erw_up_probability(p, 1, 1).unwrap() - p).abs() < 1e-15);
        }
        assert!((erw_up_probability(0.75, 4, 2).unwrap() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn kernel_rejects_unreachable_state_and_time_zero() {
        assert!(erw_up_probability(0.5, 3, 4).is_err());
        assert!(erw_up_probability(0.5, 3, -4).is_err());
        assert!(erw_up_probability(0.5, 0, 0).is_err());
        assert!(erw_up_probability(1.0, 3, 1).is_err());
    }

    #[test]
    fn step_abs_erw_examples() {
        for n in [1u64, 5, 100] {
            for &u in &[0.0, 0.3, 0.99] {
                for &p in &[0.2, 0.5, 0.8] {
                    assert_eq!(step_abs_erw(0, n, u, p), 1);
                }
            }
        }
        assert_eq!(step_abs_erw(3, 3, 0.0, 0.6), 4);
        // threshold at (p=0.75, n=4, i=2) is 0.625, so u = 0.9 steps down
        assert_eq!(step_abs_erw(2, 4, 0.9, 0.75), 1);
    }

    #[test]
    fn srw_step_examples() {
        assert_eq!(step_srw(5, 0.49), 6);
        assert_eq!(step_srw(5, 0.5), 4);
        for &u in &[0.0, 0.5, 0.99] {
            assert_eq!(step_reflected_srw(0, u), 1);
        }
        let asym = AsymParams::new(0.4).unwrap();
        assert_eq!(step_asym_srw(5, 0.49, asym), 4);
        assert_eq!(step_asym_srw(5, 0.39, asym), 6);
    }

    #[test]
    fn first_step_is_forced_in_all_representations() {
        for rep in [
            Representation::Kernel,
            Representation::Memory,
            Representation::Urn,
        ] {
            let params = WalkParams::new(0.3, rep).unwrap();
            for seed in 0..20 {
                let traj = params.simulate(1, &mut stream(seed));
                assert_eq!(traj.positions, vec![0, 1]);
            }
        }
    }

    #[test]
    fn params_validate_memory_range() {
        assert!(WalkParams::new(0.0, Representation::Kernel).is_err());
        assert!(WalkParams::new(1.0, Representation::Kernel).is_err());
        assert!(WalkParams::new(f64::NAN, Representation::Kernel).is_err());
        assert!(AsymParams::new(1.0).is_err());
    }

    #[test]
    fn kernel_simulation_consumes_one_uniform_per_step() {
        let mut s = stream(1);
        simulate_abs_erw(0.6, 1234, &mut s);
        assert_eq!(s.draws_consumed(), 1234);
    }

    proptest! {
        #[test]
        fn kernel_range_invariant(p in 0.01f64..0.99, n in 1u64..1000, frac in -1.0f64..1.0) {
            let i = (frac * n as f64) as i64;
            let q = erw_up_probability(p, n, i).unwrap();
            let lo = p.min(1.0 - p) - 1e-12;
            let hi = p.max(1.0 - p) + 1e-12;
            prop_assert!(q >= lo && q <= hi, "q = {} outside [{}, {}]", q, lo, hi);
        }

        #[test]
        fn abs_trajectory_parity_and_reachability(p in 0.05f64..0.95, seed in 0u64..500) {
            let traj = simulate_abs_erw(p, 200, &mut stream(seed));
            for (n, &z) in traj.positions.iter().enumerate() {
                prop_assert!(z >= 0);
                prop_assert!(z <= n as i64);
                prop_assert_eq!((z % 2) as u64, (n as u64) % 2);
            }
        }

        #[test]
        fn signed_trajectories_take_unit_steps(p in 0.05f64..0.95, seed in 0u64..200) {
            for rep in [Representation::Memory, Representation::Urn] {
                let traj = WalkParams::new(p, rep).unwrap().simulate(150, &mut stream(seed));
                for w in traj.positions.windows(2) {
                    prop_assert_eq!((w[1] - w[0]).abs(), 1);
                }
            }
        }
    }
}
