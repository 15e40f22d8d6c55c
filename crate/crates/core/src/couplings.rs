//! Pathwise couplings between the absolute-value ERW and comparison walks,
//! all driven by one shared uniform stream.
//!
//! Three constructions are provided:
//!
//! * **Dominance**: ERW and reflected SRW read the same uniform at every
//!   step. For p >= 1/2 the ERW threshold is >= 1/2 whenever the state is
//!   positive, so the ERW dominates the SRW pathwise (and is dominated for
//!   p <= 1/2). The same-parity argument makes any crossing a hard bug, so
//!   violations are errors, not statistics.
//! * **Shifted**: for p < 1/2, a reflected SRW is started at the ERW's
//!   position at time d*N^2 and driven by the subsequent uniforms. The gap
//!   between the two grows by 2 exactly when the shared uniform lands in the
//!   window [erw threshold, 1/2), which the distance process counts; the
//!   companion minus twice that count never exceeds the ERW.
//! * **Asymmetric**: for 1/2 < p < 3/4, once the ERW sits at A*N after time
//!   c*N^2 its up-threshold stays below p_N = 1/2 + 2(2p-1)A/(cN) while it
//!   remains in [0, 2AN], so an asymmetric walk with up-probability p_N
//!   started at the same point dominates it until either walk is absorbed at
//!   {0, 2AN}.

use crate::rng::UniformStream;
use crate::walks::{kernel_up, step_reflected_srw, validate_memory};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    Dominance,
    Shifted,
    Asymmetric,
}

/// Synchronized pair of paths plus the distance diagnostics, retained only
/// when a caller asks for a full trace (replay dumps); bulk Monte Carlo runs
/// keep summaries only.
#[derive(Clone, Debug)]
pub struct CoupledTrace {
    pub mode: CouplingMode,
    /// d*N^2 for the shifted coupling, 0 otherwise.
    pub shift_offset: u64,
    pub erw: Vec<i64>,
    pub companion: Vec<i64>,
    /// Companion-step indices whose uniform fell in the discrepancy window.
    pub distance_events: Vec<u64>,
    pub uniforms_consumed: u64,
}

/// The non-decreasing distance process D_k: twice the running count of
/// discrepancy-window events, recorded per companion step.
#[derive(Clone, Debug)]
pub struct DistanceProcess {
    pub values: Vec<u64>,
}

impl DistanceProcess {
    pub fn final_value(&self) -> u64 {
        *self.values.last().unwrap_or(&0)
    }
}

fn violation(what: &'static str, step: u64, erw: i64, companion: i64) -> Error {
    Error::CouplingViolation {
        what,
        step,
        erw,
        companion,
    }
}

#[derive(Clone, Debug)]
pub struct DominanceOutcome {
    /// D_horizon = 2 * (number of discrepancy events).
    pub final_distance: u64,
    pub trace: Option<CoupledTrace>,
}

/// Runs the shared-uniform coupling of the absolute-value ERW against the
/// reflected SRW for `horizon` steps. Both walks consume exactly the same
/// uniform at every step. Verified pathwise, per step:
///
/// * p >= 1/2: erw >= companion and erw <= companion + D,
/// * p <= 1/2: erw <= companion and companion <= erw + D.
pub fn run_dominance_coupling(
    p: f64,
    horizon: u64,
    stream: &mut UniformStream,
    record_trace: bool,
) -> Result<DominanceOutcome> {
    validate_memory(p)?;
    let start_draws = stream.draws_consumed();
    let mut z = 0i64;
    let mut s = 0i64;
    let mut events: u64 = 0;
    let mut trace = record_trace.then(|| CoupledTrace {
        mode: CouplingMode::Dominance,
        shift_offset: 0,
        erw: vec![0],
        companion: vec![0],
        distance_events: Vec::new(),
        uniforms_consumed: 0,
    });
    for k in 1..=horizon {
        let u = stream.next_uniform();
        let threshold = if z == 0 {
            f64::NAN
        } else {
            kernel_up(p, k - 1, z)
        };
        if z != 0 {
            let in_window = if p > 0.5 {
                (0.5..threshold).contains(&u)
            } else {
                (threshold..0.5).contains(&u)
            };
            if in_window {
                events += 1;
                if let Some(t) = trace.as_mut() {
                    t.distance_events.push(k);
                }
            }
        }
        z = if z == 0 {
            1
        } else if u < threshold {
            z + 1
        } else {
            z - 1
        };
        s = step_reflected_srw(s, u);
        if p >= 0.5 {
            if z < s {
                return Err(violation("erw >= srw dominance", k, z, s));
            }
            if z > s + 2 * events as i64 {
                return Err(violation("erw <= srw + distance", k, z, s));
            }
        }
        if p <= 0.5 {
            if z > s {
                return Err(violation("erw <= srw dominance", k, z, s));
            }
            if s > z + 2 * events as i64 {
                return Err(violation("srw <= erw + distance", k, z, s));
            }
        }
        if let Some(t) = trace.as_mut() {
            t.erw.push(z);
            t.companion.push(s);
        }
    }
    if let Some(t) = trace.as_mut() {
        t.uniforms_consumed = stream.draws_consumed() - start_draws;
    }
    Ok(DominanceOutcome {
        final_distance: 2 * events,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct ShiftedOutcome {
    pub shift_offset: u64,
    /// Final distance D_horizon between companion and ERW.
    pub final_distance: u64,
    /// Hits of the fixed window [1/2 - (1-2p)/(dN), 1/2) over the first
    /// `window_steps` companion steps: a literal Binomial(12 N^2, (1-2p)/(dN))
    /// counter when the horizon covers all 12 N^2 of them.
    pub window_hits: u64,
    pub window_steps: u64,
    pub distance: Option<DistanceProcess>,
    pub trace: Option<CoupledTrace>,
}

/// Runs the shifted coupling for p < 1/2: the ERW evolves alone for d*N^2
/// steps, then a reflected SRW starts from the ERW's current position and
/// both consume the same uniforms. Verified pathwise, per companion step k:
///
/// * companion_k - D_k <= erw_(dN^2+k) (distance-corrected lower bound),
/// * erw_(dN^2+k) <= companion_k (reversed dominance).
pub fn run_shifted_coupling(
    p: f64,
    n_barrier: u64,
    d: u64,
    horizon: u64,
    stream: &mut UniformStream,
    record_trace: bool,
) -> Result<ShiftedOutcome> {
    validate_memory(p)?;
    if !(p < 0.5) {
        return Err(Error::InvalidParam(format!(
            "shifted coupling requires p < 1/2, got {p}"
        )));
    }
    if d < 1 || n_barrier < 1 {
        return Err(Error::InvalidParam("need d >= 1 and N >= 1".into()));
    }
    let start_draws = stream.draws_consumed();
    let shift = d * n_barrier * n_barrier;
    let mut z = 0i64;
    let mut erw_path = record_trace.then(|| vec![0i64]);
    for k in 1..=shift {
        let u = stream.next_uniform();
        z = if z == 0 {
            1
        } else if u < kernel_up(p, k - 1, z) {
            z + 1
        } else {
            z - 1
        };
        if let Some(path) = erw_path.as_mut() {
            path.push(z);
        }
    }

    let mut s = z;
    let mut events: u64 = 0;
    let window_steps = horizon.min(12 * n_barrier * n_barrier);
    let window_lo = 0.5 + (2.0 * p - 1.0) / ((d * n_barrier) as f64);
    let mut window_hits: u64 = 0;
    let mut distance = record_trace.then(|| DistanceProcess { values: vec![0] });
    let mut companion_path = record_trace.then(|| vec![s]);
    let mut event_steps = record_trace.then(Vec::new);
    for k in 1..=horizon {
        let u = stream.next_uniform();
        let global = shift + k;
        let threshold = if z == 0 {
            f64::NAN
        } else {
            kernel_up(p, global - 1, z)
        };
        if z != 0 && (threshold..0.5).contains(&u) {
            events += 1;
            if let Some(steps) = event_steps.as_mut() {
                steps.push(k);
            }
        }
        if k <= window_steps && (window_lo..0.5).contains(&u) {
            window_hits += 1;
        }
        z = if z == 0 {
            1
        } else if u < threshold {
            z + 1
        } else {
            z - 1
        };
        s = step_reflected_srw(s, u);
        let d_k = 2 * events as i64;
        if s - d_k > z {
            return Err(violation("srw - distance <= erw (shifted)", k, z, s));
        }
        if z > s {
            return Err(violation("erw <= srw (shifted)", k, z, s));
        }
        if let Some(path) = erw_path.as_mut() {
            path.push(z);
        }
        if let Some(path) = companion_path.as_mut() {
            path.push(s);
        }
        if let Some(proc) = distance.as_mut() {
            proc.values.push(2 * events);
        }
    }

    let trace = record_trace.then(|| CoupledTrace {
        mode: CouplingMode::Shifted,
        shift_offset: shift,
        erw: erw_path.unwrap(),
        companion: companion_path.unwrap(),
        distance_events: event_steps.unwrap(),
        uniforms_consumed: stream.draws_consumed() - start_draws,
    });
    Ok(ShiftedOutcome {
        shift_offset: shift,
        final_distance: 2 * events,
        window_hits,
        window_steps,
        distance,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct AsymOutcome {
    /// Time at which the ERW first sat at A*N at or after c*N^2; None when
    /// the activation cap was hit first (the replicate is censored).
    pub activated_at: Option<u64>,
    /// Both walks reached {0, 2AN} before the step cap.
    pub resolved: bool,
    /// ERW returned to 0 before reaching 2AN.
    pub erw_hit_zero: bool,
    /// Companion asymmetric walk hit 0 before 2AN.
    pub companion_hit_zero: bool,
    /// Up-probability of the companion walk.
    pub companion_up_probability: f64,
    pub trace: Option<CoupledTrace>,
}

/// Runs the ERW / asymmetric-walk coupling for 1/2 < p < 3/4. The coupling
/// activates when the ERW first sits at A*N at a time >= c*N^2; from there,
/// both walks share uniforms until each is absorbed at {0, 2AN}. While both
/// are interior the companion dominates the ERW pathwise, and the ERW's
/// up-threshold never exceeds the companion's up-probability.
pub fn run_asym_coupling(
    p: f64,
    a_scale: u64,
    n_barrier: u64,
    c_time: f64,
    max_steps: u64,
    stream: &mut UniformStream,
    record_trace: bool,
) -> Result<AsymOutcome> {
    validate_memory(p)?;
    if !(p > 0.5 && p < 0.75) {
        return Err(Error::InvalidParam(format!(
            "asymmetric coupling requires 1/2 < p < 3/4, got {p}"
        )));
    }
    if a_scale < 1 || n_barrier < 1 || !(c_time > 0.0) {
        return Err(Error::InvalidParam("need A >= 1, N >= 1, c > 0".into()));
    }
    let drift = 2.0 * (2.0 * p - 1.0) * a_scale as f64 / (c_time * n_barrier as f64);
    if !(drift < 0.5) {
        return Err(Error::InvalidParam(format!(
            "N = {n_barrier} too small: 2(2p-1)A/(cN) = {drift} must be < 1/2"
        )));
    }
    let start_draws = stream.draws_consumed();
    let p_n = 0.5 + drift;
    let target = (a_scale * n_barrier) as i64;
    let upper = 2 * target;
    let activation_min = (c_time * (n_barrier * n_barrier) as f64).ceil() as u64;

    let mut z = 0i64;
    let mut k = 0u64;
    let activated_at = loop {
        if k >= activation_min && z == target {
            break Some(k);
        }
        if k >= max_steps {
            break None;
        }
        let u = stream.next_uniform();
        k += 1;
        z = if z == 0 {
            1
        } else if u < kernel_up(p, k - 1, z) {
            z + 1
        } else {
            z - 1
        };
    };
    let Some(t0) = activated_at else {
        return Ok(AsymOutcome {
            activated_at: None,
            resolved: false,
            erw_hit_zero: false,
            companion_hit_zero: false,
            companion_up_probability: p_n,
            trace: None,
        });
    };

    let mut y = target;
    let mut trace = record_trace.then(|| CoupledTrace {
        mode: CouplingMode::Asymmetric,
        shift_offset: 0,
        erw: vec![z],
        companion: vec![y],
        distance_events: Vec::new(),
        uniforms_consumed: 0,
    });
    let mut z_done = false;
    let mut y_done = false;
    let mut resolved = true;
    while !(z_done && y_done) {
        if k >= t0 + max_steps {
            resolved = false;
            break;
        }
        let u = stream.next_uniform();
        k += 1;
        if !z_done {
            let threshold = if z == 0 {
                f64::NAN
            } else {
                kernel_up(p, k - 1, z)
            };
            if z != 0 {
                // The whole construction rests on the ERW threshold staying
                // below the companion's up-probability in the active window.
                if threshold > p_n {
                    return Err(violation("erw threshold <= p_N", k, z, y));
                }
            }
            z = if z == 0 {
                1
            } else if u < threshold {
                z + 1
            } else {
                z - 1
            };
            if z == 0 || z == upper {
                z_done = true;
            }
        }
        if !y_done {
            y = if u < p_n { y + 1 } else { y - 1 };
            if y == 0 || y == upper {
                y_done = true;
            }
        }
        if !z_done && !y_done && z > y {
            return Err(violation("erw <= asym companion", k, z, y));
        }
        if let Some(t) = trace.as_mut() {
            t.erw.push(z);
            t.companion.push(y);
        }
    }
    if let Some(t) = trace.as_mut() {
        t.uniforms_consumed = stream.draws_consumed() - start_draws;
    }
    Ok(AsymOutcome {
        activated_at: Some(t0),
        resolved,
        erw_hit_zero: resolved && z == 0,
        companion_hit_zero: resolved && y == 0,
        companion_up_probability: p_n,
        trace,
    })
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicates: u64,
}

/// Estimates E[D_k], the expected distance between the coupled ERW and SRW
/// after k shared steps, from independent dominance-coupling replicates.
pub fn measure_distance_moment(
    p: f64,
    k: u64,
    replicates: u64,
    master_seed: u64,
    threads: crate::exec::Threads,
) -> Result<MomentEstimate> {
    validate_memory(p)?;
    if k < 1 || replicates < 2 {
        return Err(Error::InvalidParam(
            "need k >= 1 and replicates >= 2".into(),
        ));
    }
    let outcomes = crate::exec::map_replicates(replicates, threads, |r| {
        let mut stream =
            crate::rng::StreamKey::new(master_seed, r, crate::rng::StreamPurpose::WalkDriver)
                .derive();
        run_dominance_coupling(p, k, &mut stream, false).map(|o| o.final_distance as f64)
    });
    let values = outcomes.into_iter().collect::<Result<Vec<f64>>>()?;
    let (mean, var) = crate::stats::mean_variance(&values);
    Ok(MomentEstimate {
        mean,
        std_error: (var / replicates as f64).sqrt(),
        replicates,
    })
}
