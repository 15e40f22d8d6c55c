//! CSV and JSON emission. All output is a pure function of the data, with no
//! timestamps or environment state, so report files are byte-identical across
//! reruns and thread counts.

use crate::couplings::CoupledTrace;
use crate::exact::SurvivalCurve;
use crate::walks::Trajectory;
use crate::Result;
use std::fmt::Write as _;
use std::path::Path;

/// `t,survival` rows, one per grid point.
pub fn survival_csv(curve: &SurvivalCurve) -> String {
    let mut out = String::with_capacity(16 * curve.times.len() + 16);
    out.push_str("t,survival\n");
    for (&t, &s) in curve.times.iter().zip(&curve.survival) {
        writeln!(out, "{t},{s}").unwrap();
    }
    out
}

pub fn write_survival_csv(path: &Path, curve: &SurvivalCurve) -> Result<()> {
    std::fs::write(path, survival_csv(curve))?;
    Ok(())
}

/// `k,erw,companion,distance` rows indexed by companion step. For the shifted
/// coupling the ERW column is read at `shift_offset + k`, i.e. the two
/// columns show the walks at the times the coupling actually compares.
pub fn trace_csv(trace: &CoupledTrace) -> String {
    let steps = trace.companion.len();
    let mut out = String::with_capacity(24 * steps + 32);
    out.push_str("k,erw,companion,distance\n");
    let mut event_idx = 0usize;
    for k in 0..steps {
        while event_idx < trace.distance_events.len()
            && trace.distance_events[event_idx] <= k as u64
        {
            event_idx += 1;
        }
        let erw = trace.erw[trace.shift_offset as usize + k];
        let companion = trace.companion[k];
        writeln!(out, "{k},{erw},{companion},{}", 2 * event_idx).unwrap();
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &CoupledTrace) -> Result<()> {
    std::fs::write(path, trace_csv(trace))?;
    Ok(())
}

/// `k,position` rows for a single walk.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(12 * traj.positions.len() + 16);
    out.push_str("k,position\n");
    for (k, &z) in traj.positions.iter().enumerate() {
        writeln!(out, "{k},{z}").unwrap();
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    std::fs::write(path, trajectory_csv(traj))?;
    Ok(())
}

/// Pretty JSON plus a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    std::fs::write(path, body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_survival;

    #[test]
    fn survival_csv_has_header_and_rows() {
        let curve = exact_survival(2, 0.5, 3).unwrap();
        let csv = survival_csv(&curve);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,survival");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,1");
        assert_eq!(lines[3], "2,0.5");
    }

    #[test]
    fn trace_csv_counts_cumulative_distance() {
        let trace = CoupledTrace {
            mode: crate::couplings::CouplingMode::Dominance,
            shift_offset: 0,
            erw: vec![0, 1, 2, 1],
            companion: vec![0, 1, 0, 1],
            distance_events: vec![2],
            uniforms_consumed: 3,
        };
        let csv = trace_csv(&trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,erw,companion,distance");
        assert_eq!(lines[1], "0,0,0,0");
        assert_eq!(lines[3], "2,2,0,2");
        assert_eq!(lines[4], "3,1,1,2");
    }
}
