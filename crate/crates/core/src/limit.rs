//! Sampling of the limiting Gaussian process of the diffusive regime and of
//! its hitting time nu of +-1, whose mean is the limit of E[tau_N] / N^2.
//!
//! The process W has W_0 = 0, mean zero, and covariance
//!
//! ```text
//! E[W_s W_t] = s / (3 - 4p) * (t/s)^(2p-1),   0 < s <= t,  p < 3/4.
//! ```
//!
//! Paths are sampled on a uniform grid t_i = i*h by factoring the grid
//! covariance matrix (dense Cholesky, computed once and shared read-only
//! across replicates) and multiplying the factor into standard normal vectors
//! obtained from the uniform streams by inverse CDF. Crossing detection is
//! grid-based; its upward bias is controlled by grid-refinement studies, not
//! by bridge corrections.

use crate::exec::Threads;
use crate::rng::{StreamKey, StreamPurpose, UniformStream};
use crate::stats::standard_normal_quantile;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense factorization is O(m^3); larger grids are rejected rather than
/// silently taking hours.
pub const MAX_GRID_POINTS: usize = 16_384;

/// Diagonal jitter escalation ladder used when the factorization of a
/// near-singular grid fails; anything beyond the last entry is an error.
const JITTERS: [f64; 4] = [0.0, 1e-12, 1e-11, 1e-10];

/// Covariance of the limit process at 0 < s <= t.
pub fn covariance(p: f64, s: f64, t: f64) -> f64 {
    debug_assert!(0.0 < s && s <= t);
    s / (3.0 - 4.0 * p) * (t / s).powf(2.0 * p - 1.0)
}

/// Default sampling horizon: censoring P(nu > T) is below 1e-3 here. The
/// process variance at time t is t/(3-4p), so the natural time scale is
/// proportional to (3 - 4p).
pub fn default_t_max(p: f64) -> f64 {
    (7.0 * (3.0 - 4.0 * p)).ceil().max(4.0)
}

/// Uniform time grid on (0, T] with the Cholesky factor of the covariance.
#[derive(Clone, Debug)]
pub struct GaussianGrid {
    pub p: f64,
    pub spacing: f64,
    pub t_max: f64,
    pub times: Vec<f64>,
    /// Lower-triangular factor, packed rows: row i holds columns 0..=i.
    chol: Vec<Vec<f64>>,
    /// Diagonal jitter that was needed for the factorization (usually 0).
    pub jitter: f64,
}

impl GaussianGrid {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Row i of the factor (columns 0..=i).
    pub fn factor_row(&self, i: usize) -> &[f64] {
        &self.chol[i]
    }
}

/// Builds the grid t_i = i*h for i = 1..=round(T/h) and factors the
/// covariance matrix, escalating through the jitter ladder if needed.
pub fn build_covariance(p: f64, t_max: f64, h: f64) -> Result<GaussianGrid> {
    if !(p > 0.0 && p < 0.75) {
        return Err(Error::InvalidParam(format!(
            "limit process requires 0 < p < 3/4, got {p}"
        )));
    }
    if !(h > 0.0 && h < t_max) {
        return Err(Error::InvalidParam(format!(
            "need 0 < h < T, got h = {h}, T = {t_max}"
        )));
    }
    let m = (t_max / h).round() as usize;
    if m < 2 {
        return Err(Error::InvalidParam("grid has fewer than 2 points".into()));
    }
    if m > MAX_GRID_POINTS {
        return Err(Error::InvalidParam(format!(
            "grid of {m} points exceeds the {MAX_GRID_POINTS}-point cap; coarsen h or shrink T"
        )));
    }
    let times: Vec<f64> = (1..=m).map(|i| i as f64 * h).collect();
    // K[i][j] = g[i] * f[j] for j <= i, with f carrying the 1/(3-4p) scale.
    let g: Vec<f64> = times.iter().map(|&t| t.powf(2.0 * p - 1.0)).collect();
    let f: Vec<f64> = times
        .iter()
        .map(|&t| t.powf(2.0 - 2.0 * p) / (3.0 - 4.0 * p))
        .collect();
    for &jitter in &JITTERS {
        let mut rows: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row: Vec<f64> = (0..=i).map(|j| g[i] * f[j]).collect();
                row[i] += jitter;
                row
            })
            .collect();
        if cholesky_in_place(&mut rows).is_ok() {
            return Ok(GaussianGrid {
                p,
                spacing: h,
                t_max,
                times,
                chol: rows,
                jitter,
            });
        }
    }
    Err(Error::Numeric(format!(
        "covariance factorization failed for p = {p}, h = {h}, T = {t_max} \
         even with diagonal jitter {}",
        JITTERS[JITTERS.len() - 1]
    )))
}

const BLOCK: usize = 128;

/// In-place blocked Cholesky on packed lower-triangular rows. Returns the
/// failing pivot index if the matrix is not numerically positive definite.
/// The trailing update parallelizes over rows with each element written by
/// exactly one task in a fixed order, so the result is bit-identical for any
/// thread count.
pub(crate) fn cholesky_in_place(rows: &mut [Vec<f64>]) -> std::result::Result<(), usize> {
    let n = rows.len();
    let mut k0 = 0usize;
    while k0 < n {
        let kb = BLOCK.min(n - k0);
        let t0 = k0 + kb;
        // Factor the diagonal block; previous trailing updates already folded
        // in all columns < k0.
        for i in k0..t0 {
            let (head, tail) = rows.split_at_mut(i);
            let row_i = &mut tail[0];
            for j in k0..=i {
                let mut sum = row_i[j];
                if j > k0 {
                    let (a, b) = if j < i {
                        (&row_i[k0..j], &head[j][k0..j])
                    } else {
                        // diagonal: dot the row with itself
                        (&row_i[k0..j], &row_i[k0..j])
                    };
                    sum -= dot(a, b);
                }
                if j < i {
                    row_i[j] = sum / head[j][j];
                } else {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(i);
                    }
                    row_i[i] = sum.sqrt();
                }
            }
        }
        // Panel solve + trailing update for rows below the block.
        let (head, tail) = rows.split_at_mut(t0);
        let diag = &head[k0..t0];
        for_each_row(tail, |_, row| {
            for j in k0..t0 {
                let mut sum = row[j];
                if j > k0 {
                    sum -= dot(&row[k0..j], &diag[j - k0][k0..j]);
                }
                row[j] = sum / diag[j - k0][j];
            }
        });
        // Copy the freshly solved panels into a flat scratch so the trailing
        // update can read other rows' panels while mutating its own row.
        let n_t = tail.len();
        let mut scratch = vec![0.0f64; n_t * kb];
        for (r, row) in tail.iter().enumerate() {
            scratch[r * kb..(r + 1) * kb].copy_from_slice(&row[k0..t0]);
        }
        let scratch = &scratch;
        for_each_row(tail, |r, row| {
            let panel_i = &scratch[r * kb..(r + 1) * kb];
            for j in t0..=(t0 + r) {
                let panel_j = &scratch[(j - t0) * kb..(j - t0 + 1) * kb];
                row[j] -= dot(panel_i, panel_j);
            }
        });
        k0 = t0;
    }
    Ok(())
}

/// Dot product with four independent accumulators so the compiler can keep
/// the multiply-add pipeline full; the summation order is fixed, so results
/// are bit-identical run to run.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        acc[0] += xa[0] * xb[0];
        acc[1] += xa[1] * xb[1];
        acc[2] += xa[2] * xb[2];
        acc[3] += xa[3] * xb[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(feature = "parallel")]
fn for_each_row<F>(rows: &mut [Vec<f64>], f: F)
where
    F: Fn(usize, &mut Vec<f64>) + Sync,
{
    use rayon::prelude::*;
    rows.par_iter_mut()
        .enumerate()
        .for_each(|(r, row)| f(r, row));
}

#[cfg(not(feature = "parallel"))]
fn for_each_row<F>(rows: &mut [Vec<f64>], f: F)
where
    F: Fn(usize, &mut Vec<f64>) + Sync,
{
    rows.iter_mut().enumerate().for_each(|(r, row)| f(r, row));
}

/// One sampled path, reduced to its hitting information.
#[derive(Clone, Copy, Debug)]
pub struct LimitSample {
    /// First grid time with |W| >= 1; None when the path never crossed by T.
    pub nu: Option<f64>,
    pub crossing_index: Option<usize>,
}

/// Samples W along the grid until the first crossing of +-1 (or the end of
/// the grid). Standard normals come from the stream by inverse CDF; the path
/// value at grid point i is the dot product of factor row i with the normals
/// drawn so far, so the computation stops as soon as the crossing is found.
pub fn sample_hitting_time(grid: &GaussianGrid, stream: &mut UniformStream) -> LimitSample {
    let mut z: Vec<f64> = Vec::with_capacity(64);
    for i in 0..grid.len() {
        z.push(standard_normal_quantile(stream.next_uniform()));
        let w = dot(grid.factor_row(i), &z);
        if w.abs() >= 1.0 {
            return LimitSample {
                nu: Some(grid.times[i]),
                crossing_index: Some(i),
            };
        }
    }
    LimitSample {
        nu: None,
        crossing_index: None,
    }
}

/// Samples the full path W over the grid (no early exit); used for
/// distributional checks of the sampler itself.
pub fn sample_path(grid: &GaussianGrid, stream: &mut UniformStream) -> Vec<f64> {
    let m = grid.len();
    let z: Vec<f64> = (0..m)
        .map(|_| standard_normal_quantile(stream.next_uniform()))
        .collect();
    (0..m).map(|i| dot(grid.factor_row(i), &z[..=i])).collect()
}

/// Estimate of theta = E[nu] from the limit process.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitThetaReport {
    pub p: f64,
    pub h: f64,
    #[serde(rename = "T")]
    pub t_max: f64,
    pub replicates: u64,
    pub theta_hat: f64,
    /// 99% half-width of theta_hat.
    pub ci: f64,
    pub censored_fraction: f64,
    pub jitter: f64,
}

/// Builds the grid once and estimates E[nu] over independent replicates.
/// Censored paths (no crossing by T) enter the mean at T, biasing it low by
/// at most the censored fraction times the discarded tail; keep the fraction
/// below 1e-3 by choosing T generously (see [`default_t_max`]).
pub fn estimate_theta_limit(
    p: f64,
    h: f64,
    t_max: f64,
    replicates: u64,
    master_seed: u64,
    threads: Threads,
) -> Result<LimitThetaReport> {
    if replicates < 2 {
        return Err(Error::InvalidParam("need at least 2 replicates".into()));
    }
    let grid = build_covariance(p, t_max, h)?;
    let grid_ref = &grid;
    let nus = crate::exec::map_replicates(replicates, threads, move |r| {
        let mut stream = StreamKey::new(master_seed, r, StreamPurpose::LimitProcess).derive();
        sample_hitting_time(grid_ref, &mut stream).nu
    });
    let censored = nus.iter().filter(|nu| nu.is_none()).count() as u64;
    let values: Vec<f64> = nus.into_iter().map(|nu| nu.unwrap_or(t_max)).collect();
    let (mean, var) = crate::stats::mean_variance(&values);
    Ok(LimitThetaReport {
        p,
        h,
        t_max,
        replicates,
        theta_hat: mean,
        ci: crate::stats::z_for_confidence(0.99) * (var / replicates as f64).sqrt(),
        censored_fraction: censored as f64 / replicates as f64,
        jitter: grid.jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(rep: u64) -> UniformStream {
        StreamKey::new(5, rep, StreamPurpose::LimitProcess).derive()
    }

    #[test]
    fn brownian_covariance_is_min() {
        for (s, t) in [(0.5, 1.0), (0.25, 0.25), (1.0, 4.0)] {
            assert!((covariance(0.5, s, t) - s).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_matches_closed_form() {
        let mut s = stream(0);
        for _ in 0..10 {
            let p = 0.05 + 0.65 * s.next_uniform();
            let t = 0.1 + 10.0 * s.next_uniform();
            let got = covariance(p, t, t);
            assert!((got - t / (3.0 - 4.0 * p)).abs() < 1e-12 * got.abs().max(1.0));
        }
    }

    #[test]
    fn factor_reconstructs_covariance() {
        for &p in &[0.25, 0.5, 0.7] {
            let grid = build_covariance(p, 3.0, 0.01).unwrap();
            assert_eq!(grid.jitter, 0.0);
            let m = grid.len();
            let mut worst = 0.0f64;
            for i in 0..m {
                for j in 0..=i {
                    let mut acc = 0.0;
                    for k in 0..=j {
                        acc += grid.factor_row(i)[k] * grid.factor_row(j)[k];
                    }
                    let expect = covariance(p, grid.times[j], grid.times[i]);
                    worst = worst.max((acc - expect).abs());
                }
            }
            assert!(worst < 1e-8, "reconstruction residual {worst} for p = {p}");
        }
    }

    #[test]
    fn cholesky_matches_reference_on_small_matrix() {
        // A = L L^T with a hand-picked L.
        let l = [
            vec![2.0],
            vec![0.5, 1.5],
            vec![-1.0, 0.25, 3.0],
            vec![0.1, -0.2, 0.3, 0.7],
        ];
        let mut a: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        (0..=j)
                            .map(|k| l[i].get(k).copied().unwrap_or(0.0) * l[j][k])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        cholesky_in_place(&mut a).unwrap();
        for i in 0..4 {
            for j in 0..=i {
                assert!((a[i][j] - l[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let mut a = vec![vec![1.0], vec![2.0, 1.0]]; // [[1,2],[2,1]] is indefinite
        assert_eq!(cholesky_in_place(&mut a), Err(1));
    }

    #[test]
    fn build_rejects_bad_inputs() {
        assert!(build_covariance(0.75, 1.0, 0.01).is_err());
        assert!(build_covariance(0.5, 1.0, 2.0).is_err());
        assert!(build_covariance(0.5, 100.0, 1e-4).is_err()); // over the cap
    }

    #[test]
    fn sampler_consumes_normals_lazily() {
        let grid = build_covariance(0.5, 4.0, 0.05).unwrap();
        let mut s = stream(1);
        let sample = sample_hitting_time(&grid, &mut s);
        if let Some(idx) = sample.crossing_index {
            assert_eq!(s.draws_consumed(), idx as u64 + 1);
        } else {
            assert_eq!(s.draws_consumed(), grid.len() as u64);
        }
    }

    #[test]
    fn hitting_time_is_on_grid_or_censored() {
        let grid = build_covariance(0.7, 2.0, 0.02).unwrap();
        for rep in 0..100 {
            let sample = sample_hitting_time(&grid, &mut stream(rep));
            if let Some(nu) = sample.nu {
                assert!(grid.times.contains(&nu));
            }
        }
    }
}
