//! Time-domain direct sampling: the indicator functional on the sampling
//! grid, the total-focusing baseline, multiplicative Gaussian noise
//! injection, and peak extraction.
//!
//! The indicator at a sampling point `z` is
//! `I(z) = (T/N_t) sum_n | (w/N_s) sum_m E^s(x_m, t_n + |x_m-z|/c0)
//! e^{-sigma (t_n + |x_m-z|/c0)} / (4 pi |x_m-z|) |^2`,
//! with `w = 2 pi R` (2D) or `4 pi R^2` (3D); vector traces sum the squared
//! modulus over components. Scatterer locations show up as local maxima.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

use crate::forward::TraceSet;
use crate::scene::{dist, Point, ReceiverArray, SamplingGrid};

/// Minimum sampling-point clearance from a receiver (singular kernel).
pub const RECEIVER_CLEARANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("imaging horizon T = {requested:.3e} s exceeds the recorded duration {recorded:.3e} s")]
    DurationExceedsRecord { requested: f64, recorded: f64 },
    #[error("imaging horizon T = {0:.3e} s is shorter than one trace step")]
    DurationTooShort(f64),
    #[error("grid dimension {grid} does not match receiver layout dimension {receivers}")]
    DimensionMismatch { grid: usize, receivers: usize },
    #[error("sampling point {point} lies within {RECEIVER_CLEARANCE} m of receiver {receiver}")]
    PointTooCloseToReceiver { point: usize, receiver: usize },
    #[error("noise level delta must be nonnegative, got {0}")]
    NegativeDelta(f64),
    #[error("relative threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error("cannot normalize an all-zero indicator grid")]
    ZeroGrid,
}

/// Indicator values on a sampling grid, with the imaging parameters that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorGrid {
    pub grid: SamplingGrid,
    /// One nonnegative value per grid point, x fastest.
    pub values: Vec<f64>,
    pub sigma: f64,
    pub t_final: f64,
    /// Free-form provenance tag (method, noise, trace origin).
    pub provenance: String,
}

impl IndicatorGrid {
    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Grid point of the global maximum.
    pub fn argmax(&self) -> Point {
        let (l, _) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("indicator grid is never empty");
        self.grid.point(l)
    }
}

/// Split a fractional sample index into an integer node and interpolation
/// weight, snapping roundoff jitter near the nodes so exact node times hit
/// the stored sample.
fn split_sample_index(fi: f64) -> (usize, f64) {
    let mut n0 = fi.floor() as usize;
    let mut frac = fi - n0 as f64;
    if frac < 1e-9 {
        frac = 0.0;
    } else if frac > 1.0 - 1e-9 {
        n0 += 1;
        frac = 0.0;
    }
    (n0, frac)
}

/// Linearly interpolated trace sample at an arbitrary delayed time: zero
/// before the record starts and after it ends.
pub fn sample_trace_delayed(traces: &TraceSet, m: usize, t: f64, component: usize) -> f64 {
    if t < 0.0 || t > traces.duration() {
        return 0.0;
    }
    let (n0, frac) = split_sample_index(t / traces.dt);
    let n0 = n0.min(traces.n_samples() - 1);
    if frac == 0.0 || n0 + 1 == traces.n_samples() {
        return traces.value(m, n0, component);
    }
    (1.0 - frac) * traces.value(m, n0, component) + frac * traces.value(m, n0 + 1, component)
}

/// Per-receiver retarded-sampling plan shared by one sampling point: the
/// delayed time grid `t_n + delay_m` splits into an integer shift plus a
/// constant fractional interpolation weight.
struct ReceiverPlan {
    coef: f64,
    shift: usize,
    w0: f64,
    w1: f64,
}

fn receiver_plans(
    traces: &TraceSet,
    receivers: &ReceiverArray,
    z: &Point,
    sigma: f64,
    c0: f64,
    point_index: usize,
) -> Result<Vec<ReceiverPlan>, ImagingError> {
    let wm = receivers.surface_weight() / receivers.len() as f64;
    receivers
        .positions
        .iter()
        .enumerate()
        .map(|(m, x)| {
            let d = dist(x, z);
            if d < RECEIVER_CLEARANCE {
                return Err(ImagingError::PointTooCloseToReceiver {
                    point: point_index,
                    receiver: m,
                });
            }
            let delay = d / c0;
            let coef = wm * (-sigma * delay).exp() / (4.0 * PI * d);
            let (shift, w1) = split_sample_index(delay / traces.dt);
            Ok(ReceiverPlan {
                coef,
                shift,
                w0: 1.0 - w1,
                w1,
            })
        })
        .collect()
}

/// Time-domain direct sampling indicator on the full grid.
///
/// `t_final` must not exceed the recorded duration; the time sum runs over
/// the `N_t + 1` samples in `[0, t_final]` with the quadrature factor
/// `t_final / N_t`. Sampling points are evaluated independently (in
/// parallel) against the shared read-only traces.
pub fn time_indicator(
    traces: &TraceSet,
    receivers: &ReceiverArray,
    grid: &SamplingGrid,
    sigma: f64,
    c0: f64,
    t_final: f64,
) -> Result<IndicatorGrid, ImagingError> {
    let (n_t, dt) = imaging_steps(traces, t_final)?;
    if grid.dim != receivers.dim() {
        return Err(ImagingError::DimensionMismatch {
            grid: grid.dim,
            receivers: receivers.dim(),
        });
    }
    let values: Result<Vec<f64>, ImagingError> = (0..grid.n_points())
        .into_par_iter()
        .map(|l| {
            let z = grid.point(l);
            let plans = receiver_plans(traces, receivers, &z, sigma, c0, l)?;
            let mut scratch = vec![0.0; n_t + 1];
            let mut acc = 0.0;
            let nc = traces.n_components();
            let ns = traces.n_samples();
            for c in 0..nc {
                scratch.fill(0.0);
                for (m, plan) in plans.iter().enumerate() {
                    for (n, slot) in scratch.iter_mut().enumerate() {
                        let idx = n + plan.shift;
                        let v = if idx + 1 < ns {
                            plan.w0 * traces.value(m, idx, c)
                                + plan.w1 * traces.value(m, idx + 1, c)
                        } else if idx + 1 == ns && plan.w1 == 0.0 {
                            plan.w0 * traces.value(m, idx, c)
                        } else {
                            0.0
                        };
                        *slot += plan.coef * v;
                    }
                }
                for (n, &s) in scratch.iter().enumerate() {
                    let damped = (-sigma * (n as f64 * dt)).exp() * s;
                    acc += damped * damped;
                }
            }
            Ok(acc * (t_final / n_t as f64))
        })
        .collect();
    Ok(IndicatorGrid {
        grid: grid.clone(),
        values: values?,
        sigma,
        t_final,
        provenance: "dsm".to_string(),
    })
}

fn imaging_steps(traces: &TraceSet, t_final: f64) -> Result<(usize, f64), ImagingError> {
    let dt = traces.dt;
    let recorded = traces.duration();
    if t_final > recorded * (1.0 + 1e-9) {
        return Err(ImagingError::DurationExceedsRecord {
            requested: t_final,
            recorded,
        });
    }
    let n_t = (t_final / dt).round() as usize;
    if n_t == 0 {
        return Err(ImagingError::DurationTooShort(t_final));
    }
    Ok((n_t.min(traces.n_samples() - 1), dt))
}

/// Total focusing baseline: the magnitude of the surface sum of the traces
/// at the two-leg travel time `t0 + |x_m - z|/c0 + |y - z|/c0`, with `y` the
/// source location and `t0` the pulse peak time. Linear in the data.
pub fn tfm_indicator(
    traces: &TraceSet,
    receivers: &ReceiverArray,
    source_location: &Point,
    t0: f64,
    grid: &SamplingGrid,
    c0: f64,
) -> Result<IndicatorGrid, ImagingError> {
    if grid.dim != receivers.dim() {
        return Err(ImagingError::DimensionMismatch {
            grid: grid.dim,
            receivers: receivers.dim(),
        });
    }
    let wm = receivers.surface_weight() / receivers.len() as f64;
    let nc = traces.n_components();
    let values: Result<Vec<f64>, ImagingError> = (0..grid.n_points())
        .into_par_iter()
        .map(|l| {
            let z = grid.point(l);
            let src_leg = dist(source_location, &z) / c0;
            let mut summed = [0.0f64; 3];
            for (m, x) in receivers.positions.iter().enumerate() {
                let d = dist(x, &z);
                if d < RECEIVER_CLEARANCE {
                    return Err(ImagingError::PointTooCloseToReceiver {
                        point: l,
                        receiver: m,
                    });
                }
                let t = t0 + d / c0 + src_leg;
                for (c, s) in summed.iter_mut().take(nc).enumerate() {
                    *s += wm * sample_trace_delayed(traces, m, t, c);
                }
            }
            Ok(summed[..nc].iter().map(|s| s * s).sum::<f64>().sqrt())
        })
        .collect();
    Ok(IndicatorGrid {
        grid: grid.clone(),
        values: values?,
        sigma: 0.0,
        t_final: traces.duration(),
        provenance: "tfm".to_string(),
    })
}

/// Multiplicative Gaussian noise:
/// `value' = value + delta R_{m,n} max|value| u`, with `R_{m,n}` standard
/// Gaussian draws from a counter-based generator keyed by (receiver, step)
/// and `u` the per-entry unit direction (`0` where the entry is exactly
/// zero, which keeps pre-arrival zeros causal).
pub fn add_noise(traces: &TraceSet, delta: f64, seed: u64) -> Result<TraceSet, ImagingError> {
    if !(delta >= 0.0) {
        return Err(ImagingError::NegativeDelta(delta));
    }
    let mut out = traces.clone();
    if delta == 0.0 {
        return Ok(out);
    }
    let max = traces.max_norm();
    if max == 0.0 {
        return Ok(out);
    }
    let nc = traces.n_components();
    for m in 0..traces.n_receivers() {
        for n in 0..traces.n_samples() {
            let mut sq = 0.0;
            for c in 0..nc {
                let v = traces.value(m, n, c);
                sq += v * v;
            }
            if sq == 0.0 {
                continue;
            }
            let norm = sq.sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((m as u64) << 32) | n as u64);
            let r: f64 = StandardNormal.sample(&mut rng);
            let factor = delta * r * max / norm;
            for c in 0..nc {
                let v = traces.value(m, n, c);
                out.set(m, n, c, v + factor * v);
            }
        }
    }
    Ok(out)
}

/// Strict local maxima of the indicator over the face-adjacent neighborhood
/// (4 neighbors in 2D, 6 in 3D) with value at least `rel_threshold` times
/// the global maximum, sorted by value descending. A flat plateau above its
/// surroundings counts once, reported at its lexicographically smallest
/// index; an all-zero grid yields no peaks.
pub fn locate_peaks(
    grid: &IndicatorGrid,
    rel_threshold: f64,
) -> Result<Vec<(Point, f64)>, ImagingError> {
    if !(rel_threshold > 0.0 && rel_threshold <= 1.0) {
        return Err(ImagingError::BadThreshold(rel_threshold));
    }
    let max = grid.max_value();
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let threshold = rel_threshold * max;
    let g = &grid.grid;
    let values = &grid.values;
    let mut peaks = Vec::new();
    for l in 0..values.len() {
        let v = values[l];
        if v < threshold {
            continue;
        }
        match classify_candidate(g, values, l) {
            Candidate::Peak => peaks.push((g.point(l), v)),
            Candidate::NotPeak => {}
        }
    }
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    Ok(peaks)
}

enum Candidate {
    Peak,
    NotPeak,
}

fn face_neighbors(g: &SamplingGrid, l: usize) -> Vec<usize> {
    let idx = g.decompose(l);
    let n = g.n_per_axis;
    let mut out = Vec::with_capacity(2 * g.dim);
    for axis in 0..g.dim {
        if idx[axis] > 0 {
            let mut nb = idx;
            nb[axis] -= 1;
            out.push(g.compose(nb));
        }
        if idx[axis] + 1 < n {
            let mut nb = idx;
            nb[axis] += 1;
            out.push(g.compose(nb));
        }
    }
    out
}

fn classify_candidate(g: &SamplingGrid, values: &[f64], l: usize) -> Candidate {
    let v = values[l];
    let mut has_equal = false;
    for nb in face_neighbors(g, l) {
        if values[nb] > v {
            return Candidate::NotPeak;
        }
        if values[nb] == v {
            has_equal = true;
        }
    }
    if !has_equal {
        return Candidate::Peak;
    }
    // Flood the plateau of equal values; it is a single peak only if it is
    // strictly above all exterior neighbors, reported at its smallest index.
    let mut stack = vec![l];
    let mut region = std::collections::BTreeSet::new();
    region.insert(l);
    let mut has_exterior = false;
    while let Some(cur) = stack.pop() {
        for nb in face_neighbors(g, cur) {
            if values[nb] > v {
                return Candidate::NotPeak;
            }
            if values[nb] == v {
                if region.insert(nb) {
                    stack.push(nb);
                }
            } else {
                has_exterior = true;
            }
        }
    }
    if !has_exterior {
        return Candidate::NotPeak; // constant grid
    }
    if *region.iter().next().unwrap() == l {
        Candidate::Peak
    } else {
        Candidate::NotPeak
    }
}

/// Scale the grid so its maximum becomes 1. Rejects all-zero grids.
pub fn normalize(grid: &IndicatorGrid) -> Result<IndicatorGrid, ImagingError> {
    let max = grid.max_value();
    if max <= 0.0 {
        return Err(ImagingError::ZeroGrid);
    }
    let mut out = grid.clone();
    for v in &mut out.values {
        *v /= max;
    }
    Ok(out)
}
