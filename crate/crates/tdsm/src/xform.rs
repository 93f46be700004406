//! Discrete Fourier-Laplace transform and the frequency-domain twin of the
//! sampling indicator.
//!
//! The transform of a causal signal is `L[f](omega) = integral e^{i omega t}
//! f(t) dt` at complex frequency `omega = xi + i sigma`; on samples this is
//! the trapezoid sum of `e^{i xi t} e^{-sigma t} f(t)`. The frequency-domain
//! indicator here is the equivalence oracle for the time-domain indicator in
//! [`crate::imaging`]: both evaluate the same functional, one side after
//! transforming the traces.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

use crate::forward::TraceSet;
use crate::scene::{dist, ReceiverArray};
use crate::waveform::SampledSignal;

/// Minimum distance between a sampling point and a receiver; closer points
/// make the 1/(4 pi |x-z|) weight singular.
pub const RECEIVER_CLEARANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum XformError {
    #[error("sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("frequency grid is empty")]
    EmptyXiGrid,
    #[error("frequency grid must be strictly increasing at index {0}")]
    XiGridNotAscending(usize),
    #[error("signal has not decayed at the record end (|last| = {last:.3e} vs 1e-6 * max = {threshold:.3e}); the truncated Parseval sides would not be comparable")]
    SignalNotDecayed { last: f64, threshold: f64 },
    #[error("sampling point within {RECEIVER_CLEARANCE} m of receiver {0}")]
    PointOnReceiver(usize),
    #[error("n_freq must be at least 2, got {0}")]
    TooFewFrequencies(usize),
}

/// Complex Fourier-Laplace values of one or more real channels on a common
/// frequency grid at fixed damping `sigma`.
///
/// `xi_grid` is strictly increasing, in rad/s; `values[channel][k]` is the
/// transform at `xi_grid[k] + i sigma`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub sigma: f64,
    pub xi_grid: Vec<f64>,
    pub values: Vec<Vec<Complex64>>,
}

fn check_ascending(xi_grid: &[f64]) -> Result<(), XformError> {
    if xi_grid.is_empty() {
        return Err(XformError::EmptyXiGrid);
    }
    for (i, w) in xi_grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(XformError::XiGridNotAscending(i + 1));
        }
    }
    Ok(())
}

/// Fourier-Laplace transform of a sampled causal signal: the trapezoid
/// approximation of `integral_0^T e^{i xi t} e^{-sigma t} f(t) dt` on the
/// sample grid, for every `xi` in `xi_grid`.
pub fn fourier_laplace(
    signal: &SampledSignal,
    sigma: f64,
    xi_grid: &[f64],
) -> Result<Spectrum, XformError> {
    if !(sigma >= 0.0) {
        return Err(XformError::NegativeSigma(sigma));
    }
    check_ascending(xi_grid)?;
    let damped = damped_samples(signal, sigma);
    let values: Vec<Complex64> = xi_grid
        .iter()
        .map(|&xi| transform_at(&damped, signal.dt, xi))
        .collect();
    Ok(Spectrum {
        sigma,
        xi_grid: xi_grid.to_vec(),
        values: vec![values],
    })
}

/// Trapezoid-weighted damped samples `w_n e^{-sigma t_n} f_n`.
fn damped_samples(signal: &SampledSignal, sigma: f64) -> Vec<f64> {
    let n = signal.len();
    signal
        .values
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            w * (-sigma * signal.time(k)).exp() * x
        })
        .collect()
}

fn transform_at(weighted: &[f64], dt: f64, xi: f64) -> Complex64 {
    // e^{i xi t_{n+1}} = e^{i xi t_n} * e^{i xi dt}: one rotation per sample.
    let step = Complex64::from_polar(1.0, xi * dt);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &x in weighted {
        acc += phase * x;
        phase *= step;
    }
    acc * dt
}

/// Outcome of the Parseval check: both sides, their relative mismatch, and a
/// warning when the spectrum tail at `xi_max` is not negligible.
#[derive(Debug, Clone)]
pub struct ParsevalReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tail_warning: Option<String>,
}

/// Relative residual of the Parseval identity
/// `integral |e^{-sigma t} f|^2 dt = (1/2 pi) integral |L[f](xi + i sigma)|^2 d xi`,
/// with the right side truncated to `[-xi_max, xi_max]` and folded by
/// conjugate symmetry.
pub fn parseval_residual(
    signal: &SampledSignal,
    sigma: f64,
    xi_max: f64,
    n_freq: usize,
) -> Result<ParsevalReport, XformError> {
    if !(sigma >= 0.0) {
        return Err(XformError::NegativeSigma(sigma));
    }
    if n_freq < 2 {
        return Err(XformError::TooFewFrequencies(n_freq));
    }
    let max = signal.max_abs();
    let last = signal.values[signal.len() - 1].abs();
    if !(last < 1e-6 * max) {
        return Err(XformError::SignalNotDecayed {
            last,
            threshold: 1e-6 * max,
        });
    }

    let dt = signal.dt;
    let n = signal.len();
    let lhs: f64 = signal
        .values
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            let damped = (-sigma * signal.time(k)).exp() * x;
            w * damped * damped
        })
        .sum::<f64>()
        * dt;

    let xi_grid: Vec<f64> = (0..n_freq)
        .map(|k| xi_max * k as f64 / (n_freq - 1) as f64)
        .collect();
    let spectrum = fourier_laplace(signal, sigma, &xi_grid)?;
    let power: Vec<f64> = spectrum.values[0].iter().map(|v| v.norm_sqr()).collect();
    // Conjugate symmetry folds [-xi_max, xi_max] onto twice the half line.
    let rhs = 2.0 * trapezoid(&xi_grid, &power) / (2.0 * PI);

    let peak = power.iter().cloned().fold(0.0, f64::max);
    let tail = *power.last().unwrap();
    let tail_warning = (tail > 1e-6 * peak).then(|| {
        format!(
            "spectrum tail |L|^2 = {tail:.3e} at xi_max exceeds 1e-6 of peak {peak:.3e}; \
             the truncated right side is under-resolved"
        )
    });

    Ok(ParsevalReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs() / lhs,
        tail_warning,
    })
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Fourier-Laplace transforms of every (receiver, component) channel of a
/// trace set on a shared frequency grid. Computing these once and reusing
/// them across sampling points is what makes the frequency-domain indicator
/// affordable on a full grid.
#[derive(Debug, Clone)]
pub struct TraceSpectra {
    pub sigma: f64,
    pub xi_grid: Vec<f64>,
    /// `values[m * n_components + c][k]`: channel transform at `xi_grid[k]`.
    pub values: Vec<Vec<Complex64>>,
    pub n_components: usize,
}

impl TraceSpectra {
    pub fn compute(
        traces: &TraceSet,
        sigma: f64,
        xi_grid: &[f64],
    ) -> Result<Self, XformError> {
        if !(sigma >= 0.0) {
            return Err(XformError::NegativeSigma(sigma));
        }
        check_ascending(xi_grid)?;
        let nm = traces.n_receivers();
        let nc = traces.n_components();
        let nt = traces.n_samples();
        let dt = traces.dt;
        // Trapezoid-weighted damped channels, contiguous per channel.
        let mut weighted = vec![vec![0.0f64; nt]; nm * nc];
        for n in 0..nt {
            let w = if n == 0 || n == nt - 1 { 0.5 } else { 1.0 };
            let damp = w * (-sigma * (n as f64 * dt)).exp();
            for m in 0..nm {
                for c in 0..nc {
                    weighted[m * nc + c][n] = damp * traces.value(m, n, c);
                }
            }
        }
        let per_xi: Vec<Vec<Complex64>> = xi_grid
            .par_iter()
            .map(|&xi| {
                let step = Complex64::from_polar(1.0, xi * dt);
                let mut phase = Complex64::new(1.0, 0.0);
                let mut acc = vec![Complex64::new(0.0, 0.0); nm * nc];
                for n in 0..nt {
                    for (ch, a) in acc.iter_mut().enumerate() {
                        *a += phase * weighted[ch][n];
                    }
                    phase *= step;
                }
                for a in &mut acc {
                    *a *= dt;
                }
                acc
            })
            .collect();
        // Transpose (xi-major) -> (channel-major).
        let mut values = vec![vec![Complex64::new(0.0, 0.0); xi_grid.len()]; nm * nc];
        for (k, row) in per_xi.iter().enumerate() {
            for (ch, &v) in row.iter().enumerate() {
                values[ch][k] = v;
            }
        }
        Ok(Self {
            sigma,
            xi_grid: xi_grid.to_vec(),
            values,
            n_components: nc,
        })
    }

    /// Frequency-domain indicator at one sampling point:
    /// `(1/2 pi) integral |sum_m w_m E^s(x_m, xi + i sigma)
    /// e^{-i xi |x_m - z|/c0} / (4 pi |x_m - z|)|^2 d xi`, the xi integral
    /// running over `[-xi_max, xi_max]` via conjugate symmetry.
    pub fn indicator_at(
        &self,
        receivers: &ReceiverArray,
        z: &[f64; 3],
        surface_weight: f64,
        c0: f64,
    ) -> Result<f64, XformError> {
        let nm = receivers.positions.len();
        let nc = self.n_components;
        let wm = surface_weight / nm as f64;
        let mut dists = Vec::with_capacity(nm);
        for (m, x) in receivers.positions.iter().enumerate() {
            let d = dist(x, z);
            if d < RECEIVER_CLEARANCE {
                return Err(XformError::PointOnReceiver(m));
            }
            dists.push(d);
        }
        let mut power = Vec::with_capacity(self.xi_grid.len());
        for (k, &xi) in self.xi_grid.iter().enumerate() {
            let mut p = 0.0;
            for c in 0..nc {
                let mut s = Complex64::new(0.0, 0.0);
                for m in 0..nm {
                    let d = dists[m];
                    let kernel = Complex64::from_polar(wm / (4.0 * PI * d), -xi * d / c0);
                    s += self.values[m * nc + c][k] * kernel;
                }
                p += s.norm_sqr();
            }
            power.push(p);
        }
        Ok(2.0 * trapezoid(&self.xi_grid, &power) / (2.0 * PI))
    }
}

/// Frequency-domain indicator at a single sampling point, transforming the
/// traces on the fly. For many sampling points build a [`TraceSpectra`] once
/// and call [`TraceSpectra::indicator_at`].
pub fn freq_indicator(
    traces: &TraceSet,
    receivers: &ReceiverArray,
    z: &[f64; 3],
    sigma: f64,
    xi_grid: &[f64],
    surface_weight: f64,
    c0: f64,
) -> Result<f64, XformError> {
    let spectra = TraceSpectra::compute(traces, sigma, xi_grid)?;
    spectra.indicator_at(receivers, z, surface_weight, c0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{sample_pulse, PulseSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn exponential_decay_transform_at_zero() {
        // integral_0^inf e^{-t} dt = 1.
        let dt = 1e-3;
        let values: Vec<f64> = (0..20_000).map(|k| (-(k as f64) * dt).exp()).collect();
        let sig = SampledSignal::new(dt, values).unwrap();
        let s = fourier_laplace(&sig, 0.0, &[0.0]).unwrap();
        assert_abs_diff_eq!(s.values[0][0].re, 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(s.values[0][0].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_signal_transforms_to_zero() {
        let sig = SampledSignal::new(1e-9, vec![0.0; 32]).unwrap();
        let s = fourier_laplace(&sig, 1e7, &[0.0, 1e9, 2e9]).unwrap();
        assert!(s.values[0].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn shift_property() {
        // L[f(t + a)](omega) = e^{-i omega a} L[f](omega) for a on the grid.
        // The delay keeps the signal support clear of [0, a], so dropping the
        // head in the resample loses nothing.
        let f0 = 3e8;
        let a_env = 1.0 / (2.0 * f0);
        let spec = PulseSpec::gaussian_sine_delayed(f0, 8.0 * a_env).unwrap();
        let dt = 1.0 / (40.0 * f0);
        let n = 1024;
        let sig = sample_pulse(&spec, dt, n).unwrap();
        let shift_samples = 37usize;
        let a = shift_samples as f64 * dt;
        let shifted_values: Vec<f64> = (0..n - shift_samples)
            .map(|k| sig.values[k + shift_samples])
            .collect();
        let shifted = SampledSignal::new(dt, shifted_values).unwrap();
        let sigma = 2e7;
        let xi_grid = [0.5 * spec.carrier_omega(), spec.carrier_omega()];
        let base = fourier_laplace(&sig, sigma, &xi_grid).unwrap();
        let moved = fourier_laplace(&shifted, sigma, &xi_grid).unwrap();
        for (k, &xi) in xi_grid.iter().enumerate() {
            // e^{-i omega a} with omega = xi + i sigma.
            let factor = Complex64::from_polar((sigma * a).exp(), -xi * a);
            let expected = base.values[0][k] * factor;
            let got = moved.values[0][k];
            assert_relative_eq!(got.re, expected.re, max_relative = 1e-6);
            assert_relative_eq!(got.im, expected.im, max_relative = 1e-6);
        }
    }

    #[test]
    fn parseval_gaussian_pulse() {
        let f0 = 3e8;
        let spec = PulseSpec::gaussian_sine(f0).unwrap();
        let sig = sample_pulse(&spec, 1.0 / (60.0 * f0), 2048).unwrap();
        for &sigma in &[0.0, 2e7] {
            let report =
                parseval_residual(&sig, sigma, 6.0 * spec.carrier_omega(), 2048).unwrap();
            assert!(
                report.residual < 1e-3,
                "sigma = {sigma}: residual {}",
                report.residual
            );
        }
    }

    #[test]
    fn parseval_residual_scale_invariant() {
        let f0 = 3e8;
        let spec = PulseSpec::gaussian_sine(f0).unwrap();
        let sig = sample_pulse(&spec, 1.0 / (40.0 * f0), 1024).unwrap();
        let doubled =
            SampledSignal::new(sig.dt, sig.values.iter().map(|v| 2.0 * v).collect()).unwrap();
        let xi_max = 6.0 * spec.carrier_omega();
        let a = parseval_residual(&sig, 0.0, xi_max, 512).unwrap();
        let b = parseval_residual(&doubled, 0.0, xi_max, 512).unwrap();
        assert_relative_eq!(a.residual, b.residual, max_relative = 1e-9);
    }

    #[test]
    fn damping_shrinks_signal_energy() {
        let f0 = 3e8;
        let spec = PulseSpec::gaussian_sine(f0).unwrap();
        let sig = sample_pulse(&spec, 1.0 / (40.0 * f0), 1024).unwrap();
        let xi_max = 6.0 * spec.carrier_omega();
        let undamped = parseval_residual(&sig, 0.0, xi_max, 512).unwrap();
        let damped = parseval_residual(&sig, 2e7, xi_max, 512).unwrap();
        assert!(damped.lhs < undamped.lhs);
    }

    #[test]
    fn rejects_undecayed_signal() {
        let values: Vec<f64> = (0..64).map(|k| (k as f64 * 0.3).sin() + 2.0).collect();
        let sig = SampledSignal::new(1e-9, values).unwrap();
        assert!(matches!(
            parseval_residual(&sig, 0.0, 1e10, 128),
            Err(XformError::SignalNotDecayed { .. })
        ));
    }

    #[test]
    fn rejects_descending_grid() {
        let sig = SampledSignal::new(1e-9, vec![0.0; 16]).unwrap();
        assert!(fourier_laplace(&sig, 0.0, &[1.0, 0.5]).is_err());
        assert!(fourier_laplace(&sig, 0.0, &[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn conjugate_symmetry(seed in 0u64..1000) {
            let values: Vec<f64> = (0..128)
                .map(|k| ((k as f64 + seed as f64) * 0.37).sin() * (-(k as f64) * 0.05).exp())
                .collect();
            let sig = SampledSignal::new(1e-9, values).unwrap();
            let xi = 7.3e8;
            let sigma = 1e7;
            let pos = fourier_laplace(&sig, sigma, &[xi]).unwrap().values[0][0];
            let neg = fourier_laplace(&sig, sigma, &[-xi]).unwrap().values[0][0];
            let scale = pos.norm().max(1.0);
            prop_assert!((neg - pos.conj()).norm() <= 1e-12 * scale);
        }

        #[test]
        fn transform_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let f: Vec<f64> = (0..96).map(|k| (k as f64 * 0.21).sin()).collect();
            let g: Vec<f64> = (0..96).map(|k| (k as f64 * 0.13).cos() - 0.4).collect();
            let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + beta * b).collect();
            let dt = 1e-9;
            let xi = [4.2e8];
            let lf = fourier_laplace(&SampledSignal::new(dt, f).unwrap(), 0.0, &xi).unwrap();
            let lg = fourier_laplace(&SampledSignal::new(dt, g).unwrap(), 0.0, &xi).unwrap();
            let lc = fourier_laplace(&SampledSignal::new(dt, combo).unwrap(), 0.0, &xi).unwrap();
            let expected = alpha * lf.values[0][0] + beta * lg.values[0][0];
            let scale = expected.norm().max(1.0);
            prop_assert!((lc.values[0][0] - expected).norm() <= 1e-12 * scale);
        }
    }
}
