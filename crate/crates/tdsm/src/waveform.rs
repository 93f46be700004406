//! Causal modulation pulses driving the incident fields.
//!
//! Two pulse families are supported: a Gaussian-modulated sine and a
//! mollified sawtooth. Both are identically zero for `t < 0`. The sampled
//! form ([`SampledSignal`]) is the carrier for everything downstream:
//! solver source tables, transforms, traces.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::xform::Spectrum;

/// Gaussian-weight level below which the sawtooth mollifier integral is truncated.
const MOLLIFIER_CUTOFF: f64 = 1e-12;
/// Absolute tolerance of the adaptive Simpson rule for the sawtooth integral.
const SAWTOOTH_QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("f0 must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("delay t0 = {t0} is below 3a = {min} for f0 = {f0}; the causal truncation at t = 0 would be visible")]
    DelayTooShort { t0: f64, min: f64, f0: f64 },
    #[error("smoothing parameter must be positive, got {0}")]
    NonPositiveSmoothing(f64),
    #[error("time argument must be finite")]
    NonFiniteTime,
    #[error("dt must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("a sampled signal needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("frequency grid is empty")]
    EmptyFrequencyGrid,
}

/// Which modulation family a [`PulseSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    GaussianSine,
    SmoothSawtooth,
}

/// Temporal modulation of the source dipole.
///
/// `f0` is the peak (Gaussian) or base (sawtooth) frequency in Hz. The
/// Gaussian pulse uses the derived width `a = 1/(2 f0)`, carrier
/// `omega = 2 pi f0`, and delay `t0`; the sawtooth uses `b = pi f0` and the
/// smoothing parameter `c` in 1/s^2. Construct through [`PulseSpec::gaussian_sine`],
/// [`PulseSpec::gaussian_sine_delayed`] or [`PulseSpec::smooth_sawtooth`],
/// which validate the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub kind: PulseKind,
    /// Peak/base frequency in Hz.
    pub f0: f64,
    /// Delay time in s (Gaussian pulse only; 0 for the sawtooth).
    pub t0: f64,
    /// Smoothing parameter c in 1/s^2 (sawtooth only; 0 for the Gaussian).
    pub smoothing: f64,
}

impl PulseSpec {
    /// Gaussian-modulated sine with the default delay `t0 = 4a`, which puts
    /// the pulse symmetrically inside `t >= 0`.
    pub fn gaussian_sine(f0: f64) -> Result<Self, WaveformError> {
        if !(f0 > 0.0) {
            return Err(WaveformError::NonPositiveFrequency(f0));
        }
        let a = 1.0 / (2.0 * f0);
        Self::gaussian_sine_delayed(f0, 4.0 * a)
    }

    /// Gaussian-modulated sine with an explicit delay.
    ///
    /// Requires `t0 >= 3a` so that the hard causal cutoff at `t = 0` sits
    /// below `e^-9` of the envelope peak.
    pub fn gaussian_sine_delayed(f0: f64, t0: f64) -> Result<Self, WaveformError> {
        if !(f0 > 0.0) {
            return Err(WaveformError::NonPositiveFrequency(f0));
        }
        let a = 1.0 / (2.0 * f0);
        if !(t0 >= 3.0 * a) {
            return Err(WaveformError::DelayTooShort { t0, min: 3.0 * a, f0 });
        }
        Ok(Self {
            kind: PulseKind::GaussianSine,
            f0,
            t0,
            smoothing: 0.0,
        })
    }

    /// Mollified sawtooth with base frequency `f0` and smoothing `c` (1/s^2).
    pub fn smooth_sawtooth(f0: f64, smoothing: f64) -> Result<Self, WaveformError> {
        if !(f0 > 0.0) {
            return Err(WaveformError::NonPositiveFrequency(f0));
        }
        if !(smoothing > 0.0) {
            return Err(WaveformError::NonPositiveSmoothing(smoothing));
        }
        Ok(Self {
            kind: PulseKind::SmoothSawtooth,
            f0,
            t0: 0.0,
            smoothing,
        })
    }

    /// Gaussian envelope width `a = 1/(2 f0)`.
    pub fn envelope_width(&self) -> f64 {
        1.0 / (2.0 * self.f0)
    }

    /// Carrier angular frequency `omega = 2 pi f0`.
    pub fn carrier_omega(&self) -> f64 {
        2.0 * PI * self.f0
    }

    /// Time of the pulse maximum, used by the focusing baseline: the delay
    /// `t0` for the Gaussian pulse, the first sawtooth crest `1/f0` for the
    /// sawtooth.
    pub fn peak_time(&self) -> f64 {
        match self.kind {
            PulseKind::GaussianSine => self.t0,
            PulseKind::SmoothSawtooth => 1.0 / self.f0,
        }
    }

    /// Evaluate the pulse at `t`. Total for finite `t`; zero for `t < 0`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            PulseKind::GaussianSine => eval_gaussian_pulse(t, self),
            PulseKind::SmoothSawtooth => {
                eval_smooth_sawtooth(t, self).expect("finite t for sawtooth eval")
            }
        }
    }

    /// Time derivative of the pulse at `t` (one-sided at `t = 0`), needed by
    /// the analytic incident-field kernels.
    pub fn eval_derivative(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.kind {
            PulseKind::GaussianSine => {
                let a = self.envelope_width();
                let omega = self.carrier_omega();
                let u = t - self.t0;
                let env = (-u * u / (a * a)).exp();
                env * (omega * (omega * u).cos() - 2.0 * u / (a * a) * (omega * u).sin())
            }
            PulseKind::SmoothSawtooth => {
                let c = self.smoothing;
                // integral |2 c u e^{-c u^2}| du = 2: the derivative kernel mass.
                mollified_sawtooth_integral(t, PI * self.f0, c, 2.0, |u| {
                    -2.0 * c * u * (-c * u * u).exp()
                })
            }
        }
    }
}

/// Gaussian-modulated sine pulse: `exp(-(t-t0)^2/a^2) sin(omega (t-t0))` for
/// `t >= 0`, zero otherwise, with `a = 1/(2 f0)` and `omega = 2 pi f0`.
pub fn eval_gaussian_pulse(t: f64, spec: &PulseSpec) -> f64 {
    debug_assert_eq!(spec.kind, PulseKind::GaussianSine);
    if t < 0.0 {
        return 0.0;
    }
    let a = spec.envelope_width();
    let omega = spec.carrier_omega();
    let u = t - spec.t0;
    (-u * u / (a * a)).exp() * (omega * u).sin()
}

/// Mollified sawtooth pulse: the convolution of the unit sawtooth of base
/// frequency `f0` with the Gaussian kernel `exp(-c (t-tau)^2)`, zero for
/// `t < 0`. The improper integral is truncated where the Gaussian weight
/// falls below 1e-12 of its peak and evaluated by adaptive Simpson between
/// the sawtooth jumps.
pub fn eval_smooth_sawtooth(t: f64, spec: &PulseSpec) -> Result<f64, WaveformError> {
    debug_assert_eq!(spec.kind, PulseKind::SmoothSawtooth);
    if !t.is_finite() {
        return Err(WaveformError::NonFiniteTime);
    }
    if t < 0.0 {
        return Ok(0.0);
    }
    let c = spec.smoothing;
    // The Gaussian kernel carries mass sqrt(pi/c).
    Ok(mollified_sawtooth_integral(
        t,
        PI * spec.f0,
        c,
        (PI / c).sqrt(),
        |u| (-c * u * u).exp(),
    ))
}

/// Unit sawtooth with base angular parameter `b`: rises linearly from -1/2
/// to 1/2 with period `2 pi / b`, centered so `saw(0) = 0`.
fn sawtooth(tau: f64, b: f64) -> f64 {
    let u = (b * tau + PI) / (2.0 * PI);
    u - u.floor() - 0.5
}

/// Integrate `saw(tau) * kernel(t - tau)` over the truncated mollifier
/// window, splitting at the sawtooth jumps (and the kernel center) so each
/// Simpson piece is smooth and the bump cannot hide between nodes. The
/// tolerance is the base 1e-10 scaled by `kernel_mass`, the integral of
/// `|kernel|`, which sets the natural amplitude of the result.
fn mollified_sawtooth_integral(
    t: f64,
    b: f64,
    c: f64,
    kernel_mass: f64,
    kernel: impl Fn(f64) -> f64,
) -> f64 {
    // exp(-c w^2) = 1e-12  =>  w = sqrt(ln(1e12)/c)
    let w = (-MOLLIFIER_CUTOFF.ln() / c).sqrt();
    let (lo, hi) = (t - w, t + w);
    // Jumps of the sawtooth sit at tau_k = (2k-1) pi / b.
    let k_min = ((lo * b / PI + 1.0) / 2.0).ceil() as i64;
    let k_max = ((hi * b / PI + 1.0) / 2.0).floor() as i64;
    let mut cuts = Vec::with_capacity((k_max - k_min + 4).max(3) as usize);
    cuts.push(lo);
    for k in k_min..=k_max {
        let tau = (2 * k - 1) as f64 * PI / b;
        if tau > lo && tau < hi {
            cuts.push(tau);
        }
    }
    if t > lo && t < hi {
        cuts.push(t);
    }
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pieces = (cuts.len() - 1).max(1);
    let tol = SAWTOOTH_QUAD_TOL * kernel_mass / pieces as f64;
    let f = |tau: f64| sawtooth(tau, b) * kernel(t - tau);
    cuts.windows(2)
        .map(|seg| adaptive_simpson(&f, seg[0], seg[1], tol))
        .sum()
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Uniformly sampled real signal starting at `t = 0`.
///
/// `values[n]` is the signal at `t = n * dt`. The underlying function is
/// causal (identically zero for `t < 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self, WaveformError> {
        if !(dt > 0.0) {
            return Err(WaveformError::NonPositiveDt(dt));
        }
        if values.len() < 2 {
            return Err(WaveformError::TooFewSamples(values.len()));
        }
        Ok(Self { dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of sample `n`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Duration `(len - 1) * dt` of the record.
    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sample a pulse on the uniform grid `t = k * dt`, `k = 0..n`.
pub fn sample_pulse(spec: &PulseSpec, dt: f64, n: usize) -> Result<SampledSignal, WaveformError> {
    if !(dt > 0.0) {
        return Err(WaveformError::NonPositiveDt(dt));
    }
    if n < 2 {
        return Err(WaveformError::TooFewSamples(n));
    }
    let values = (0..n).map(|k| spec.eval(k as f64 * dt)).collect();
    SampledSignal::new(dt, values)
}

/// Discrete Fourier spectrum of a sampled signal on a grid of frequencies in
/// Hz: the trapezoid approximation of `integral exp(-2 pi i f t) x(t) dt`.
///
/// This is the undamped (sigma = 0) spectrum; the damped Fourier-Laplace
/// transform lives in [`crate::xform`]. The returned [`Spectrum`] stores the
/// grid as angular frequencies `xi = 2 pi f`.
pub fn spectrum(signal: &SampledSignal, f_grid: &[f64]) -> Result<Spectrum, WaveformError> {
    if f_grid.is_empty() {
        return Err(WaveformError::EmptyFrequencyGrid);
    }
    let n = signal.len();
    let dt = signal.dt;
    let values: Vec<Complex64> = f_grid
        .iter()
        .map(|&f| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &x) in signal.values.iter().enumerate() {
                let w = if k == 0 || k == n - 1 { 0.5 * dt } else { dt };
                let phase = -2.0 * PI * f * signal.time(k);
                acc += w * x * Complex64::from_polar(1.0, phase);
            }
            acc
        })
        .collect();
    Ok(Spectrum {
        sigma: 0.0,
        xi_grid: f_grid.iter().map(|&f| 2.0 * PI * f).collect(),
        values: vec![values],
    })
}
