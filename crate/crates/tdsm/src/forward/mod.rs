//! Synthetic scattered-field data generation: analytic incident fields, a
//! 2D staggered-grid time-domain solver (TM and TE modes), and a 3D Born
//! synthesizer.

mod born3d;
mod fdtd2d;
mod incident;

pub use born3d::{born_synthesize_3d, BornParams, BornSynthesis};
pub use fdtd2d::{check_cfl, run_forward_2d, CflReport, Mode2d, SolverParams};
pub use incident::{incident_3d, incident_te, incident_tm};

use thiserror::Error;

use crate::scene::Point;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("CFL violated: c0 * tau * sqrt(2) / h = {ratio:.4} > 1")]
    CflViolation { ratio: f64 },
    #[error("receiver {index} lies outside the computational box minus absorber")]
    ReceiverOutsideDomain { index: usize },
    #[error("source (with mollifier radius) lies outside the computational box minus absorber")]
    SourceOutsideDomain,
    #[error("field became non-finite at step {step}; the run is unstable")]
    Instability { step: usize },
    #[error("evaluation point coincides with the source location")]
    SourcePointSingular,
    #[error("final time must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("a forward run needs at least 1 time step")]
    NoTimeSteps,
    #[error("trace value at receiver {receiver}, step {step} is not finite")]
    NonFiniteTrace { receiver: usize, step: usize },
    #[error("trace at receiver {receiver} violates causality: first sample is {value}, not 0")]
    FirstSampleNonZero { receiver: usize, value: f64 },
    #[error("the Born synthesizer requires a 3D scene, got dimension {0}")]
    BornNeeds3d(usize),
    #[error("the TM/TE solver requires a 2D scene, got dimension {0}")]
    SolverNeeds2d(usize),
    #[error("source polarization must be nonzero for this mode")]
    ZeroPolarization,
    #[error("frequency grid needs at least 2 nodes, got {0}")]
    TooFewFrequencies(usize),
    #[error("sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("mollified source stencil is empty; increase the source radius")]
    EmptySourceStencil,
    #[error(transparent)]
    Spectrum(#[from] crate::xform::XformError),
    #[error(transparent)]
    SpecFun(#[from] crate::specfun::SpecFunError),
}

/// Scattered-field values at every receiver and time step: the measured
/// data set driving the imaging functionals.
///
/// `value(m, n, c)` is component `c` of the scattered field at receiver `m`
/// and time `n * dt`; sample 0 sits at `t = 0` and is exactly zero
/// (causality). Components: 1 for TM, 2 for TE, 3 for the Born synthesizer.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub receiver_positions: Vec<Point>,
    pub dt: f64,
    n_samples: usize,
    n_components: usize,
    values: Vec<f64>,
}

impl TraceSet {
    /// All-zero trace set with the given shape.
    pub fn zeroed(
        receiver_positions: Vec<Point>,
        dt: f64,
        n_samples: usize,
        n_components: usize,
    ) -> Self {
        let values = vec![0.0; receiver_positions.len() * n_samples * n_components];
        Self {
            receiver_positions,
            dt,
            n_samples,
            n_components,
            values,
        }
    }

    /// Assemble from a flat value buffer in (receiver, sample, component)
    /// order, validating the trace invariants.
    pub fn from_values(
        receiver_positions: Vec<Point>,
        dt: f64,
        n_samples: usize,
        n_components: usize,
        values: Vec<f64>,
    ) -> Result<Self, ForwardError> {
        assert_eq!(
            values.len(),
            receiver_positions.len() * n_samples * n_components,
            "trace buffer shape mismatch"
        );
        let set = Self {
            receiver_positions,
            dt,
            n_samples,
            n_components,
            values,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn n_receivers(&self) -> usize {
        self.receiver_positions.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Duration `(n_samples - 1) * dt` of the record.
    pub fn duration(&self) -> f64 {
        (self.n_samples - 1) as f64 * self.dt
    }

    #[inline]
    fn index(&self, m: usize, n: usize, c: usize) -> usize {
        (m * self.n_samples + n) * self.n_components + c
    }

    #[inline]
    pub fn value(&self, m: usize, n: usize, c: usize) -> f64 {
        self.values[self.index(m, n, c)]
    }

    #[inline]
    pub(crate) fn set(&mut self, m: usize, n: usize, c: usize, v: f64) {
        let idx = self.index(m, n, c);
        self.values[idx] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest per-entry Euclidean norm over components (plain |value| for
    /// scalar traces).
    pub fn max_norm(&self) -> f64 {
        let mut max = 0.0f64;
        for m in 0..self.n_receivers() {
            for n in 0..self.n_samples {
                let mut sq = 0.0;
                for c in 0..self.n_components {
                    let v = self.value(m, n, c);
                    sq += v * v;
                }
                max = max.max(sq);
            }
        }
        max.sqrt()
    }

    /// Check finiteness and the causal first sample.
    pub fn validate(&self) -> Result<(), ForwardError> {
        for m in 0..self.n_receivers() {
            for c in 0..self.n_components {
                let first = self.value(m, 0, c);
                if first != 0.0 {
                    return Err(ForwardError::FirstSampleNonZero {
                        receiver: m,
                        value: first,
                    });
                }
            }
            for n in 0..self.n_samples {
                for c in 0..self.n_components {
                    if !self.value(m, n, c).is_finite() {
                        return Err(ForwardError::NonFiniteTrace {
                            receiver: m,
                            step: n,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Sub-select receivers (aperture restriction); indices must be valid.
    pub fn select_receivers(&self, indices: &[usize]) -> Self {
        let mut out = Self::zeroed(
            indices.iter().map(|&m| self.receiver_positions[m]).collect(),
            self.dt,
            self.n_samples,
            self.n_components,
        );
        for (mi, &m) in indices.iter().enumerate() {
            for n in 0..self.n_samples {
                for c in 0..self.n_components {
                    out.set(mi, n, c, self.value(m, n, c));
                }
            }
        }
        out
    }

    /// Entrywise scaling, handy for homogeneity checks.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }
}
