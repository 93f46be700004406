//! Time-domain direct sampling for inverse electromagnetic scattering.
//!
//! This crate generates synthetic time-domain scattering data for small
//! dielectric scatterers (a 2D staggered-grid solver for TM/TE modes and a
//! 3D Born synthesizer) and reconstructs scatterer locations with a
//! time-domain direct sampling indicator. A frequency-domain twin of the
//! indicator, a Parseval check, and a closed-form sphere integral of
//! modified spherical Bessel functions are built in as verification suites.
//!
//! The main pipeline:
//!
//! 1. describe the experiment ([`scene`]): constants, scatterers, source,
//!    receiver array, sampling grid;
//! 2. generate scattered-field traces ([`forward`]);
//! 3. evaluate the sampling indicator on the grid ([`imaging`]), optionally
//!    after noise injection;
//! 4. extract peaks — large indicator values mark scatterer locations.
//!
//! Runnable end-to-end demonstrations live in `examples/`; the `tdsm`
//! binary exposes the same functionality as subcommands.

pub mod cli;
pub mod config;
pub mod forward;
pub mod imaging;
pub mod io;
pub mod scene;
pub mod specfun;
pub mod verify;
pub mod waveform;
pub mod xform;

pub use forward::{born_synthesize_3d, run_forward_2d, BornParams, Mode2d, SolverParams, TraceSet};
pub use imaging::{
    add_noise, locate_peaks, normalize, sample_trace_delayed, tfm_indicator, time_indicator,
    IndicatorGrid,
};
pub use scene::{
    PhysicalConstants, Point, ReceiverArray, ReceiverLayout, SamplingGrid, Scatterer, Scene,
    SourceSpec,
};
pub use waveform::{sample_pulse, PulseKind, PulseSpec, SampledSignal};
pub use xform::{fourier_laplace, freq_indicator, parseval_residual, Spectrum};
