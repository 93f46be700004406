//! Configuration-driven command line: simulate, image (sampling or focusing
//! indicator), aperture-restricted imaging, verification suites, and pulse
//! spectra.
//!
//! Exit codes: 0 success, 1 configuration/usage errors, 2 runtime failures
//! (solver, imaging, failed verification checks), 3 trace-header mismatch
//! against the configured scene.

use clap::{Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::config::{load_config, ExperimentConfig, ForwardMode};
use crate::forward::{born_synthesize_3d, run_forward_2d, TraceSet};
use crate::imaging::{add_noise, locate_peaks, tfm_indicator, time_indicator};
use crate::io::{read_traces, write_grid, write_pgm, write_traces};
use crate::scene::dist;
use crate::verify::{run_suite, Suite};
use crate::waveform::{sample_pulse, spectrum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_HEADER_MISMATCH: i32 = 3;

#[derive(Parser)]
#[command(
    name = "tdsm",
    about = "Time-domain direct sampling for inverse electromagnetic scattering",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Dsm,
    Tfm,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scattered-field traces for the configured scene
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Trace file destination; defaults to `output.traces` in the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Image recorded traces and print the peak list
    Image {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        /// Grid file destination; defaults to `output.grid` in the config
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "dsm")]
        method: Method,
        /// Noise level; overrides `noise.delta`
        #[arg(long)]
        delta: Option<f64>,
        /// Noise seed; overrides `noise.seed`
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Image with the total-focusing baseline (same as `image --method tfm`)
    TfmImage {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Image with the receiver circle restricted to an angular aperture
    Aperture {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        theta_min: f64,
        #[arg(long)]
        theta_max: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a verification suite: bessel, parseval, equivalence,
    /// noise-stability or all
    Verify { suite: String },
    /// Sample the configured pulse and write its Fourier spectrum as CSV
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse arguments and run one command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if let Ok(threads) = std::env::var("TDSM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return EXIT_CONFIG;
        }
    };
    match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, out.as_deref()),
        Command::Image {
            config,
            traces,
            out,
            method,
            delta,
            seed,
        } => cmd_image(&config, &traces, out.as_deref(), method, delta, seed, None),
        Command::TfmImage {
            config,
            traces,
            out,
            delta,
            seed,
        } => cmd_image(
            &config,
            &traces,
            out.as_deref(),
            Method::Tfm,
            delta,
            seed,
            None,
        ),
        Command::Aperture {
            config,
            traces,
            out,
            theta_min,
            theta_max,
            delta,
            seed,
        } => cmd_image(
            &config,
            &traces,
            out.as_deref(),
            Method::Dsm,
            delta,
            seed,
            Some((theta_min, theta_max)),
        ),
        Command::Verify { suite } => cmd_verify(&suite),
        Command::Spectrum { config, out } => cmd_spectrum(&config, out.as_deref()),
    }
}

fn cmd_simulate(config_path: &Path, out: Option<&Path>) -> i32 {
    let config = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = match output_path(out, config.output.traces.as_deref(), "output.traces") {
        Ok(p) => p,
        Err(code) => return code,
    };
    let traces = match generate_traces(&config) {
        Ok(t) => t,
        Err(code) => return code,
    };
    if let Err(e) = write_traces(&out, &traces) {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    println!(
        "wrote {} ({} receivers, {} samples, {} components, dt = {:.6e} s)",
        out.display(),
        traces.n_receivers(),
        traces.n_samples(),
        traces.n_components(),
        traces.dt
    );
    EXIT_OK
}

fn generate_traces(config: &ExperimentConfig) -> Result<TraceSet, i32> {
    match config.mode {
        ForwardMode::Tm | ForwardMode::Te => {
            let params = config.solver_params().map_err(|e| {
                eprintln!("error: {e}");
                EXIT_CONFIG
            })?;
            let mode = config.mode.mode_2d().expect("2D mode");
            run_forward_2d(&config.scene, params, mode, config.t_final).map_err(|e| {
                eprintln!("error: {e}");
                EXIT_RUNTIME
            })
        }
        ForwardMode::Born3d => {
            let params = config.born_params();
            let synthesis = born_synthesize_3d(&config.scene, &params).map_err(|e| {
                eprintln!("error: {e}");
                EXIT_RUNTIME
            })?;
            for warning in &synthesis.warnings {
                eprintln!("warning: {warning}");
            }
            Ok(synthesis.traces)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_image(
    config_path: &Path,
    traces_path: &Path,
    out: Option<&Path>,
    method: Method,
    delta: Option<f64>,
    seed: Option<u64>,
    aperture: Option<(f64, f64)>,
) -> i32 {
    let config = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = match output_path(out, config.output.grid.as_deref(), "output.grid") {
        Ok(p) => p,
        Err(code) => return code,
    };
    let traces = match read_traces(traces_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(reason) = check_traces_match(&config, &traces) {
        eprintln!("error: trace header mismatch: {reason}");
        return EXIT_HEADER_MISMATCH;
    }

    // Aperture restriction applies before noise so the seeds stay keyed to
    // the restricted receiver indices deterministically.
    let (receivers, traces) = match aperture {
        None => (config.scene.receivers.clone(), traces),
        Some((theta_min, theta_max)) => {
            match config.scene.receivers.restrict_aperture(theta_min, theta_max) {
                Ok((restricted, kept)) => {
                    let filtered = traces.select_receivers(&kept);
                    (restricted, filtered)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            }
        }
    };

    let delta = delta.unwrap_or(config.noise.delta);
    let seed = seed.unwrap_or(config.noise.seed);
    let traces = if delta > 0.0 {
        match add_noise(&traces, delta, seed) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    } else {
        traces
    };

    let scene = &config.scene;
    let sigma = scene.constants.sigma;
    let c0 = scene.c0();
    let t_final = config.imaging.t_final.unwrap_or(traces.duration());
    let result = match method {
        Method::Dsm => time_indicator(&traces, &receivers, &scene.grid, sigma, c0, t_final),
        Method::Tfm => tfm_indicator(
            &traces,
            &receivers,
            &scene.source.location,
            scene.source.pulse.peak_time(),
            &scene.grid,
            c0,
        ),
    };
    let mut grid = match result {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    grid.provenance = format!(
        "{:?} delta={delta} seed={seed}{}",
        method,
        aperture
            .map(|(a, b)| format!(" aperture=[{a},{b}]"))
            .unwrap_or_default()
    );

    let peaks = match locate_peaks(&grid, config.imaging.rel_threshold) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    for (point, value) in &peaks {
        if scene.grid.dim == 2 {
            println!("{} {} {:.17e}", point[0], point[1], value);
        } else {
            println!("{} {} {} {:.17e}", point[0], point[1], point[2], value);
        }
    }

    if let Err(e) = write_grid(&out, &grid) {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    if let Some(pgm) = &config.output.pgm {
        if let Err(e) = write_pgm(Path::new(pgm), &grid) {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    }
    EXIT_OK
}

/// The trace file must describe the configured experiment: same receiver
/// count and positions, matching component count.
fn check_traces_match(config: &ExperimentConfig, traces: &TraceSet) -> Result<(), String> {
    let expected = &config.scene.receivers.positions;
    if traces.n_receivers() != expected.len() {
        return Err(format!(
            "{} receivers in file, {} in config",
            traces.n_receivers(),
            expected.len()
        ));
    }
    if traces.n_components() != config.mode.components() {
        return Err(format!(
            "{} components in file, {} expected for {:?}",
            traces.n_components(),
            config.mode.components(),
            config.mode
        ));
    }
    for (m, (a, b)) in traces
        .receiver_positions
        .iter()
        .zip(expected.iter())
        .enumerate()
    {
        if dist(a, b) > 1e-9 {
            return Err(format!("receiver {m} at {a:?} but config places it at {b:?}"));
        }
    }
    Ok(())
}

fn cmd_verify(suite: &str) -> i32 {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let lines = run_suite(suite);
    let mut all_pass = true;
    for line in &lines {
        println!("{line}");
        all_pass &= line.pass;
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_RUNTIME
    }
}

fn cmd_spectrum(config_path: &Path, out: Option<&Path>) -> i32 {
    let config = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pulse = &config.scene.source.pulse;
    let f0 = pulse.f0;
    // Sample past the pulse body: the delay plus a few envelope widths, or a
    // few sawtooth periods.
    let duration = (pulse.t0 + 8.0 * pulse.envelope_width()).max(8.0 / f0);
    let dt = 1.0 / (40.0 * f0);
    let n = (duration / dt).ceil() as usize + 1;
    let signal = match sample_pulse(pulse, dt, n.max(2)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let n_grid = 601;
    let freqs: Vec<f64> = (0..n_grid)
        .map(|k| 3.0 * f0 * k as f64 / (n_grid - 1) as f64)
        .collect();
    let spec = match spectrum(&signal, &freqs) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let mut csv = String::from("f_hz,re,im,abs\n");
    for (k, &f) in freqs.iter().enumerate() {
        let v = spec.values[0][k];
        csv.push_str(&format!("{f:.17e},{:.17e},{:.17e},{:.17e}\n", v.re, v.im, v.norm()));
    }
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, csv) {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_RUNTIME;
            }
            let peak = freqs
                .iter()
                .zip(&spec.values[0])
                .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
                .map(|(f, _)| *f)
                .unwrap_or(0.0);
            println!("wrote {} (spectrum peak near {peak:.4e} Hz)", path.display());
        }
        None => print!("{csv}"),
    }
    EXIT_OK
}

fn output_path(
    cli: Option<&Path>,
    config: Option<&str>,
    key: &str,
) -> Result<PathBuf, i32> {
    match (cli, config) {
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(p)) => Ok(PathBuf::from(p)),
        (None, None) => {
            eprintln!("error: no output path: pass --out or set `{key}` in the config");
            Err(EXIT_CONFIG)
        }
    }
}
