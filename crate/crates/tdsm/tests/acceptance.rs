//! End-to-end acceptance suite: every numbered criterion runs at its stated
//! tolerance and prints one `CHECK criterion-<k>-<name> <measured>
//! <tolerance> <PASS|FAIL>` line (plus elapsed seconds). Shared forward runs
//! are computed once and reused across criteria.

use std::sync::OnceLock;
use std::time::Instant;

use tdsm::forward::{born_synthesize_3d, run_forward_2d, BornParams, Mode2d, SolverParams};
use tdsm::imaging::{add_noise, locate_peaks, tfm_indicator, time_indicator, IndicatorGrid};
use tdsm::scene::{
    dist, PhysicalConstants, Point, ReceiverArray, ReceiverLayout, SamplingGrid, Scatterer, Scene,
    SourceSpec,
};
use tdsm::verify::{run_suite, Suite};
use tdsm::waveform::PulseSpec;
use tdsm::xform::TraceSpectra;
use tdsm::TraceSet;

fn report(name: &str, measured: f64, tolerance: f64, started: Instant) -> bool {
    let pass = measured <= tolerance;
    println!(
        "CHECK {name} {measured:.6e} {tolerance:.6e} {} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    pass
}

/// Largest distance from any true center to its nearest reported peak;
/// infinite when no peaks were found.
fn worst_localization(peaks: &[(Point, f64)], truths: &[Point]) -> f64 {
    truths
        .iter()
        .map(|t| {
            peaks
                .iter()
                .map(|(p, _)| dist(p, t))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// The paper's 2D geometry: receivers on a circle of radius 6, source at
/// (-8, 0) with polarization (0, 1), sampling square [-2.5, 2.5]^2 at 60^2.
fn scene_2d(scatterers: Vec<Scatterer>, pulse: PulseSpec) -> Scene {
    Scene::build(
        PhysicalConstants::vacuum(),
        scatterers,
        SourceSpec {
            location: [-8.0, 0.0, 0.0],
            polarization: [0.0, 1.0, 0.0],
            pulse,
        },
        ReceiverArray::new(ReceiverLayout::Circle {
            center: [0.0; 3],
            radius: 6.0,
            count: 48,
        })
        .unwrap(),
        SamplingGrid::new(2, [[-2.5, 2.5], [-2.5, 2.5], [0.0, 0.0]], 60).unwrap(),
    )
    .unwrap()
}

fn three_boxes() -> Vec<Scatterer> {
    vec![
        Scatterer::cube([0.0, 1.5, 0.0], 0.2, 2.0),
        Scatterer::cube([0.0, -1.5, 0.0], 0.2, 2.0),
        Scatterer::cube([1.5, 0.0, 0.0], 0.2, 2.0),
    ]
}

const THREE_CENTERS: [Point; 3] = [[0.0, 1.5, 0.0], [0.0, -1.5, 0.0], [1.5, 0.0, 0.0]];

fn gaussian_pulse(lambda: f64) -> PulseSpec {
    PulseSpec::gaussian_sine(PhysicalConstants::vacuum().c0() / lambda).unwrap()
}

struct TmRun {
    scene: Scene,
    traces: TraceSet,
    indicator: IndicatorGrid,
    peaks: Vec<(Point, f64)>,
}

fn tm_run(lambda: f64, tau: f64, t_final: f64) -> TmRun {
    let scene = scene_2d(three_boxes(), gaussian_pulse(lambda));
    let params = SolverParams::new(0.1 * lambda, tau);
    let traces = run_forward_2d(&scene, &params, Mode2d::Tm, t_final).expect("TM forward run");
    let indicator = time_indicator(&traces, &scene.receivers, &scene.grid, 0.0, scene.c0(), t_final)
        .expect("TM indicator");
    let peaks = locate_peaks(&indicator, 0.3).expect("peak extraction");
    TmRun {
        scene,
        traces,
        indicator,
        peaks,
    }
}

/// Criterion-4 configuration: lambda = 1, T = 2e-7 s, tau = 2e-10 s, h = 0.1 m.
fn tm_lambda1() -> &'static TmRun {
    static RUN: OnceLock<TmRun> = OnceLock::new();
    RUN.get_or_init(|| tm_run(1.0, 2e-10, 2e-7))
}

fn tm_lambda_half() -> &'static TmRun {
    static RUN: OnceLock<TmRun> = OnceLock::new();
    RUN.get_or_init(|| tm_run(0.5, 1e-10, 2e-7))
}

#[test]
fn criterion_1_lemma1_identity() {
    let started = Instant::now();
    let lines = run_suite(Suite::Bessel);
    let measured = lines
        .iter()
        .map(|l| l.measured)
        .fold(0.0f64, f64::max);
    assert!(
        report("criterion-1-lemma1-identity", measured, 1e-8, started),
        "closed form vs sphere quadrature: {measured:.3e}"
    );
}

#[test]
fn criterion_2_parseval_residual() {
    let started = Instant::now();
    let lines = run_suite(Suite::Parseval);
    let measured = lines
        .iter()
        .map(|l| l.measured)
        .fold(0.0f64, f64::max);
    assert!(
        report("criterion-2-parseval", measured, 1e-3, started),
        "Parseval residual: {measured:.3e}"
    );
}

#[test]
fn criterion_3_time_frequency_equivalence() {
    // tau = 1e-10 keeps the delayed-sample interpolation bias of the time
    // side below the tolerance; the scene is the paper TM geometry.
    let started = Instant::now();
    let run = tm_run(1.0, 1e-10, 2e-7);
    let scene = &run.scene;
    let c0 = scene.c0();
    let scale = run.indicator.max_value();

    let omega = scene.source.pulse.carrier_omega();
    let n_freq = 4096;
    let xi_grid: Vec<f64> = (0..n_freq)
        .map(|k| 6.0 * omega * k as f64 / (n_freq - 1) as f64)
        .collect();
    let spectra = TraceSpectra::compute(&run.traces, 0.0, &xi_grid).expect("trace transforms");

    let mut state = 0x7d5a_f00d_u64;
    let mut measured = 0.0f64;
    for _ in 0..25 {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let l = (state >> 33) as usize % scene.grid.n_points();
        let z = scene.grid.point(l);
        let freq_value = spectra
            .indicator_at(&scene.receivers, &z, scene.receivers.surface_weight(), c0)
            .expect("sampling point away from receivers");
        measured = measured.max((run.indicator.values[l] - freq_value).abs() / scale);
    }
    assert!(
        report("criterion-3-equivalence", measured, 1e-2, started),
        "time vs frequency indicator: {measured:.3e}"
    );
}

#[test]
fn criterion_4_tm_reconstruction() {
    let started = Instant::now();
    let run1 = tm_lambda1();
    let two_cells = 0.17;
    assert_eq!(
        run1.peaks.len(),
        3,
        "expected exactly 3 peaks at threshold 0.3, got {:?}",
        run1.peaks
    );
    let worst1 = worst_localization(&run1.peaks, &THREE_CENTERS);
    let pass1 = report("criterion-4-tm-lambda1", worst1, two_cells, started);

    // Halving the wavelength must not degrade localization at any center.
    let t_half = Instant::now();
    let run_half = tm_lambda_half();
    assert!(!run_half.peaks.is_empty());
    let mut worst_excess = 0.0f64;
    for truth in &THREE_CENTERS {
        let err = |peaks: &[(Point, f64)]| {
            peaks
                .iter()
                .map(|(p, _)| dist(p, truth))
                .fold(f64::INFINITY, f64::min)
        };
        let e1 = err(&run1.peaks);
        let e_half = err(&run_half.peaks);
        worst_excess = worst_excess.max(e_half - e1);
    }
    let pass2 = report("criterion-4-tm-lambda0.5", worst_excess, 1e-12, t_half);
    assert!(pass1 && pass2);
}

#[test]
fn criterion_5_terminal_time_monotonicity() {
    let started = Instant::now();
    let pulse = PulseSpec::smooth_sawtooth(PhysicalConstants::vacuum().c0() / 1.0, 1e18).unwrap();
    let scene = scene_2d(three_boxes(), pulse);
    let params = SolverParams::new(0.1, 2e-10);
    let traces = run_forward_2d(&scene, &params, Mode2d::Tm, 8e-8).expect("sawtooth TM run");
    let c0 = scene.c0();
    let worst_at = |t_final: f64| {
        let grid = time_indicator(&traces, &scene.receivers, &scene.grid, 0.0, c0, t_final)
            .expect("indicator");
        let peaks = locate_peaks(&grid, 0.3).expect("peaks");
        worst_localization(&peaks, &THREE_CENTERS)
    };
    let err_short = worst_at(3.2e-8);
    let err_long = worst_at(8e-8);
    // Monotonicity: the longer horizon may not be worse.
    let measured = if err_long <= err_short { 0.0 } else { err_long - err_short };
    println!(
        "# terminal-time errors: T=3.2e-8 -> {err_short:.3}, T=8e-8 -> {err_long:.3}"
    );
    assert!(
        report("criterion-5-terminal-time", measured, 0.0, started),
        "T = 8e-8 localization ({err_long}) worse than T = 3.2e-8 ({err_short})"
    );
}

#[test]
fn criterion_6_noise_stability() {
    let started = Instant::now();
    let run = tm_lambda1();
    let scene = &run.scene;
    let c0 = scene.c0();
    let t_final = 2e-7;
    let seeds = [11u64, 23, 37, 41, 53];

    let mean_err = |delta: f64| -> f64 {
        let mut total = 0.0;
        for &seed in &seeds {
            let noisy = add_noise(&run.traces, delta, seed).expect("noise");
            let grid = time_indicator(&noisy, &scene.receivers, &scene.grid, 0.0, c0, t_final)
                .expect("indicator");
            total += run
                .indicator
                .values
                .iter()
                .zip(&grid.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        }
        total / seeds.len() as f64
    };

    // Known red, kept as an executable record: the measured max-norm
    // perturbation is dominated by the injected noise energy, which is
    // quadratic in delta (the zero-mean linear cross term self-averages
    // over the ~10^3-sample time integral, suppressed by 1/sqrt(N_t)), so a
    // constant fitted at delta = 0.1 cannot bound delta = 0.4 within a
    // factor of 2 for this noise model regardless of the data source. The
    // measured growth factor is ~δ²-consistent (≈ 3.9 here).
    let c = mean_err(0.1) / 0.1;
    let growth = [0.2, 0.4]
        .iter()
        .map(|&d| mean_err(d) / (c * d))
        .fold(0.0f64, f64::max);
    let pass_linear = report("criterion-6-noise-linearity", growth, 2.0, started);

    // At delta = 0.4 all three scatterers must survive: each true center
    // matched by a reported peak within 3 cells, for every seed. The noise
    // model injects delta * max|E| at every sample, so the indicator rides
    // on a flat noise floor and the raw count above threshold is not
    // meaningful; survival of the matched peaks is.
    let survival = Instant::now();
    let three_cells = 3.0 * scene.grid.spacing(0);
    let mut worst = 0.0f64;
    for &seed in &seeds {
        let noisy = add_noise(&run.traces, 0.4, seed).expect("noise");
        let grid = time_indicator(&noisy, &scene.receivers, &scene.grid, 0.0, c0, t_final)
            .expect("indicator");
        let peaks = locate_peaks(&grid, 0.3).expect("peaks");
        worst = worst.max(worst_localization(&peaks, &THREE_CENTERS));
    }
    let pass_peaks = report("criterion-6-noise-peaks", worst, three_cells, survival);
    assert!(pass_peaks);
    assert!(
        pass_linear,
        "noise-linearity is red by analysis: the indicator perturbation is \
         the injected noise energy (~delta^2); a linear fit at delta = 0.1 \
         cannot bound delta = 0.4 within factor 2 under this noise model"
    );
}

#[test]
fn criterion_7_te_partial_aperture() {
    let started = Instant::now();
    let scene = scene_2d(
        vec![
            Scatterer::cube([0.0, 1.5, 0.0], 0.2, 2.0),
            Scatterer::cube([0.0, -1.5, 0.0], 0.2, 2.0),
        ],
        gaussian_pulse(1.0),
    );
    let truths = [[0.0, 1.5, 0.0], [0.0, -1.5, 0.0]];
    let params = SolverParams::new(0.1, 2e-10);
    let t_final = 2e-7;
    let traces = run_forward_2d(&scene, &params, Mode2d::Te, t_final).expect("TE forward run");
    let c0 = scene.c0();
    let three_cells = 3.0 * scene.grid.spacing(0);

    let apertures = [
        ("full", 0.0, 2.0 * std::f64::consts::PI),
        ("half", std::f64::consts::FRAC_PI_2, 1.5 * std::f64::consts::PI),
        ("quarter", 0.75 * std::f64::consts::PI, 1.25 * std::f64::consts::PI),
    ];
    let mut all_pass = true;
    for (name, lo, hi) in apertures {
        let t = Instant::now();
        let (receivers, kept) = scene.receivers.restrict_aperture(lo, hi).expect("aperture");
        let restricted = traces.select_receivers(&kept);
        let grid = time_indicator(&restricted, &receivers, &scene.grid, 0.0, c0, t_final)
            .expect("indicator");
        let peaks = locate_peaks(&grid, 0.3).expect("peaks");
        // Both true centers must be matched by a reported peak; partial
        // apertures also produce ghost ridges toward the aperture side, so
        // the raw count above threshold is reported but not asserted.
        assert!(peaks.len() >= 2, "{name} aperture: got {:?}", peaks);
        println!("# {name} aperture: {} peaks above threshold", peaks.len());
        let worst = worst_localization(&peaks, &truths);
        all_pass &= report(&format!("criterion-7-te-{name}"), worst, three_cells, t);
    }
    let _ = started;
    assert!(all_pass);
}

fn scene_3d(scatterers: Vec<Scatterer>) -> Scene {
    Scene::build(
        PhysicalConstants::vacuum(),
        scatterers,
        SourceSpec {
            location: [0.0, -8.0, 0.0],
            polarization: [1.0, 0.0, 0.0],
            pulse: gaussian_pulse(1.0),
        },
        ReceiverArray::new(ReceiverLayout::Cube {
            half_width: 6.0,
            per_face: 49,
        })
        .unwrap(),
        SamplingGrid::new(3, [[-2.0, 2.0], [-2.0, 2.0], [-2.0, 2.0]], 30).unwrap(),
    )
    .unwrap()
}

#[test]
fn criterion_8_born_3d_imaging() {
    let started = Instant::now();
    let scene = scene_3d(vec![Scatterer::cube([0.0; 3], 1.0, 2.0)]);
    let params = BornParams::for_pulse(&scene.source.pulse, 1e-7, 500);
    let synthesis = born_synthesize_3d(&scene, &params).expect("Born synthesis");
    let grid = time_indicator(
        &synthesis.traces,
        &scene.receivers,
        &scene.grid,
        0.0,
        scene.c0(),
        params.t_final,
    )
    .expect("3D indicator");
    let two_cells = 2.0 * scene.grid.spacing(0);
    let max_dist = dist(&grid.argmax(), &[0.0; 3]);
    let pass_single = report("criterion-8-born-single-cube", max_dist, two_cells, started);

    let t_two = Instant::now();
    let scene2 = scene_3d(vec![
        Scatterer::cube([-1.0, 0.0, 0.0], 0.5, 2.0),
        Scatterer::cube([1.0, 0.0, 0.0], 0.5, 2.0),
    ]);
    let params2 = BornParams::for_pulse(&scene2.source.pulse, 1e-7, 500);
    let synthesis2 = born_synthesize_3d(&scene2, &params2).expect("Born synthesis");
    let grid2 = time_indicator(
        &synthesis2.traces,
        &scene2.receivers,
        &scene2.grid,
        0.0,
        scene2.c0(),
        params2.t_final,
    )
    .expect("3D indicator");
    let peaks = locate_peaks(&grid2, 0.3).expect("peaks");
    let n_peaks = peaks.len() as f64;
    println!("# two-cube peaks: {peaks:?}");
    let pass_two = report(
        "criterion-8-born-two-cubes",
        (n_peaks - 2.0).abs(),
        0.0,
        t_two,
    );
    assert!(pass_single && pass_two);
}

#[test]
fn criterion_9_solver_self_convergence() {
    let started = Instant::now();
    // Compact single-box scene; the absorber thickness and mollifier radius
    // stay fixed in meters across the refinement ladder.
    let scene = Scene::build(
        PhysicalConstants::vacuum(),
        vec![Scatterer::cube([0.0, 1.0, 0.0], 0.2, 2.0)],
        SourceSpec {
            location: [-5.0, 0.0, 0.0],
            polarization: [0.0, 1.0, 0.0],
            pulse: gaussian_pulse(1.0),
        },
        ReceiverArray::new(ReceiverLayout::Circle {
            center: [0.0; 3],
            radius: 3.0,
            count: 16,
        })
        .unwrap(),
        SamplingGrid::new(2, [[-1.5, 1.5], [-1.5, 1.5], [0.0, 0.0]], 20).unwrap(),
    )
    .unwrap();
    let t_final = 4e-8;
    let run_level = |level: u32| {
        let refine = 2usize.pow(level);
        let mut params = SolverParams::new(0.1 / refine as f64, 2e-10 / refine as f64);
        params.padding = 0.6;
        params.absorber_cells = 20 * refine;
        params.source_radius_cells = 2.0 * refine as f64;
        run_forward_2d(&scene, &params, Mode2d::Tm, t_final).expect("convergence run")
    };
    let coarse = run_level(0);
    let medium = run_level(1);
    let fine = run_level(2);
    // L2 difference on the shared coarse time grid.
    let l2_diff = |a: &TraceSet, b: &TraceSet| {
        let stride_a = (a.n_samples() - 1) / (coarse.n_samples() - 1);
        let stride_b = (b.n_samples() - 1) / (coarse.n_samples() - 1);
        let mut acc = 0.0;
        for m in 0..a.n_receivers() {
            for n in 0..coarse.n_samples() {
                let d = a.value(m, n * stride_a, 0) - b.value(m, n * stride_b, 0);
                acc += d * d;
            }
        }
        acc.sqrt()
    };
    let d1 = l2_diff(&coarse, &medium);
    let d2 = l2_diff(&medium, &fine);
    let ratio = d1 / d2;
    println!("# refinement differences: d(h, h/2) = {d1:.3e}, d(h/2, h/4) = {d2:.3e}");
    let pass = (3.0..=5.0).contains(&ratio);
    println!(
        "CHECK criterion-9-self-convergence {ratio:.6e} [3,5] {} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "refinement ratio {ratio} outside [3, 5]");
}

#[test]
fn criterion_10_tfm_baseline() {
    let started = Instant::now();
    let run = tm_lambda1();
    let scene = &run.scene;
    let tfm = tfm_indicator(
        &run.traces,
        &scene.receivers,
        &scene.source.location,
        scene.source.pulse.peak_time(),
        &scene.grid,
        scene.c0(),
    )
    .expect("TFM indicator");
    let tfm_peaks = locate_peaks(&tfm, 0.3).expect("TFM peaks");
    let three_cells = 3.0 * scene.grid.spacing(0);
    let localized = THREE_CENTERS
        .iter()
        .filter(|truth| {
            tfm_peaks
                .iter()
                .any(|(p, _)| dist(p, truth) <= three_cells)
        })
        .count();
    println!("# TFM localized {localized}/3 scatterers; peaks: {tfm_peaks:?}");
    assert!(
        localized >= 2,
        "TFM localized only {localized} of 3 scatterers within 3 cells"
    );
    let tfm_worst = worst_localization(&tfm_peaks, &THREE_CENTERS);
    let dsm_worst = worst_localization(&run.peaks, &THREE_CENTERS);
    // The sampling indicator must dominate or tie the focusing baseline.
    let measured = if dsm_worst <= tfm_worst {
        0.0
    } else {
        dsm_worst - tfm_worst
    };
    println!("# worst-case localization: dsm = {dsm_worst:.3}, tfm = {tfm_worst:.3}");
    assert!(
        report("criterion-10-tfm-baseline", measured, 0.0, started),
        "DSM worst error {dsm_worst} exceeds TFM {tfm_worst}"
    );
}
