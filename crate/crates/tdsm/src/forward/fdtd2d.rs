//! Explicit staggered-grid leapfrog solver for the 2D TM and TE modes.
//!
//! Scattered data come from two identical runs driven by the same mollified
//! magnetic-dipole source: one with the scene permittivity, one with the
//! vacuum background; the receiver traces are their difference. The domain
//! is closed by a graded-conductivity absorbing layer with a matched
//! magnetic loss profile and a PEC outer wall.

use rayon::prelude::*;

use super::{ForwardError, TraceSet};
use crate::scene::{permittivity_at, PhysicalConstants, Scene};

/// Target normal-incidence reflection of the absorbing layer.
const ABSORBER_REFLECTION: f64 = 1e-4;
/// Steps between non-finite field checks.
const STABILITY_CHECK_INTERVAL: usize = 64;

/// Discretization of a 2D forward run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Cell size h in m.
    pub cell_size: f64,
    /// Time step tau in s; must satisfy `c0 tau <= h / sqrt(2)`.
    pub time_step: f64,
    /// Padding in m between the scene bounding box and the absorber.
    pub padding: f64,
    /// Absorbing-layer thickness in cells.
    pub absorber_cells: usize,
    /// Exponent of the graded conductivity profile.
    pub absorber_exponent: f64,
    /// Radius of the source mollifier in cells.
    pub source_radius_cells: f64,
}

impl SolverParams {
    pub fn new(cell_size: f64, time_step: f64) -> Self {
        Self {
            cell_size,
            time_step,
            padding: 1.0,
            absorber_cells: 20,
            absorber_exponent: 2.0,
            source_radius_cells: 2.0,
        }
    }
}

/// 2D reduction of the Maxwell system: scalar out-of-plane field (TM) or
/// in-plane 2-vector field (TE).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode2d {
    Tm,
    Te,
}

impl Mode2d {
    pub fn components(&self) -> usize {
        match self {
            Mode2d::Tm => 1,
            Mode2d::Te => 2,
        }
    }
}

/// Structured outcome of the stability/resolution check.
#[derive(Debug, Clone)]
pub struct CflReport {
    /// `c0 tau sqrt(2) / h`; stable iff <= 1.
    pub cfl_ratio: f64,
    /// Cells per carrier wavelength `(c0 / f0) / h`.
    pub points_per_wavelength: f64,
    pub ok: bool,
    pub warning: Option<String>,
}

/// Evaluate the 2D CFL inequality and the points-per-wavelength resolution
/// for a pulse of carrier frequency `f0`.
pub fn check_cfl(params: &SolverParams, constants: &PhysicalConstants, f0: f64) -> CflReport {
    let c0 = constants.c0();
    let cfl_ratio = c0 * params.time_step * std::f64::consts::SQRT_2 / params.cell_size;
    let points_per_wavelength = c0 / f0 / params.cell_size;
    let ok = cfl_ratio <= 1.0 + 1e-12;
    let warning = (points_per_wavelength < 8.0).then(|| {
        format!(
            "only {points_per_wavelength:.1} cells per wavelength; dispersion will be noticeable below 8"
        )
    });
    CflReport {
        cfl_ratio,
        points_per_wavelength,
        ok,
        warning,
    }
}

/// Node lattice of the computational box: `nx * ny` cells of size `h`, node
/// (0, 0) at `(x0, y0)`, with `n_abs` absorber cells on every side.
#[derive(Debug, Clone, Copy)]
struct Domain {
    nx: usize,
    ny: usize,
    h: f64,
    x0: f64,
    y0: f64,
    n_abs: usize,
    sigma_max: f64,
    exponent: f64,
}

impl Domain {
    fn build(scene: &Scene, params: &SolverParams) -> Self {
        fn include(min: &mut [f64; 2], max: &mut [f64; 2], x: f64, y: f64) {
            min[0] = min[0].min(x);
            min[1] = min[1].min(y);
            max[0] = max[0].max(x);
            max[1] = max[1].max(y);
        }
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        include(&mut min, &mut max, scene.source.location[0], scene.source.location[1]);
        for p in &scene.receivers.positions {
            include(&mut min, &mut max, p[0], p[1]);
        }
        for axis in 0..2 {
            min[axis] = min[axis].min(scene.grid.extents[axis][0]);
            max[axis] = max[axis].max(scene.grid.extents[axis][1]);
        }
        for s in &scene.scatterers {
            include(
                &mut min,
                &mut max,
                s.center[0] - s.half_widths[0],
                s.center[1] - s.half_widths[1],
            );
            include(
                &mut min,
                &mut max,
                s.center[0] + s.half_widths[0],
                s.center[1] + s.half_widths[1],
            );
        }
        let h = params.cell_size;
        let n_abs = params.absorber_cells;
        let nx_int = ((max[0] - min[0] + 2.0 * params.padding) / h).ceil() as usize + 1;
        let ny_int = ((max[1] - min[1] + 2.0 * params.padding) / h).ceil() as usize + 1;
        let l_abs = n_abs as f64 * h;
        let constants = &scene.constants;
        // Graded lossy layer tuned for the target normal-incidence reflection.
        let sigma_max = if n_abs > 0 {
            (params.absorber_exponent + 1.0) * constants.eps0 * constants.c0()
                * (1.0 / ABSORBER_REFLECTION).ln()
                / (2.0 * l_abs)
        } else {
            0.0
        };
        Domain {
            nx: nx_int + 2 * n_abs,
            ny: ny_int + 2 * n_abs,
            h,
            x0: min[0] - params.padding - n_abs as f64 * h,
            y0: min[1] - params.padding - n_abs as f64 * h,
            n_abs,
            sigma_max,
            exponent: params.absorber_exponent,
        }
    }

    fn interior(&self) -> [[f64; 2]; 2] {
        let l_abs = self.n_abs as f64 * self.h;
        [
            [self.x0 + l_abs, self.x0 + self.nx as f64 * self.h - l_abs],
            [self.y0 + l_abs, self.y0 + self.ny as f64 * self.h - l_abs],
        ]
    }

    fn contains_interior(&self, x: f64, y: f64, margin: f64) -> bool {
        let int = self.interior();
        x >= int[0][0] + margin
            && x <= int[0][1] - margin
            && y >= int[1][0] + margin
            && y <= int[1][1] - margin
    }

    /// Electric conductivity of the absorber at a physical position.
    fn sigma_e(&self, x: f64, y: f64) -> f64 {
        if self.n_abs == 0 {
            return 0.0;
        }
        let l_abs = self.n_abs as f64 * self.h;
        let int = self.interior();
        let depth_x = (int[0][0] - x).max(x - int[0][1]).max(0.0);
        let depth_y = (int[1][0] - y).max(y - int[1][1]).max(0.0);
        self.sigma_max
            * ((depth_x / l_abs).powf(self.exponent) + (depth_y / l_abs).powf(self.exponent))
    }
}

fn e_coefficients(eps: f64, sigma: f64, tau: f64, h: f64) -> (f64, f64) {
    let half = sigma * tau / (2.0 * eps);
    ((1.0 - half) / (1.0 + half), tau / (eps * h) / (1.0 + half))
}

fn h_coefficients(mu0: f64, sigma_m: f64, tau: f64, h: f64) -> (f64, f64) {
    let half = sigma_m * tau / (2.0 * mu0);
    ((1.0 - half) / (1.0 + half), tau / (mu0 * h) / (1.0 + half))
}

/// Mollifier stencil on one staggered lattice: node indices and normalized
/// bump weights with unit discrete integral.
fn mollifier_stencil(
    cols: usize,
    rows: usize,
    offset: (f64, f64),
    domain: &Domain,
    src: (f64, f64),
    radius_cells: f64,
) -> Result<Vec<(usize, f64)>, ForwardError> {
    let h = domain.h;
    let radius = radius_cells * h;
    let fx = (src.0 - domain.x0) / h - offset.0;
    let fy = (src.1 - domain.y0) / h - offset.1;
    let reach = radius_cells.ceil() as isize + 1;
    let mut stencil = Vec::new();
    let mut total = 0.0;
    for dj in -reach..=reach {
        let j = fy.round() as isize + dj;
        if j < 0 || j >= rows as isize {
            continue;
        }
        for di in -reach..=reach {
            let i = fx.round() as isize + di;
            if i < 0 || i >= cols as isize {
                continue;
            }
            let px = domain.x0 + (i as f64 + offset.0) * h;
            let py = domain.y0 + (j as f64 + offset.1) * h;
            let d2 = ((px - src.0).powi(2) + (py - src.1).powi(2)) / (radius * radius);
            if d2 < 1.0 {
                let phi = (1.0 - d2).powi(3);
                stencil.push((j as usize * cols + i as usize, phi));
                total += phi * h * h;
            }
        }
    }
    if stencil.is_empty() || total <= 0.0 {
        return Err(ForwardError::EmptySourceStencil);
    }
    for (_, phi) in &mut stencil {
        *phi /= total;
    }
    Ok(stencil)
}

fn bilinear(field: &[f64], cols: usize, rows: usize, fx: f64, fy: f64) -> f64 {
    let i0 = (fx.floor().max(0.0) as usize).min(cols - 2);
    let j0 = (fy.floor().max(0.0) as usize).min(rows - 2);
    let wx = (fx - i0 as f64).clamp(0.0, 1.0);
    let wy = (fy - j0 as f64).clamp(0.0, 1.0);
    let at = |i: usize, j: usize| field[j * cols + i];
    (1.0 - wx) * (1.0 - wy) * at(i0, j0)
        + wx * (1.0 - wy) * at(i0 + 1, j0)
        + (1.0 - wx) * wy * at(i0, j0 + 1)
        + wx * wy * at(i0 + 1, j0 + 1)
}

trait FieldRun {
    /// Advance one leapfrog step; `chi` is the pulse at the E time level.
    fn advance(&mut self, chi: f64);
    /// Write the per-receiver field components at the current time level.
    fn sample_into(&self, out: &mut [f64]);
    fn is_finite(&self) -> bool;
}

/// TM run: scalar Ez on nodes, Hx/Hy on edge midpoints.
struct TmRun {
    nx: usize,
    ny: usize,
    ez: Vec<f64>,
    hx: Vec<f64>,
    hy: Vec<f64>,
    ca: Vec<f64>,
    cb: Vec<f64>,
    da_hx: Vec<f64>,
    db_hx: Vec<f64>,
    da_hy: Vec<f64>,
    db_hy: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    eps: Vec<f64>,
    stencil_hx: Vec<(usize, f64)>,
    stencil_hy: Vec<(usize, f64)>,
    pol: [f64; 2],
    src_coef: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    mu0: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    h: f64,
    receivers: Vec<(f64, f64)>,
}

impl TmRun {
    fn new(
        scene: &Scene,
        domain: &Domain,
        params: &SolverParams,
        with_contrast: bool,
    ) -> Result<Self, ForwardError> {
        let (nx, ny, h) = (domain.nx, domain.ny, domain.h);
        let tau = params.time_step;
        let constants = &scene.constants;
        let mu0 = constants.mu0;
        let match_ratio = mu0 / constants.eps0;

        let w = nx + 1;
        let mut ca = vec![0.0; w * (ny + 1)];
        let mut cb = vec![0.0; w * (ny + 1)];
        let mut eps = vec![0.0; w * (ny + 1)];
        for j in 0..=ny {
            for i in 0..=nx {
                let (x, y) = (domain.x0 + i as f64 * h, domain.y0 + j as f64 * h);
                let e = if with_contrast {
                    permittivity_at(scene, &[x, y, 0.0])
                } else {
                    constants.eps0
                };
                let (a, b) = e_coefficients(e, domain.sigma_e(x, y), tau, h);
                ca[j * w + i] = a;
                cb[j * w + i] = b;
                eps[j * w + i] = e;
            }
        }

        let mut da_hx = vec![0.0; w * ny];
        let mut db_hx = vec![0.0; w * ny];
        for j in 0..ny {
            for i in 0..=nx {
                let (x, y) = (domain.x0 + i as f64 * h, domain.y0 + (j as f64 + 0.5) * h);
                let (a, b) = h_coefficients(mu0, domain.sigma_e(x, y) * match_ratio, tau, h);
                da_hx[j * w + i] = a;
                db_hx[j * w + i] = b;
            }
        }
        let mut da_hy = vec![0.0; nx * (ny + 1)];
        let mut db_hy = vec![0.0; nx * (ny + 1)];
        for j in 0..=ny {
            for i in 0..nx {
                let (x, y) = (domain.x0 + (i as f64 + 0.5) * h, domain.y0 + j as f64 * h);
                let (a, b) = h_coefficients(mu0, domain.sigma_e(x, y) * match_ratio, tau, h);
                da_hy[j * nx + i] = a;
                db_hy[j * nx + i] = b;
            }
        }

        let src = (scene.source.location[0], scene.source.location[1]);
        let stencil_hx = mollifier_stencil(w, ny, (0.0, 0.5), domain, src, params.source_radius_cells)?;
        let stencil_hy = mollifier_stencil(nx, ny + 1, (0.5, 0.0), domain, src, params.source_radius_cells)?;

        let receivers = scene
            .receivers
            .positions
            .iter()
            .map(|p| ((p[0] - domain.x0) / h, (p[1] - domain.y0) / h))
            .collect();

        Ok(Self {
            nx,
            ny,
            ez: vec![0.0; w * (ny + 1)],
            hx: vec![0.0; w * ny],
            hy: vec![0.0; nx * (ny + 1)],
            ca,
            cb,
            da_hx,
            db_hx,
            da_hy,
            db_hy,
            eps,
            stencil_hx,
            stencil_hy,
            pol: [scene.source.polarization[0], scene.source.polarization[1]],
            src_coef: tau / mu0,
            mu0,
            h,
            receivers,
        })
    }

    /// Discrete field energy `sum(eps Ez^2 + mu0 |H|^2) h^2`.
    #[cfg_attr(not(test), allow(dead_code))]
    fn energy(&self) -> f64 {
        let e: f64 = self
            .ez
            .iter()
            .zip(&self.eps)
            .map(|(v, eps)| eps * v * v)
            .sum();
        let hm: f64 = self.hx.iter().chain(&self.hy).map(|v| self.mu0 * v * v).sum();
        (e + hm) * self.h * self.h
    }
}

impl FieldRun for TmRun {
    fn advance(&mut self, chi: f64) {
        let (nx, ny) = (self.nx, self.ny);
        let w = nx + 1;

        let ez = &self.ez;
        self.hx
            .par_chunks_mut(w)
            .zip(self.da_hx.par_chunks(w).zip(self.db_hx.par_chunks(w)))
            .enumerate()
            .for_each(|(j, (hx_row, (da, db)))| {
                let ez_row = &ez[j * w..(j + 1) * w];
                let ez_next = &ez[(j + 1) * w..(j + 2) * w];
                for i in 0..w {
                    hx_row[i] = da[i] * hx_row[i] - db[i] * (ez_next[i] - ez_row[i]);
                }
            });
        self.hy
            .par_chunks_mut(nx)
            .zip(self.da_hy.par_chunks(nx).zip(self.db_hy.par_chunks(nx)))
            .enumerate()
            .for_each(|(j, (hy_row, (da, db)))| {
                let ez_row = &ez[j * w..(j + 1) * w];
                for i in 0..nx {
                    hy_row[i] = da[i] * hy_row[i] + db[i] * (ez_row[i + 1] - ez_row[i]);
                }
            });

        for &(idx, phi) in &self.stencil_hx {
            self.hx[idx] += self.src_coef * chi * self.pol[0] * phi;
        }
        for &(idx, phi) in &self.stencil_hy {
            self.hy[idx] += self.src_coef * chi * self.pol[1] * phi;
        }

        let hx = &self.hx;
        let hy = &self.hy;
        self.ez
            .par_chunks_mut(w)
            .zip(self.ca.par_chunks(w).zip(self.cb.par_chunks(w)))
            .enumerate()
            .for_each(|(j, (ez_row, (ca, cb)))| {
                if j == 0 || j >= ny {
                    return; // PEC boundary rows
                }
                let hy_row = &hy[j * nx..(j + 1) * nx];
                let hx_row = &hx[j * w..(j + 1) * w];
                let hx_prev = &hx[(j - 1) * w..j * w];
                for i in 1..nx {
                    ez_row[i] = ca[i] * ez_row[i]
                        + cb[i] * ((hy_row[i] - hy_row[i - 1]) - (hx_row[i] - hx_prev[i]));
                }
            });
    }

    fn sample_into(&self, out: &mut [f64]) {
        let w = self.nx + 1;
        for (m, &(fx, fy)) in self.receivers.iter().enumerate() {
            out[m] = bilinear(&self.ez, w, self.ny + 1, fx, fy);
        }
    }

    fn is_finite(&self) -> bool {
        self.ez.iter().all(|v| v.is_finite())
    }
}

/// TE run: Hz on cell centers, Ex/Ey on edge midpoints.
struct TeRun {
    nx: usize,
    ny: usize,
    hz: Vec<f64>,
    ex: Vec<f64>,
    ey: Vec<f64>,
    ca_ex: Vec<f64>,
    cb_ex: Vec<f64>,
    ca_ey: Vec<f64>,
    cb_ey: Vec<f64>,
    da_hz: Vec<f64>,
    db_hz: Vec<f64>,
    stencil_hz: Vec<(usize, f64)>,
    src_coef: f64,
    receivers: Vec<(f64, f64)>,
}

impl TeRun {
    fn new(
        scene: &Scene,
        domain: &Domain,
        params: &SolverParams,
        with_contrast: bool,
    ) -> Result<Self, ForwardError> {
        let (nx, ny, h) = (domain.nx, domain.ny, domain.h);
        let tau = params.time_step;
        let constants = &scene.constants;
        let mu0 = constants.mu0;
        let match_ratio = mu0 / constants.eps0;
        let eps_at = |x: f64, y: f64| {
            if with_contrast {
                permittivity_at(scene, &[x, y, 0.0])
            } else {
                constants.eps0
            }
        };

        let mut ca_ex = vec![0.0; nx * (ny + 1)];
        let mut cb_ex = vec![0.0; nx * (ny + 1)];
        for j in 0..=ny {
            for i in 0..nx {
                let (x, y) = (domain.x0 + (i as f64 + 0.5) * h, domain.y0 + j as f64 * h);
                let (a, b) = e_coefficients(eps_at(x, y), domain.sigma_e(x, y), tau, h);
                ca_ex[j * nx + i] = a;
                cb_ex[j * nx + i] = b;
            }
        }
        let w = nx + 1;
        let mut ca_ey = vec![0.0; w * ny];
        let mut cb_ey = vec![0.0; w * ny];
        for j in 0..ny {
            for i in 0..=nx {
                let (x, y) = (domain.x0 + i as f64 * h, domain.y0 + (j as f64 + 0.5) * h);
                let (a, b) = e_coefficients(eps_at(x, y), domain.sigma_e(x, y), tau, h);
                ca_ey[j * w + i] = a;
                cb_ey[j * w + i] = b;
            }
        }
        let mut da_hz = vec![0.0; nx * ny];
        let mut db_hz = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (
                    domain.x0 + (i as f64 + 0.5) * h,
                    domain.y0 + (j as f64 + 0.5) * h,
                );
                let (a, b) = h_coefficients(mu0, domain.sigma_e(x, y) * match_ratio, tau, h);
                da_hz[j * nx + i] = a;
                db_hz[j * nx + i] = b;
            }
        }

        let src = (scene.source.location[0], scene.source.location[1]);
        let stencil_hz =
            mollifier_stencil(nx, ny, (0.5, 0.5), domain, src, params.source_radius_cells)?;

        let receivers = scene
            .receivers
            .positions
            .iter()
            .map(|p| ((p[0] - domain.x0) / h, (p[1] - domain.y0) / h))
            .collect();

        Ok(Self {
            nx,
            ny,
            hz: vec![0.0; nx * ny],
            ex: vec![0.0; nx * (ny + 1)],
            ey: vec![0.0; w * ny],
            ca_ex,
            cb_ex,
            ca_ey,
            cb_ey,
            da_hz,
            db_hz,
            stencil_hz,
            src_coef: tau / mu0,
            receivers,
        })
    }
}

impl FieldRun for TeRun {
    fn advance(&mut self, chi: f64) {
        let (nx, ny) = (self.nx, self.ny);
        let w = nx + 1;

        let ex = &self.ex;
        let ey = &self.ey;
        self.hz
            .par_chunks_mut(nx)
            .zip(self.da_hz.par_chunks(nx).zip(self.db_hz.par_chunks(nx)))
            .enumerate()
            .for_each(|(j, (hz_row, (da, db)))| {
                let ey_row = &ey[j * w..(j + 1) * w];
                let ex_row = &ex[j * nx..(j + 1) * nx];
                let ex_next = &ex[(j + 1) * nx..(j + 2) * nx];
                for i in 0..nx {
                    let curl = (ey_row[i + 1] - ey_row[i]) - (ex_next[i] - ex_row[i]);
                    hz_row[i] = da[i] * hz_row[i] - db[i] * curl;
                }
            });
        for &(idx, phi) in &self.stencil_hz {
            self.hz[idx] += self.src_coef * chi * phi;
        }

        let hz = &self.hz;
        self.ex
            .par_chunks_mut(nx)
            .zip(self.ca_ex.par_chunks(nx).zip(self.cb_ex.par_chunks(nx)))
            .enumerate()
            .for_each(|(j, (ex_row, (ca, cb)))| {
                if j == 0 || j >= ny {
                    return; // Ex is tangential on the y boundaries: PEC
                }
                let hz_row = &hz[j * nx..(j + 1) * nx];
                let hz_prev = &hz[(j - 1) * nx..j * nx];
                for i in 0..nx {
                    ex_row[i] = ca[i] * ex_row[i] + cb[i] * (hz_row[i] - hz_prev[i]);
                }
            });
        self.ey
            .par_chunks_mut(w)
            .zip(self.ca_ey.par_chunks(w).zip(self.cb_ey.par_chunks(w)))
            .enumerate()
            .for_each(|(j, (ey_row, (ca, cb)))| {
                let hz_row = &hz[j * nx..(j + 1) * nx];
                for i in 1..nx {
                    ey_row[i] = ca[i] * ey_row[i] - cb[i] * (hz_row[i] - hz_row[i - 1]);
                }
            });
    }

    fn sample_into(&self, out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for (m, &(fx, fy)) in self.receivers.iter().enumerate() {
            out[2 * m] = bilinear(&self.ex, nx, ny + 1, fx - 0.5, fy);
            out[2 * m + 1] = bilinear(&self.ey, nx + 1, ny, fx, fy - 0.5);
        }
    }

    fn is_finite(&self) -> bool {
        self.hz.iter().all(|v| v.is_finite())
    }
}

/// Step a run to the final time, recording receiver samples after every E
/// update. Sample 0 (all zeros) is the initial state.
fn drive(
    run: &mut dyn FieldRun,
    chi: &[f64],
    n_receivers: usize,
    components: usize,
) -> Result<Vec<f64>, ForwardError> {
    let n_steps = chi.len();
    let frame = n_receivers * components;
    let mut samples = vec![0.0; (n_steps + 1) * frame];
    for step in 0..n_steps {
        run.advance(chi[step]);
        let out = &mut samples[(step + 1) * frame..(step + 2) * frame];
        run.sample_into(out);
        if step % STABILITY_CHECK_INTERVAL == STABILITY_CHECK_INTERVAL - 1 && !run.is_finite() {
            return Err(ForwardError::Instability { step });
        }
    }
    Ok(samples)
}

/// Generate scattered-field traces for a 2D scene: two identical leapfrog
/// runs (scene permittivity and vacuum background) driven by the same
/// mollified dipole source, subtracted and sampled at the receivers by
/// bilinear interpolation each step.
pub fn run_forward_2d(
    scene: &Scene,
    params: &SolverParams,
    mode: Mode2d,
    t_final: f64,
) -> Result<TraceSet, ForwardError> {
    if scene.dim() != 2 {
        return Err(ForwardError::SolverNeeds2d(scene.dim()));
    }
    if !(t_final > 0.0) {
        return Err(ForwardError::NonPositiveDuration(t_final));
    }
    if mode == Mode2d::Tm {
        let p = &scene.source.polarization;
        if p[0] * p[0] + p[1] * p[1] == 0.0 {
            return Err(ForwardError::ZeroPolarization);
        }
    }
    let report = check_cfl(params, &scene.constants, scene.source.pulse.f0);
    if !report.ok {
        return Err(ForwardError::CflViolation {
            ratio: report.cfl_ratio,
        });
    }
    let tau = params.time_step;
    let n_steps = (t_final / tau).round() as usize;
    if n_steps == 0 {
        return Err(ForwardError::NoTimeSteps);
    }

    let domain = Domain::build(scene, params);
    for (index, p) in scene.receivers.positions.iter().enumerate() {
        if !domain.contains_interior(p[0], p[1], domain.h) {
            return Err(ForwardError::ReceiverOutsideDomain { index });
        }
    }
    let src_margin = (params.source_radius_cells + 1.0) * domain.h;
    if !domain.contains_interior(scene.source.location[0], scene.source.location[1], src_margin) {
        return Err(ForwardError::SourceOutsideDomain);
    }

    // Pulse at the E time levels; the H update centered at t_n consumes chi(t_n).
    let chi: Vec<f64> = (0..n_steps)
        .map(|n| scene.source.pulse.eval(n as f64 * tau))
        .collect();

    let nr = scene.receivers.len();
    let nc = mode.components();
    let (background, total) = match mode {
        Mode2d::Tm => {
            let mut bg = TmRun::new(scene, &domain, params, false)?;
            let mut tot = TmRun::new(scene, &domain, params, true)?;
            (
                drive(&mut bg, &chi, nr, nc)?,
                drive(&mut tot, &chi, nr, nc)?,
            )
        }
        Mode2d::Te => {
            let mut bg = TeRun::new(scene, &domain, params, false)?;
            let mut tot = TeRun::new(scene, &domain, params, true)?;
            (
                drive(&mut bg, &chi, nr, nc)?,
                drive(&mut tot, &chi, nr, nc)?,
            )
        }
    };

    // samples are frame-major (time), traces are receiver-major.
    let n_samples = n_steps + 1;
    let mut values = vec![0.0; nr * n_samples * nc];
    for n in 0..n_samples {
        for m in 0..nr {
            for c in 0..nc {
                let v = total[(n * nr + m) * nc + c] - background[(n * nr + m) * nc + c];
                values[(m * n_samples + n) * nc + c] = v;
            }
        }
    }
    TraceSet::from_values(scene.receivers.positions.clone(), tau, n_samples, nc, values)
}
