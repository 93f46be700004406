//! Experiment description: physical constants, scatterers, source, receiver
//! array and sampling grid, with geometric sanity enforced at build time.
//!
//! Points are `[f64; 3]` throughout; 2D scenes live in the z = 0 plane, so
//! distances and box tests work unchanged in both dimensions.

use thiserror::Error;

use crate::waveform::PulseSpec;

/// A point or vector in 3-space; 2D configurations set the z component to 0.
pub type Point = [f64; 3];

pub fn dist(a: &Point, b: &Point) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

pub fn norm(v: &Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("physical constant {name} must be positive, got {value}")]
    NonPositiveConstant { name: &'static str, value: f64 },
    #[error("sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("scatterer {index}: relative permittivity must be positive, got {eps_r}")]
    NonPositivePermittivity { index: usize, eps_r: f64 },
    #[error("scatterer {index}: half-width along axis {axis} must be positive, got {value}")]
    NonPositiveHalfWidth {
        index: usize,
        axis: usize,
        value: f64,
    },
    #[error("scatterer {index}: center must lie in the z = 0 plane for a 2D scene")]
    ScattererOffPlane { index: usize },
    #[error("scatterer {index}: center lies outside the sampling extents")]
    ScattererOutsideGrid { index: usize },
    #[error("receiver {receiver} lies inside scatterer {scatterer}")]
    ReceiverInsideScatterer { receiver: usize, scatterer: usize },
    #[error("source lies inside scatterer {0}")]
    SourceInsideScatterer(usize),
    #[error("source lies inside the sampling extents")]
    SourceInsideSamplingExtents,
    #[error("source must lie in the z = 0 plane for a 2D scene")]
    SourceOffPlane,
    #[error("receiver layout dimension {receivers} does not match grid dimension {grid}")]
    DimensionMismatch { receivers: usize, grid: usize },
    #[error("circle receiver count must be at least 1, got {0}")]
    EmptyReceiverCircle(usize),
    #[error("cube per-face receiver count {0} is not a perfect square")]
    CubeCountNotSquare(usize),
    #[error("receiver radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("circle receiver center must lie in the z = 0 plane")]
    CircleCenterOffPlane,
    #[error("grid dimension must be 2 or 3, got {0}")]
    BadGridDimension(usize),
    #[error("grid needs at least 2 cells per axis, got {0}")]
    GridTooCoarse(usize),
    #[error("grid extents along axis {axis} are empty: [{min}, {max}]")]
    EmptyExtents { axis: usize, min: f64, max: f64 },
    #[error("aperture restriction requires a 2D circle receiver layout")]
    ApertureNeedsCircle,
    #[error("aperture [{theta_min}, {theta_max}] selects no receivers")]
    EmptyAperture { theta_min: f64, theta_max: f64 },
}

/// Vacuum permittivity, permeability and the Fourier-Laplace damping
/// constant used by the imaging functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Electric permittivity of vacuum in F/m.
    pub eps0: f64,
    /// Magnetic permeability of vacuum in H/m.
    pub mu0: f64,
    /// Fourier-Laplace damping in 1/s; 0 disables the damping.
    pub sigma: f64,
}

impl PhysicalConstants {
    pub const VACUUM_EPS0: f64 = 8.854_187_817e-12;
    pub const VACUUM_MU0: f64 = 1.256_637_061_4e-6;

    pub fn vacuum() -> Self {
        Self {
            eps0: Self::VACUUM_EPS0,
            mu0: Self::VACUUM_MU0,
            sigma: 0.0,
        }
    }

    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::vacuum()
        }
    }

    /// Wave speed `c0 = 1 / sqrt(mu0 eps0)` in m/s.
    pub fn c0(&self) -> f64 {
        1.0 / (self.mu0 * self.eps0).sqrt()
    }

    fn validate(&self) -> Result<(), SceneError> {
        if !(self.eps0 > 0.0) {
            return Err(SceneError::NonPositiveConstant {
                name: "eps0",
                value: self.eps0,
            });
        }
        if !(self.mu0 > 0.0) {
            return Err(SceneError::NonPositiveConstant {
                name: "mu0",
                value: self.mu0,
            });
        }
        if !(self.sigma >= 0.0) {
            return Err(SceneError::NegativeSigma(self.sigma));
        }
        Ok(())
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::vacuum()
    }
}

/// Axis-aligned dielectric box: center, per-axis half-widths, relative
/// permittivity. Membership is closed (the boundary counts as inside).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub center: Point,
    pub half_widths: [f64; 3],
    pub eps_r: f64,
}

impl Scatterer {
    /// Cube of side `side` centered at `center`.
    pub fn cube(center: Point, side: f64, eps_r: f64) -> Self {
        let hw = side / 2.0;
        Self {
            center,
            half_widths: [hw, hw, hw],
            eps_r,
        }
    }

    /// Closed-box membership over the first `dim` axes.
    pub fn contains(&self, p: &Point, dim: usize) -> bool {
        (0..dim).all(|i| (p[i] - self.center[i]).abs() <= self.half_widths[i])
    }

    /// Euclidean distance between two boxes over the first `dim` axes;
    /// zero when they touch or overlap.
    pub fn box_distance(&self, other: &Self, dim: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..dim {
            let gap = (self.center[i] - other.center[i]).abs()
                - (self.half_widths[i] + other.half_widths[i]);
            if gap > 0.0 {
                acc += gap * gap;
            }
        }
        acc.sqrt()
    }
}

/// Receiver geometry: a circle in the z = 0 plane or the faces of a cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReceiverLayout {
    Circle {
        center: Point,
        radius: f64,
        count: usize,
    },
    Cube {
        half_width: f64,
        per_face: usize,
    },
}

/// Receiver positions derived from a [`ReceiverLayout`].
///
/// Circle receivers are equidistant in angle starting at angle 0 (positive
/// x-axis); cube receivers form a per-face interior lattice offset half a
/// step from the edges so no receiver is shared between faces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverArray {
    pub layout: ReceiverLayout,
    pub positions: Vec<Point>,
}

impl ReceiverArray {
    pub fn new(layout: ReceiverLayout) -> Result<Self, SceneError> {
        let positions = match layout {
            ReceiverLayout::Circle {
                center,
                radius,
                count,
            } => {
                if count == 0 {
                    return Err(SceneError::EmptyReceiverCircle(count));
                }
                if !(radius > 0.0) {
                    return Err(SceneError::NonPositiveRadius(radius));
                }
                if center[2] != 0.0 {
                    return Err(SceneError::CircleCenterOffPlane);
                }
                (0..count)
                    .map(|m| {
                        let theta = 2.0 * std::f64::consts::PI * m as f64 / count as f64;
                        [
                            center[0] + radius * theta.cos(),
                            center[1] + radius * theta.sin(),
                            0.0,
                        ]
                    })
                    .collect()
            }
            ReceiverLayout::Cube {
                half_width,
                per_face,
            } => {
                if !(half_width > 0.0) {
                    return Err(SceneError::NonPositiveRadius(half_width));
                }
                let k = (per_face as f64).sqrt().round() as usize;
                if k * k != per_face || k == 0 {
                    return Err(SceneError::CubeCountNotSquare(per_face));
                }
                let step = 2.0 * half_width / k as f64;
                let lattice: Vec<f64> = (0..k)
                    .map(|i| -half_width + (i as f64 + 0.5) * step)
                    .collect();
                let mut positions = Vec::with_capacity(6 * per_face);
                for axis in 0..3 {
                    for &sign in &[-1.0, 1.0] {
                        for &u in &lattice {
                            for &v in &lattice {
                                let mut p = [0.0; 3];
                                p[axis] = sign * half_width;
                                p[(axis + 1) % 3] = u;
                                p[(axis + 2) % 3] = v;
                                positions.push(p);
                            }
                        }
                    }
                }
                positions
            }
        };
        Ok(Self { layout, positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// 2 for the circle layout, 3 for the cube.
    pub fn dim(&self) -> usize {
        match self.layout {
            ReceiverLayout::Circle { .. } => 2,
            ReceiverLayout::Cube { .. } => 3,
        }
    }

    /// Surface quadrature weight of the full measurement surface:
    /// `2 pi R` for the circle, `4 pi R^2` for the cube of half-width R.
    pub fn surface_weight(&self) -> f64 {
        match self.layout {
            ReceiverLayout::Circle { radius, .. } => 2.0 * std::f64::consts::PI * radius,
            ReceiverLayout::Cube { half_width, .. } => {
                4.0 * std::f64::consts::PI * half_width * half_width
            }
        }
    }

    /// Keep only circle receivers whose angle about the circle center lies in
    /// `[theta_min, theta_max]` (radians, angles normalized to [0, 2 pi)).
    /// Returns the restricted array together with the retained indices, for
    /// filtering the matching traces. The surface weight of the restricted
    /// array still refers to the full circle; the per-receiver weight becomes
    /// `2 pi R / N_active`.
    pub fn restrict_aperture(
        &self,
        theta_min: f64,
        theta_max: f64,
    ) -> Result<(Self, Vec<usize>), SceneError> {
        let ReceiverLayout::Circle { center, radius, .. } = self.layout else {
            return Err(SceneError::ApertureNeedsCircle);
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut kept = Vec::new();
        let mut positions = Vec::new();
        for (m, p) in self.positions.iter().enumerate() {
            let mut theta = (p[1] - center[1]).atan2(p[0] - center[0]);
            if theta < 0.0 {
                theta += two_pi;
            }
            if theta >= theta_min - 1e-12 && theta <= theta_max + 1e-12 {
                kept.push(m);
                positions.push(*p);
            }
        }
        if kept.is_empty() {
            return Err(SceneError::EmptyAperture {
                theta_min,
                theta_max,
            });
        }
        let count = kept.len();
        Ok((
            Self {
                layout: ReceiverLayout::Circle {
                    center,
                    radius,
                    count,
                },
                positions,
            },
            kept,
        ))
    }
}

/// Uniform sampling mesh of cell centers over a square (2D) or cube (3D)
/// region, `n_per_axis` cells per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    pub dim: usize,
    /// Per-axis `[min, max]`; axis 2 is `[0, 0]` for 2D grids.
    pub extents: [[f64; 2]; 3],
    pub n_per_axis: usize,
}

impl SamplingGrid {
    pub fn new(dim: usize, extents: [[f64; 2]; 3], n_per_axis: usize) -> Result<Self, SceneError> {
        if dim != 2 && dim != 3 {
            return Err(SceneError::BadGridDimension(dim));
        }
        if n_per_axis < 2 {
            return Err(SceneError::GridTooCoarse(n_per_axis));
        }
        for axis in 0..dim {
            if !(extents[axis][1] > extents[axis][0]) {
                return Err(SceneError::EmptyExtents {
                    axis,
                    min: extents[axis][0],
                    max: extents[axis][1],
                });
            }
        }
        Ok(Self {
            dim,
            extents,
            n_per_axis,
        })
    }

    /// Cell size along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        (self.extents[axis][1] - self.extents[axis][0]) / self.n_per_axis as f64
    }

    pub fn n_points(&self) -> usize {
        self.n_per_axis.pow(self.dim as u32)
    }

    /// Cell-center coordinate `min + (i + 1/2) h` along `axis`.
    pub fn cell_center(&self, axis: usize, i: usize) -> f64 {
        self.extents[axis][0] + (i as f64 + 0.5) * self.spacing(axis)
    }

    /// Split a flat index into per-axis indices (x fastest).
    pub fn decompose(&self, l: usize) -> [usize; 3] {
        let n = self.n_per_axis;
        let ix = l % n;
        let iy = (l / n) % n;
        let iz = if self.dim == 3 { l / (n * n) } else { 0 };
        [ix, iy, iz]
    }

    /// Flat index from per-axis indices (x fastest).
    pub fn compose(&self, idx: [usize; 3]) -> usize {
        let n = self.n_per_axis;
        idx[0] + n * (idx[1] + if self.dim == 3 { n * idx[2] } else { 0 })
    }

    /// Sampling point `z_l`.
    pub fn point(&self, l: usize) -> Point {
        let idx = self.decompose(l);
        let mut p = [0.0; 3];
        for axis in 0..self.dim {
            p[axis] = self.cell_center(axis, idx[axis]);
        }
        p
    }

    /// All sampling points, x fastest.
    pub fn points(&self) -> Vec<Point> {
        (0..self.n_points()).map(|l| self.point(l)).collect()
    }

    /// Index of the cell containing `p` (cell centers round-trip exactly).
    pub fn nearest_index(&self, p: &Point) -> usize {
        let mut idx = [0usize; 3];
        for axis in 0..self.dim {
            let rel = (p[axis] - self.extents[axis][0]) / self.spacing(axis);
            idx[axis] = (rel.floor().max(0.0) as usize).min(self.n_per_axis - 1);
        }
        self.compose(idx)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|axis| p[axis] >= self.extents[axis][0] && p[axis] <= self.extents[axis][1])
    }
}

/// Modulated dipole source: location, polarization (unused by the TE mode),
/// and temporal modulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub location: Point,
    pub polarization: [f64; 3],
    pub pulse: PulseSpec,
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct Scene {
    pub constants: PhysicalConstants,
    pub scatterers: Vec<Scatterer>,
    pub source: SourceSpec,
    pub receivers: ReceiverArray,
    pub grid: SamplingGrid,
    /// Minimum pairwise distance between scatterer boxes; infinite for a
    /// single scatterer.
    pub min_separation: f64,
}

impl Scene {
    /// Validate all invariants and assemble the scene. The first violated
    /// invariant is reported with the offending element index.
    pub fn build(
        constants: PhysicalConstants,
        scatterers: Vec<Scatterer>,
        source: SourceSpec,
        receivers: ReceiverArray,
        grid: SamplingGrid,
    ) -> Result<Self, SceneError> {
        constants.validate()?;
        if receivers.dim() != grid.dim {
            return Err(SceneError::DimensionMismatch {
                receivers: receivers.dim(),
                grid: grid.dim,
            });
        }
        let dim = grid.dim;
        for (index, s) in scatterers.iter().enumerate() {
            if !(s.eps_r > 0.0) {
                return Err(SceneError::NonPositivePermittivity {
                    index,
                    eps_r: s.eps_r,
                });
            }
            for axis in 0..dim {
                if !(s.half_widths[axis] > 0.0) {
                    return Err(SceneError::NonPositiveHalfWidth {
                        index,
                        axis,
                        value: s.half_widths[axis],
                    });
                }
            }
            if dim == 2 && s.center[2] != 0.0 {
                return Err(SceneError::ScattererOffPlane { index });
            }
            if !grid.contains(&s.center) {
                return Err(SceneError::ScattererOutsideGrid { index });
            }
        }
        for (receiver, p) in receivers.positions.iter().enumerate() {
            for (scatterer, s) in scatterers.iter().enumerate() {
                if s.contains(p, dim) {
                    return Err(SceneError::ReceiverInsideScatterer {
                        receiver,
                        scatterer,
                    });
                }
            }
        }
        if dim == 2 && source.location[2] != 0.0 {
            return Err(SceneError::SourceOffPlane);
        }
        for (index, s) in scatterers.iter().enumerate() {
            if s.contains(&source.location, dim) {
                return Err(SceneError::SourceInsideScatterer(index));
            }
        }
        if grid.contains(&source.location) {
            return Err(SceneError::SourceInsideSamplingExtents);
        }
        let min_separation = min_box_separation(&scatterers, dim);
        Ok(Self {
            constants,
            scatterers,
            source,
            receivers,
            grid,
            min_separation,
        })
    }

    pub fn c0(&self) -> f64 {
        self.constants.c0()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }
}

fn min_box_separation(scatterers: &[Scatterer], dim: usize) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..scatterers.len() {
        for j in i + 1..scatterers.len() {
            min = min.min(scatterers[i].box_distance(&scatterers[j], dim));
        }
    }
    min
}

/// Permittivity at a point: `eps_r * eps0` inside any scatterer box (closed
/// boxes; overlaps take the largest `eps_r`), `eps0` outside.
pub fn permittivity_at(scene: &Scene, x: &Point) -> f64 {
    let dim = scene.dim();
    let mut eps_r: f64 = 1.0;
    for s in &scene.scatterers {
        if s.contains(x, dim) {
            eps_r = eps_r.max(s.eps_r);
        }
    }
    eps_r * scene.constants.eps0
}
