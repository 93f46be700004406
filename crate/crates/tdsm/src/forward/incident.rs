//! Analytic incident fields of the modulated magnetic dipole.
//!
//! All three modes derive from the retarded kernel
//! `G_chi(x, y; t) = chi(t - |x-y|/c0) / (4 pi |x-y|)`: the TM field is the
//! scalar curl of `p G_chi`, the TE field the perpendicular gradient of
//! `G_chi`, and the 3D field the curl of `p G_chi`. Spatial derivatives are
//! taken by the analytic chain rule (the pulse supplies `chi'`).

use std::f64::consts::PI;

use super::ForwardError;
use crate::scene::{Point, SourceSpec};

/// Retarded kernel `chi(t - r/c0) / (4 pi r)`.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn retarded_kernel(
    x: &Point,
    t: f64,
    source: &SourceSpec,
    c0: f64,
) -> Result<f64, ForwardError> {
    let y = &source.location;
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r == 0.0 {
        return Err(ForwardError::SourcePointSingular);
    }
    Ok(source.pulse.eval(t - r / c0) / (4.0 * PI * r))
}

/// Gradient of the retarded kernel with respect to `x`:
/// `r_hat (-chi'(t_r) / (4 pi r c0) - chi(t_r) / (4 pi r^2))`.
pub(crate) fn retarded_kernel_gradient(
    x: &Point,
    t: f64,
    source: &SourceSpec,
    c0: f64,
) -> Result<[f64; 3], ForwardError> {
    let y = &source.location;
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r == 0.0 {
        return Err(ForwardError::SourcePointSingular);
    }
    let tr = t - r / c0;
    let radial =
        -source.pulse.eval_derivative(tr) / (4.0 * PI * r * c0) - source.pulse.eval(tr) / (4.0 * PI * r * r);
    Ok([d[0] / r * radial, d[1] / r * radial, d[2] / r * radial])
}

/// TM incident field: `p2 dG/dx1 - p1 dG/dx2`.
pub fn incident_tm(x: &Point, t: f64, source: &SourceSpec, c0: f64) -> Result<f64, ForwardError> {
    let g = retarded_kernel_gradient(x, t, source, c0)?;
    let p = &source.polarization;
    Ok(p[1] * g[0] - p[0] * g[1])
}

/// TE incident field: the perpendicular gradient `(dG/dx2, -dG/dx1)`.
pub fn incident_te(
    x: &Point,
    t: f64,
    source: &SourceSpec,
    c0: f64,
) -> Result<[f64; 2], ForwardError> {
    let g = retarded_kernel_gradient(x, t, source, c0)?;
    Ok([g[1], -g[0]])
}

/// 3D incident field: `curl(p G_chi) = grad G_chi x p`.
pub fn incident_3d(
    x: &Point,
    t: f64,
    source: &SourceSpec,
    c0: f64,
) -> Result<[f64; 3], ForwardError> {
    let g = retarded_kernel_gradient(x, t, source, c0)?;
    let p = &source.polarization;
    Ok([
        g[1] * p[2] - g[2] * p[1],
        g[2] * p[0] - g[0] * p[2],
        g[0] * p[1] - g[1] * p[0],
    ])
}
