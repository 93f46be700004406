//! Special functions behind the indicator analysis: modified spherical
//! Bessel functions of orders 0 and 2, the closed-form sphere integral of
//! `(I - xx^T) e^{s x.z}`, the frequency-domain dyadic Green's function of
//! the Maxwell curl-curl operator, and a product-rule sphere quadrature used
//! as the independent oracle for the closed form.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecFunError {
    #[error("modified spherical Bessel argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("only orders 0 and 2 are implemented, got {0}")]
    UnsupportedOrder(u32),
    #[error("sphere quadrature order must be at least 8, got {0}")]
    QuadratureOrderTooSmall(usize),
    #[error("integrand produced a non-finite entry")]
    NonFiniteIntegrand,
    #[error("sigma must be nonnegative, got {0}")]
    NegativeSigma(f64),
    #[error("c0 must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("observation and source points coincide")]
    CoincidentPoints,
    #[error("frequency must be nonzero")]
    ZeroFrequency,
    #[error("frequency must have nonnegative imaginary part, got {0}")]
    NegativeImagFrequency(f64),
}

/// Below these arguments the closed forms of i0/i2 lose digits to
/// cancellation and a short Taylor series is used instead.
const I0_SERIES_THRESHOLD: f64 = 1e-2;
const I2_SERIES_THRESHOLD: f64 = 1e-1;

/// Modified spherical Bessel function of the first kind, orders 0 and 2.
///
/// `i0(x) = sinh(x)/x`, `i2(x) = ((x^2 + 3) sinh(x) - 3 x cosh(x)) / x^3`,
/// with exact limits `i0(0) = 1`, `i2(0) = 0` and a series branch near zero.
pub fn mod_sph_bessel_i(n: u32, x: f64) -> Result<f64, SpecFunError> {
    if !(x >= 0.0) {
        return Err(SpecFunError::NegativeArgument(x));
    }
    match n {
        0 => Ok(if x < I0_SERIES_THRESHOLD {
            i0_series(x)
        } else {
            x.sinh() / x
        }),
        2 => Ok(if x < I2_SERIES_THRESHOLD {
            i2_series(x)
        } else {
            ((x * x + 3.0) * x.sinh() - 3.0 * x * x.cosh()) / (x * x * x)
        }),
        other => Err(SpecFunError::UnsupportedOrder(other)),
    }
}

fn i0_series(x: f64) -> f64 {
    let x2 = x * x;
    1.0 + x2 / 6.0 + x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0
}

fn i2_series(x: f64) -> f64 {
    let x2 = x * x;
    x2 * (1.0 / 15.0 + x2 / 210.0 + x2 * x2 / 7560.0 + x2 * x2 * x2 / 498_960.0)
}

/// 3x3 complex dyadic. Real-valued results (the Bessel sphere integral) are
/// stored with zero imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dyadic3 {
    pub m: [[Complex64; 3]; 3],
}

impl Dyadic3 {
    pub fn zeros() -> Self {
        Self {
            m: [[Complex64::new(0.0, 0.0); 3]; 3],
        }
    }

    pub fn identity() -> Self {
        let mut d = Self::zeros();
        for i in 0..3 {
            d.m[i][i] = Complex64::new(1.0, 0.0);
        }
        d
    }

    /// Outer product `v v^T` of a real 3-vector.
    pub fn outer(v: &[f64; 3]) -> Self {
        let mut d = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                d.m[i][j] = Complex64::new(v[i] * v[j], 0.0);
            }
        }
        d
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut d = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                d.m[i][j] = self.m[i][j] + other.m[i][j];
            }
        }
        d
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut d = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                d.m[i][j] = self.m[i][j] - other.m[i][j];
            }
        }
        d
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_complex(Complex64::new(s, 0.0))
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        let mut d = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                d.m[i][j] = s * self.m[i][j];
            }
        }
        d
    }

    pub fn mul_vec(&self, v: &[Complex64; 3]) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i] += self.m[i][j] * v[j];
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .flatten()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Closed form of the sphere integral
/// `integral_{S^2} (I - xx^T) e^{sigma/c0 x.z} ds(x)
///  = (8 pi / 3) i0(sigma |z| / c0) I
///  + (4 pi / 3) (I - 3 zz^T) i2(sigma |z| / c0)`.
///
/// At `z = 0` the second term vanishes (`i2(0) = 0`) and the result is
/// `(8 pi / 3) I`.
pub fn lemma1_closed_form(z: &[f64; 3], sigma: f64, c0: f64) -> Result<Dyadic3, SpecFunError> {
    if !(sigma >= 0.0) {
        return Err(SpecFunError::NegativeSigma(sigma));
    }
    if !(c0 > 0.0) {
        return Err(SpecFunError::NonPositiveSpeed(c0));
    }
    let norm = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
    let arg = sigma * norm / c0;
    let i0 = mod_sph_bessel_i(0, arg)?;
    let i2 = mod_sph_bessel_i(2, arg)?;
    let first = Dyadic3::identity().scale(8.0 * PI / 3.0 * i0);
    if norm == 0.0 {
        return Ok(first);
    }
    let zhat = [z[0] / norm, z[1] / norm, z[2] / norm];
    let second = Dyadic3::identity()
        .sub(&Dyadic3::outer(&zhat).scale(3.0))
        .scale(4.0 * PI / 3.0 * i2);
    Ok(first.add(&second))
}

/// Gauss-Legendre nodes and weights on (-1, 1) by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Product-rule quadrature of a matrix-valued function over the unit sphere:
/// Gauss-Legendre in cos(theta) with `order` nodes times `2 * order` uniform
/// azimuth nodes.
pub fn sphere_quadrature_oracle(
    f: impl Fn(&[f64; 3]) -> Dyadic3,
    order: usize,
) -> Result<Dyadic3, SpecFunError> {
    if order < 8 {
        return Err(SpecFunError::QuadratureOrderTooSmall(order));
    }
    let (nodes, weights) = gauss_legendre(order);
    let n_phi = 2 * order;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut acc = Dyadic3::zeros();
    for (u, wu) in nodes.iter().zip(&weights) {
        let sin_theta = (1.0 - u * u).sqrt();
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            let xhat = [sin_theta * phi.cos(), sin_theta * phi.sin(), *u];
            let val = f(&xhat);
            if !val.is_finite() {
                return Err(SpecFunError::NonFiniteIntegrand);
            }
            acc = acc.add(&val.scale(wu * dphi));
        }
    }
    Ok(acc)
}

/// Frequency-domain dyadic Green's function of the Maxwell curl-curl
/// operator,
/// `Phi_omega(x, y) = (I + (omega^2 mu0 eps0)^{-1} grad grad^T)
///  e^{i omega |x-y| / c0} / (4 pi |x-y|)`,
/// evaluated through the analytic Hessian of the scalar kernel: with
/// `k = omega / c0`, `r = |x - y|` and `g = e^{i k r} / (4 pi r)`,
/// `Phi = g [ (1 + i/(kr) - 1/(kr)^2) I - (1 + 3i/(kr) - 3/(kr)^2) rr^T ]`.
pub fn dyadic_green_freq(
    x: &[f64; 3],
    y: &[f64; 3],
    omega: Complex64,
    eps0: f64,
    mu0: f64,
) -> Result<Dyadic3, SpecFunError> {
    if omega.norm() == 0.0 {
        return Err(SpecFunError::ZeroFrequency);
    }
    if omega.im < 0.0 {
        return Err(SpecFunError::NegativeImagFrequency(omega.im));
    }
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r == 0.0 {
        return Err(SpecFunError::CoincidentPoints);
    }
    let c0 = 1.0 / (mu0 * eps0).sqrt();
    let k = omega / c0;
    let kr = k * r;
    let g = (Complex64::i() * kr).exp() / (4.0 * PI * r);
    let inv = 1.0 / kr;
    let inv2 = inv * inv;
    let coeff_id = Complex64::new(1.0, 0.0) + Complex64::i() * inv - inv2;
    let coeff_rr = Complex64::new(1.0, 0.0) + 3.0 * Complex64::i() * inv - 3.0 * inv2;
    let rhat = [d[0] / r, d[1] / r, d[2] / r];
    let phi = Dyadic3::identity()
        .scale_complex(coeff_id)
        .sub(&Dyadic3::outer(&rhat).scale_complex(coeff_rr))
        .scale_complex(g);
    Ok(phi)
}
