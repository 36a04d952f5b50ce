//! Prior log densities. The `*_grad` variants also return partial
//! derivatives and are what the joint density uses.

use alloc::format;

use libm::{log, log1p};

use crate::error::{domain, Result};
use crate::math::LN_SQRT_2PI;
use crate::transform::CorrelationFactor;

const LN_2: f64 = core::f64::consts::LN_2;
const LN_PI: f64 = 1.144_729_885_849_400_2;

/// `log N(x | mu, sigma)` and its derivatives with respect to `x`, `mu` and
/// `sigma`.
#[derive(Debug, Clone, Copy)]
pub struct NormalGrad {
    pub value: f64,
    pub d_x: f64,
    pub d_mu: f64,
    pub d_sigma: f64,
}

#[inline]
pub fn normal_lpdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - log(sigma) - LN_SQRT_2PI
}

#[inline]
pub fn normal_lpdf_grad(x: f64, mu: f64, sigma: f64) -> NormalGrad {
    let r = x - mu;
    let inv = 1.0 / sigma;
    let z = r * inv;
    NormalGrad {
        value: -0.5 * z * z - log(sigma) - LN_SQRT_2PI,
        d_x: -z * inv,
        d_mu: z * inv,
        d_sigma: (z * z - 1.0) * inv,
    }
}

/// Half-normal on `(0, ∞)`: value and derivative with respect to `x`.
#[inline]
pub fn half_normal_lpdf_grad(x: f64, scale: f64) -> (f64, f64) {
    let g = normal_lpdf_grad(x, 0.0, scale);
    (LN_2 + g.value, g.d_x)
}

/// Half-Cauchy on `(0, ∞)`: value and derivative with respect to `x`.
#[inline]
pub fn half_cauchy_lpdf_grad(x: f64, scale: f64) -> (f64, f64) {
    let u = x / scale;
    let value = LN_2 - LN_PI - log(scale) - log1p(u * u);
    (value, -2.0 * x / (scale * scale + x * x))
}

/// `log(2 / (π·scale·(1 + (x/scale)²)))` for `x > 0`.
pub fn half_cauchy_log_prior(x: f64, scale: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("half-Cauchy argument {x} must be positive")));
    }
    if !(scale > 0.0) {
        return Err(domain(format!("half-Cauchy scale {scale} must be positive")));
    }
    Ok(half_cauchy_lpdf_grad(x, scale).0)
}

/// LKJ(η) kernel in Cholesky form, `Σ_{k≥2} (K − k + 2η − 2) · log L_kk`
/// (1-based `k`), without its normalizing constant.
pub fn lkj_cholesky_log_prior(l: &CorrelationFactor, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(domain(format!("LKJ shape {eta} must be positive")));
    }
    l.validate(1e-10)?;
    Ok(lkj_kernel(l.dim(), l.as_slice(), eta, None))
}

/// Shared kernel; when `grad` is given, `∂/∂L_kk` is added to its diagonal.
pub(crate) fn lkj_kernel(k: usize, l: &[f64], eta: f64, grad: Option<&mut [f64]>) -> f64 {
    let mut total = 0.0;
    let mut grad = grad;
    for i in 1..k {
        let coef = (k - i) as f64 + 2.0 * eta - 3.0;
        let d = l[i * k + i];
        total += coef * log(d);
        if let Some(g) = grad.as_deref_mut() {
            g[i * k + i] += coef / d;
        }
    }
    total
}
