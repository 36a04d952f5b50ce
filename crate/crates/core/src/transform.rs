//! Maps between constrained parameters and the unconstrained space the
//! sampler works in.
//!
//! * positive scalars: `x = exp(u)`, log-Jacobian `u`;
//! * Cholesky factors of correlation matrices: each free coordinate is mapped
//!   through `tanh` to a canonical partial correlation, and row `i` of `L` is
//!   built by stick-breaking the remaining unit norm:
//!
//! ```text
//! L[i][0] = z[i][0]
//! L[i][j] = z[i][j] · sqrt(1 − Σ_{m<j} L[i][m]²)    (0 < j < i)
//! L[i][i] = sqrt(1 − Σ_{m<i} L[i][m]²)
//! ```
//!
//! with log-Jacobian `Σ log(1 − z²) + ½ Σ_{j≥1} log(1 − Σ_{m<j} L[i][m]²)`.
//!
//! * vectors over participants: the orthonormal Helmert basis, whose first
//!   coordinate is `Σx/√n` and the rest are contrasts. Orthogonal, so the
//!   log-Jacobian is 0 and gradients pull back through the forward map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{atanh, exp, fabs, log, log1p, sqrt, tanh};

use crate::error::{domain, Result};

/// Lower-triangular Cholesky factor of a correlation matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFactor {
    dim: usize,
    l: Vec<f64>,
}

impl CorrelationFactor {
    pub fn identity(dim: usize) -> Self {
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            l[i * dim + i] = 1.0;
        }
        Self { dim, l }
    }

    /// Validated construction from a row-major `dim × dim` lower-triangular
    /// matrix.
    pub fn from_lower(dim: usize, l: Vec<f64>) -> Result<Self> {
        if l.len() != dim * dim {
            return Err(domain(format!("expected {} entries, got {}", dim * dim, l.len())));
        }
        let f = Self { dim, l };
        f.validate(1e-10)?;
        Ok(f)
    }

    /// Builds the factor from canonical partial correlations in (−1, 1),
    /// ordered row by row below the diagonal.
    pub fn from_partial_correlations(dim: usize, cpcs: &[f64]) -> Result<Self> {
        if cpcs.len() != free_len(dim) {
            return Err(domain(format!(
                "a {dim}x{dim} factor needs {} partial correlations",
                free_len(dim)
            )));
        }
        if cpcs.iter().any(|z| !(fabs(*z) < 1.0)) {
            return Err(domain("partial correlations must lie in (-1, 1)"));
        }
        let y: Vec<f64> = cpcs.iter().map(|&z| atanh(z)).collect();
        let mut l = vec![0.0; dim * dim];
        constrain_cholesky_corr(&y, dim, &mut l);
        Ok(Self { dim, l })
    }

    /// Cholesky decomposition of a correlation matrix given row-major.
    pub fn from_correlation_matrix(dim: usize, r: &[f64]) -> Result<Self> {
        if r.len() != dim * dim {
            return Err(domain("correlation matrix has the wrong size"));
        }
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            if fabs(r[i * dim + i] - 1.0) > 1e-10 {
                return Err(domain("correlation matrix needs a unit diagonal"));
            }
            for j in 0..=i {
                let mut s = r[i * dim + j];
                for m in 0..j {
                    s -= l[i * dim + m] * l[j * dim + m];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(domain("correlation matrix is not positive definite"));
                    }
                    l[i * dim + i] = sqrt(s);
                } else {
                    l[i * dim + j] = s / l[j * dim + j];
                }
            }
        }
        Self::from_lower(dim, l)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.dim + j]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.l
    }

    /// `L·Lᵀ`, row-major.
    pub fn correlation_matrix(&self) -> Vec<f64> {
        let k = self.dim;
        let mut r = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|m| self.l[i * k + m] * self.l[j * k + m]).sum();
                r[i * k + j] = v;
                r[j * k + i] = v;
            }
        }
        r
    }

    /// Unconstrained coordinates (inverse of the stick-breaking map).
    pub fn unconstrain(&self) -> Vec<f64> {
        let k = self.dim;
        let mut out = Vec::with_capacity(free_len(k));
        for i in 1..k {
            let mut sum_sq = 0.0;
            for j in 0..i {
                let lij = self.l[i * k + j];
                let z = if j == 0 { lij } else { lij / sqrt(1.0 - sum_sq) };
                out.push(atanh(z));
                sum_sq += lij * lij;
            }
        }
        out
    }

    pub(crate) fn validate(&self, tol: f64) -> Result<()> {
        let k = self.dim;
        for i in 0..k {
            if !(self.l[i * k + i] > 0.0) {
                return Err(domain(format!("diagonal entry {i} of the factor is not positive")));
            }
            if (i + 1..k).any(|j| self.l[i * k + j] != 0.0) {
                return Err(domain("factor is not lower triangular"));
            }
            let norm: f64 = (0..=i).map(|j| self.l[i * k + j] * self.l[i * k + j]).sum();
            if fabs(norm - 1.0) > tol {
                return Err(domain(format!("row {i} of the factor does not have unit norm")));
            }
        }
        Ok(())
    }
}

/// Number of free coordinates of a `k × k` correlation factor.
#[inline]
pub const fn free_len(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// `log(1 − tanh(y)²)` without cancellation for large `|y|`.
#[inline]
fn log_sech2(y: f64) -> f64 {
    let a = fabs(y);
    2.0 * core::f64::consts::LN_2 - 2.0 * a - 2.0 * log1p(exp(-2.0 * a))
}

/// Fills `l` (row-major, `k × k`) from free coordinates `y`; returns the
/// log-Jacobian.
pub fn constrain_cholesky_corr(y: &[f64], k: usize, l: &mut [f64]) -> f64 {
    debug_assert_eq!(y.len(), free_len(k));
    l.iter_mut().for_each(|v| *v = 0.0);
    if k == 0 {
        return 0.0;
    }
    l[0] = 1.0;
    let mut log_jac = 0.0;
    let mut idx = 0;
    for i in 1..k {
        let mut sum_sq = 0.0;
        for j in 0..i {
            let z = tanh(y[idx]);
            log_jac += log_sech2(y[idx]);
            let lij = if j == 0 {
                z
            } else {
                let r = sqrt(1.0 - sum_sq);
                log_jac += log(r);
                z * r
            };
            l[i * k + j] = lij;
            sum_sq += lij * lij;
            idx += 1;
        }
        l[i * k + i] = sqrt((1.0 - sum_sq).max(0.0));
    }
    log_jac
}

/// Reverse-mode pass through [`constrain_cholesky_corr`]: given
/// `g_l = ∂f/∂L`, adds `∂(f + log-Jacobian)/∂y` to `g_y`.
pub fn cholesky_corr_backprop(y: &[f64], k: usize, l: &[f64], g_l: &[f64], g_y: &mut [f64]) {
    let mut idx_row_start = 0;
    let mut r = vec![0.0; k];
    for i in 1..k {
        // Recompute the stick-breaking remainders r_j = sqrt(1 − Σ_{m<j} L_im²).
        let mut sum_sq = 0.0;
        for j in 0..i {
            r[j] = sqrt(1.0 - sum_sq);
            sum_sq += l[i * k + j] * l[i * k + j];
        }
        let lii = l[i * k + i];
        let mut adj_s = g_l[i * k + i] * (-0.5 / lii);
        for j in (0..i).rev() {
            let idx = idx_row_start + j;
            let z = tanh(y[idx]);
            let lij = l[i * k + j];
            let adj_l = g_l[i * k + j] + adj_s * 2.0 * lij;
            let adj_z = if j == 0 {
                adj_l
            } else {
                let adj_r = adj_l * z + 1.0 / r[j];
                adj_s += adj_r * (-0.5 / r[j]);
                adj_l * r[j]
            };
            g_y[idx] += adj_z * (1.0 - z * z) - 2.0 * z;
        }
        idx_row_start += i;
    }
}

#[inline]
pub fn constrain_positive(u: f64) -> f64 {
    exp(u)
}

pub fn unconstrain_positive(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(log(x))
    } else {
        Err(domain(format!("{x} is not a positive finite value")))
    }
}

/// `y = H·x`: `y[0] = Σx/√n`, `y[m] = (Σ_{i<m} x[i] − m·x[m]) / √(m(m+1))`.
pub fn helmert(x: &[f64], y: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(y.len(), n);
    if n == 0 {
        return;
    }
    let mut prefix = 0.0;
    for m in 0..n {
        if m > 0 {
            let mf = m as f64;
            y[m] = (prefix - mf * x[m]) / sqrt(mf * (mf + 1.0));
        }
        prefix += x[m];
    }
    y[0] = prefix / sqrt(n as f64);
}

/// `x = Hᵀ·y`, the inverse of [`helmert`].
pub fn helmert_inverse(y: &[f64], x: &mut [f64]) {
    let n = y.len();
    debug_assert_eq!(x.len(), n);
    if n == 0 {
        return;
    }
    let base = y[0] / sqrt(n as f64);
    let mut suffix = 0.0;
    for i in (0..n).rev() {
        let fi = i as f64;
        let own = if i > 0 { -fi * y[i] / sqrt(fi * (fi + 1.0)) } else { 0.0 };
        x[i] = base + own + suffix;
        if i > 0 {
            suffix += y[i] / sqrt(fi * (fi + 1.0));
        }
    }
}
