//! GUE correlation kernel in the normalization where the spectrum fills
//! `[-2, 2]`, two-point correlations and the small-gap constant.
//!
//! With `s = sqrt(N / 2)` and oscillator wavefunctions `psi_k`,
//!
//! ```text
//! K_N(x, y) = s * sum_{k < N} psi_k(s x) psi_k(s y),
//! ```
//!
//! so that `K_N(x, x) / N` tends to the semicircle density.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::numeric::{integrate, KahanSum};
use crate::spectra::semicircle_quantile;
use crate::{Error, Result};

/// Argument scale `sqrt(N / 2)` mapping `[-2, 2]` onto the oscillator bulk.
pub fn argument_scale(n: usize) -> f64 {
    (n as f64 / 2.0).sqrt()
}

/// `psi_0(u), ..., psi_{n_max}(u)` by the three-term recurrence
/// `psi_{k+1} = u sqrt(2/(k+1)) psi_k - sqrt(k/(k+1)) psi_{k-1}`.
///
/// The recurrence runs on mantissas with a running log-scale, so large `|u|`
/// underflows to zero gracefully instead of producing NaN.
pub fn hermite_functions(n_max: usize, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut log_scale = -0.5 * u * u - 0.25 * PI.ln();
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push(scaled(1.0, log_scale));
    for k in 0..n_max {
        let next = u * (2.0 / (k + 1) as f64).sqrt() * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
        let mag = cur.abs();
        if mag > 1e100 || (mag < 1e-100 && mag > 0.0) {
            let shift = mag.ln();
            cur /= mag;
            prev /= mag;
            log_scale += shift;
        }
        out.push(scaled(cur, log_scale));
    }
    out
}

fn scaled(mantissa: f64, log_scale: f64) -> f64 {
    if mantissa == 0.0 {
        return 0.0;
    }
    mantissa.signum() * (mantissa.abs().ln() + log_scale).exp()
}

/// `K_N(x, y)`. Uses Christoffel–Darboux off the diagonal and the direct
/// sum when the scaled arguments are within `1e-8`.
pub fn kernel(n: usize, x: f64, y: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidN(n));
    }
    let s = argument_scale(n);
    let (u, v) = (s * x, s * y);
    let pu = hermite_functions(n, u);
    if (u - v).abs() <= 1e-8 {
        let pv = if u == v { pu.clone() } else { hermite_functions(n, v) };
        let mut acc = KahanSum::new();
        for k in 0..n {
            acc.add(pu[k] * pv[k]);
        }
        return Ok(s * acc.value());
    }
    let pv = hermite_functions(n, v);
    let cd = s * (pu[n] * pv[n - 1] - pu[n - 1] * pv[n]) / (u - v);
    Ok(s * cd)
}

/// One-point function `rho_1(x) = K_N(x, x)`.
pub fn rho1(n: usize, x: f64) -> Result<f64> {
    kernel(n, x, x)
}

/// Two-point function `rho_2(x, x + u) = K(x,x) K(x+u,x+u) - K(x,x+u)^2`.
pub fn rho2(n: usize, x: f64, u: f64) -> Result<f64> {
    let a = kernel(n, x, x)?;
    let b = kernel(n, x + u, x + u)?;
    let c = kernel(n, x, x + u)?;
    Ok((a * b - c * c).max(0.0))
}

fn leading_term(n: usize, x: f64, u: f64) -> f64 {
    let nf = n as f64;
    nf.powi(4) * (4.0 - x * x).max(0.0).powi(2) * u * u / (48.0 * PI * PI)
}

/// Leading small-gap term `N^4 (4 - x^2)^2 u^2 / (48 pi^2)` of `rho_2`.
///
/// Defined for `|x| <= 2` and `|u| <= 1/N`, the scale on which the
/// quadratic behaviour is meaningful.
pub fn small_gap_asymptotic(n: usize, x: f64, u: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidN(n));
    }
    if !(x.abs() <= 2.0) {
        return Err(Error::DomainViolation(format!("x = {x} outside [-2, 2]")));
    }
    if !(u.abs() <= 1.0 / n as f64) {
        return Err(Error::DomainViolation(format!("u = {u} outside [-1/N, 1/N] for N = {n}")));
    }
    Ok(leading_term(n, x, u))
}

/// `rho_2` and its leading term on a grid of separations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corr2Grid {
    pub n: usize,
    pub x: f64,
    pub u_values: Vec<f64>,
    pub rho2: Vec<f64>,
    pub asymptotic: Vec<f64>,
}

pub fn rho2_grid(n: usize, x: f64, u_values: &[f64]) -> Result<Corr2Grid> {
    let rho = u_values.iter().map(|&u| rho2(n, x, u)).collect::<Result<Vec<_>>>()?;
    Ok(Corr2Grid {
        n,
        x,
        u_values: u_values.to_vec(),
        rho2: rho,
        asymptotic: u_values.iter().map(|&u| leading_term(n, x, u)).collect(),
    })
}

fn bulk_window(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside (0, 1/2)")));
    }
    Ok((semicircle_quantile(alpha), semicircle_quantile(1.0 - alpha)))
}

/// Expected number of eigenvalue pairs in the bulk window with separation
/// below `s`, from the leading two-point term, by nested adaptive quadrature.
pub fn expected_small_gap_count(n: usize, alpha: f64, s: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidN(n));
    }
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("separation s = {s} must be non-negative")));
    }
    let (a, b) = bulk_window(alpha)?;
    if s == 0.0 || a >= b {
        return Ok(0.0);
    }
    let inner = |x: f64| integrate(|u| leading_term(n, x, u), 0.0, s, 0.0, 1e-13).unwrap_or(f64::NAN);
    let v = integrate(inner, a, b, 0.0, 1e-12)?;
    if !v.is_finite() {
        return Err(Error::QuadratureFailure("inner integral did not converge".into()));
    }
    Ok(v)
}

/// Antiderivative of `(4 - x^2)^2`.
fn quartic_antiderivative(x: f64) -> f64 {
    16.0 * x - 8.0 * x.powi(3) / 3.0 + x.powi(5) / 5.0
}

/// Poissonized constant `c(alpha) = (int (4 - x^2)^2 dx / (144 pi^2))^{1/3}`
/// over the bulk window, so that `c N^{4/3} min gap` is approximately
/// distributed as `1 - e^{-x^3}`.
pub fn poissonized_c(alpha: f64) -> Result<f64> {
    let (a, b) = bulk_window(alpha)?;
    let integral = quartic_antiderivative(b) - quartic_antiderivative(a);
    Ok((integral / (144.0 * PI * PI)).cbrt())
}
