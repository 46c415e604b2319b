//! Dedekind eta and Jacobi theta functions as truncated q-series, with
//! `q = e^{iπτ}`.
//!
//! Every power of `q` is evaluated as `exp(iπτ·k)` rather than by repeated
//! multiplication or a principal-branch `q^{1/12}`, so no branch cut of the
//! complex logarithm is ever crossed.

mod gamma;

pub use gamma::{gamma, ln_gamma, regularized_gamma_p, regularized_gamma_q};

use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Smallest `Im τ` accepted by the q-series evaluators.
pub const MIN_IM_TAU: f64 = 1e-3;

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexUH {
    re: f64,
    im: f64,
}

impl ComplexUH {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) || !im.is_finite() || !re.is_finite() {
            return Err(Error::NotInUpperHalfPlane { im });
        }
        Ok(Self { re, im })
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    /// `τ = i·t`.
    pub fn imaginary(t: f64) -> Result<Self> {
        Self::new(0.0, t)
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Truncation control for the q-series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSeriesConfig {
    /// Absolute bound on the neglected tail.
    pub tolerance: f64,
    pub max_terms: usize,
}

impl QSeriesConfig {
    pub fn new(tolerance: f64, max_terms: usize) -> Result<Self> {
        if !(tolerance > 0.0) || max_terms == 0 {
            return Err(Error::InvalidParameter("q-series tolerance must be positive and max_terms >= 1"));
        }
        Ok(Self { tolerance, max_terms })
    }
}

impl Default for QSeriesConfig {
    fn default() -> Self {
        Self { tolerance: 1e-15, max_terms: 100_000 }
    }
}

/// Evaluation path for [`theta1_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theta1Method {
    Series,
    Product,
}

/// The auxiliary theta constants `ϑ₂(0,τ)`, `ϑ₃(0,τ)`, `ϑ₄(0,τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxTheta {
    Two,
    Three,
    Four,
}

impl AuxTheta {
    pub fn from_index(k: u8) -> Result<Self> {
        match k {
            2 => Ok(Self::Two),
            3 => Ok(Self::Three),
            4 => Ok(Self::Four),
            _ => Err(Error::InvalidParameter("auxiliary theta index must be 2, 3 or 4")),
        }
    }
}

fn check_modulus(tau: ComplexUH) -> Result<()> {
    if tau.im < MIN_IM_TAU {
        return Err(Error::ModulusTooClose { im: tau.im, min: MIN_IM_TAU });
    }
    Ok(())
}

/// `e^{iπτ·k}` for real `k`.
#[inline]
pub(crate) fn q_power(tau: ComplexUH, k: f64) -> Complex64 {
    (Complex64::new(0.0, PI) * tau.to_complex() * k).exp()
}

/// Dedekind eta via Euler's pentagonal series
/// `η(τ) = e^{iπτ/12} Σ_k (-1)^k x^{k(3k-1)/2}`, `x = q²`.
pub fn dedekind_eta(tau: ComplexUH, cfg: QSeriesConfig) -> Result<Complex64> {
    check_modulus(tau)?;
    let abs_x = (-2.0 * PI * tau.im).exp();
    let prefactor = (-PI * tau.im / 12.0).exp();
    let mut sum = Complex64::new(1.0, 0.0);
    for j in 1..=cfg.max_terms {
        let jf = j as f64;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let e1 = jf * (3.0 * jf - 1.0) / 2.0;
        let e2 = jf * (3.0 * jf + 1.0) / 2.0;
        sum += (q_power(tau, 2.0 * e1) + q_power(tau, 2.0 * e2)) * sign;
        // Remaining exponents are integers >= (j+1)(3j+2)/2.
        let next = (jf + 1.0) * (3.0 * jf + 2.0) / 2.0;
        let tail = 2.0 * prefactor * abs_x.powf(next) / (1.0 - abs_x);
        if tail < cfg.tolerance / 10.0 {
            return Ok(q_power(tau, 1.0 / 12.0) * sum);
        }
    }
    Err(Error::NonConvergence { what: "dedekind_eta", terms: cfg.max_terms })
}

/// Dedekind eta via the truncated product `q^{1/12} ∏ (1 - q^{2n})`.
///
/// Independent of [`dedekind_eta`]; kept as a cross-check path.
pub fn dedekind_eta_product(tau: ComplexUH, cfg: QSeriesConfig) -> Result<Complex64> {
    check_modulus(tau)?;
    let abs_x = (-2.0 * PI * tau.im).exp();
    let mut prod = Complex64::new(1.0, 0.0);
    for n in 1..=cfg.max_terms {
        prod *= Complex64::new(1.0, 0.0) - q_power(tau, 2.0 * n as f64);
        // Relative error of dropping ∏_{k>n} is at most 2s while s = Σ_{k>n}|x|^k < 1/2.
        let s = abs_x.powi(n as i32 + 1) / (1.0 - abs_x);
        let value = q_power(tau, 1.0 / 12.0) * prod;
        if s < 0.5 && 2.0 * s * value.norm() < cfg.tolerance / 10.0 {
            return Ok(value);
        }
    }
    Err(Error::NonConvergence { what: "dedekind_eta_product", terms: cfg.max_terms })
}

/// `ϑ₁(z,τ) = 2 Σ_{n≥0} (-1)^n q^{(n+½)²} sin((2n+1)πz)`.
pub fn theta1(z: Complex64, tau: ComplexUH, cfg: QSeriesConfig) -> Result<Complex64> {
    theta1_with(z, tau, cfg, Theta1Method::Series)
}

pub fn theta1_with(z: Complex64, tau: ComplexUH, cfg: QSeriesConfig, method: Theta1Method) -> Result<Complex64> {
    check_modulus(tau)?;
    match method {
        Theta1Method::Series => theta1_series(z, tau, cfg),
        Theta1Method::Product => theta1_product(z, tau, cfg),
    }
}

fn theta1_series(z: Complex64, tau: ComplexUH, cfg: QSeriesConfig) -> Result<Complex64> {
    let bound = |n: f64| {
        let h = n + 0.5;
        2.0 * (-PI * tau.im * h * h).exp() * ((2.0 * n + 1.0) * PI * z.im).cosh()
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..cfg.max_terms {
        let nf = n as f64;
        let h = nf + 0.5;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum += q_power(tau, h * h) * (z * ((2.0 * nf + 1.0) * PI)).sin() * (2.0 * sign);
        let b1 = bound(nf + 1.0);
        let b2 = bound(nf + 2.0);
        // Term ratios decrease monotonically in n, so b2 <= b1/2 bounds the tail by 2·b1.
        if b2 <= 0.5 * b1 && 2.0 * b1 < cfg.tolerance / 10.0 {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence { what: "theta1", terms: cfg.max_terms })
}

/// `ϑ₁(z,τ) = -i q^{1/6} e^{iπz} η(τ) ∏_{m≥1} (1 - q^{2m} e^{2πiz})(1 - q^{2m-2} e^{-2πiz})`.
fn theta1_product(z: Complex64, tau: ComplexUH, cfg: QSeriesConfig) -> Result<Complex64> {
    let abs_q2 = (-2.0 * PI * tau.im).exp();
    let growth = (2.0 * PI * z.im.abs()).exp();
    let r = abs_q2 * growth;
    if r >= 1.0 {
        return Err(Error::InvalidParameter("product representation needs |Im z| < Im tau"));
    }
    let e_plus = (Complex64::new(0.0, 2.0 * PI) * z).exp();
    let e_minus = e_plus.inv();
    let prefactor = Complex64::new(0.0, -1.0) * q_power(tau, 1.0 / 6.0) * (Complex64::new(0.0, PI) * z).exp()
        * dedekind_eta(tau, cfg)?;
    let one = Complex64::new(1.0, 0.0);
    let mut prod = one - e_minus;
    for m in 1..=cfg.max_terms {
        let mf = m as f64;
        prod *= (one - q_power(tau, 2.0 * mf) * e_plus) * (one - q_power(tau, 2.0 * mf) * e_minus);
        // Both neglected factor families deviate from 1 by at most r^k, k > m.
        let s = 2.0 * r.powi(m as i32 + 1) / (1.0 - r);
        let value = prefactor * prod;
        if s < 0.5 && 2.0 * s * value.norm() < cfg.tolerance / 10.0 {
            return Ok(value);
        }
    }
    Err(Error::NonConvergence { what: "theta1 product", terms: cfg.max_terms })
}

/// `∂_z ϑ₁(0,τ) = 2π Σ_{n≥0} (-1)^n (2n+1) q^{(n+½)²}`.
pub fn theta1_z_derivative_at_zero(tau: ComplexUH, cfg: QSeriesConfig) -> Result<Complex64> {
    check_modulus(tau)?;
    let bound = |n: f64| {
        let h = n + 0.5;
        2.0 * PI * (2.0 * n + 1.0) * (-PI * tau.im * h * h).exp()
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..cfg.max_terms {
        let nf = n as f64;
        let h = nf + 0.5;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum += q_power(tau, h * h) * (2.0 * PI * (2.0 * nf + 1.0) * sign);
        let b1 = bound(nf + 1.0);
        if bound(nf + 2.0) <= 0.5 * b1 && 2.0 * b1 < cfg.tolerance / 10.0 {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence { what: "theta1 derivative", terms: cfg.max_terms })
}

/// Theta constants `ϑ₂(0,τ) = 2 Σ_{n≥0} q^{(n+½)²}`, `ϑ₃(0,τ) = 1 + 2 Σ_{n≥1} q^{n²}`,
/// `ϑ₄(0,τ) = 1 + 2 Σ_{n≥1} (-1)^n q^{n²}`.
pub fn theta_aux(k: AuxTheta, tau: ComplexUH, cfg: QSeriesConfig) -> Result<Complex64> {
    check_modulus(tau)?;
    let (mut sum, offset, alternating, start) = match k {
        AuxTheta::Two => (Complex64::new(0.0, 0.0), 0.5, false, 0usize),
        AuxTheta::Three => (Complex64::new(1.0, 0.0), 0.0, false, 1),
        AuxTheta::Four => (Complex64::new(1.0, 0.0), 0.0, true, 1),
    };
    let bound = |n: f64| 2.0 * (-PI * tau.im * (n + offset) * (n + offset)).exp();
    for n in start..start + cfg.max_terms {
        let h = n as f64 + offset;
        let sign = if alternating && n % 2 == 1 { -1.0 } else { 1.0 };
        sum += q_power(tau, h * h) * (2.0 * sign);
        let b1 = bound(n as f64 + 1.0);
        if bound(n as f64 + 2.0) <= 0.5 * b1 && 2.0 * b1 < cfg.tolerance / 10.0 {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence { what: "theta constant", terms: cfg.max_terms })
}

/// `Θ(τ) = -ln 2π - 2 ln|η(τ)|`, the finite part of the circle-average variance
/// `E[X_{τ,ε}(x)²] = ln(1/ε) + Θ(τ) + o(1)`.
pub fn variance_offset(tau: ComplexUH, cfg: QSeriesConfig) -> Result<f64> {
    Ok(-(2.0 * PI).ln() - 2.0 * dedekind_eta(tau, cfg)?.norm().ln())
}

#[cfg(test)]
mod tests;
