//! The Green function `G_τ` of the flat torus Laplacian, normalized to mean
//! zero against `λ_τ` (total area `Im τ`), evaluated three independent ways.
//!
//! * closed form `G_τ(x) = π Im τ x₂² − ln|ϑ₁(x₁+τx₂, τ)/η(τ)|`, the production path;
//! * eigenfunction series `Σ c_{n,m}(τ) e^{2πi(nx₁+mx₂)}`, `c_{n,m} = Im τ / (2π|nτ−m|²)`;
//! * the Poisson-resummed series `πIm τ B₂(x₂) + Σ_m Σ_{k≥1} r_m^k cos(kθ_m)/k`.

use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::modular_group::ModularElement;
use crate::special_fn::{dedekind_eta, theta1, theta1_z_derivative_at_zero, ComplexUH, QSeriesConfig};
use crate::torus::{c_tau, nearest_lift, p_tau, shortest_period, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreenMode {
    ClosedForm,
    EigenSeries,
    AppendixSeries,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenEvalConfig {
    pub mode: GreenMode,
    /// Eigen-series cutoff: the sum runs over `|n|, |m| ≤ eigen_cutoff`.
    pub eigen_cutoff: usize,
    /// Truncation tolerance of the exponentially convergent paths, and the
    /// largest acceptable error estimate of the eigen series.
    pub tolerance: f64,
}

impl GreenEvalConfig {
    pub fn closed_form() -> Self {
        Self { mode: GreenMode::ClosedForm, eigen_cutoff: 1, tolerance: 1e-15 }
    }

    pub fn eigen_series(cutoff: usize, tolerance: f64) -> Self {
        Self { mode: GreenMode::EigenSeries, eigen_cutoff: cutoff, tolerance }
    }

    pub fn appendix_series() -> Self {
        Self { mode: GreenMode::AppendixSeries, eigen_cutoff: 1, tolerance: 1e-15 }
    }

    fn validate(&self) -> Result<()> {
        if self.eigen_cutoff == 0 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("Green config needs cutoff >= 1 and positive tolerance"));
        }
        Ok(())
    }

    fn qseries(&self) -> QSeriesConfig {
        QSeriesConfig { tolerance: self.tolerance.max(1e-16), ..QSeriesConfig::default() }
    }
}

impl Default for GreenEvalConfig {
    fn default() -> Self {
        Self::closed_form()
    }
}

/// `c_{n,m}(τ) = Im τ / (2π |nτ − m|²)` for `(n, m) ≠ (0, 0)`.
pub fn fourier_coefficient(tau: ComplexUH, n: i64, m: i64) -> f64 {
    let w = tau.to_complex() * n as f64 - m as f64;
    tau.im() / (2.0 * PI * w.norm_sqr())
}

/// `G_τ(x)` in the mode selected by `cfg`.
pub fn green(tau: ComplexUH, x: TorusPoint, cfg: &GreenEvalConfig) -> Result<f64> {
    cfg.validate()?;
    match cfg.mode {
        GreenMode::ClosedForm => green_closed_form(tau, x, cfg.qseries()),
        GreenMode::EigenSeries => {
            let sum = green_eigen_series(tau, x, cfg.eigen_cutoff)?;
            if sum.error_estimate > cfg.tolerance {
                return Err(Error::NonConvergence { what: "Green eigen series", terms: cfg.eigen_cutoff });
            }
            Ok(sum.value)
        }
        GreenMode::AppendixSeries => green_appendix_series(tau, x, cfg.tolerance),
    }
}

/// Closed form evaluated at the representative of `x` in `[-1/2, 1/2)²`,
/// which keeps `ϑ₁`'s argument inside the fundamental parallelogram around 0.
pub fn green_closed_form(tau: ComplexUH, x: TorusPoint, cfg: QSeriesConfig) -> Result<f64> {
    if x.is_origin() {
        return Err(Error::SingularPoint);
    }
    let (c1, c2) = x.centered();
    green_closed_form_raw(tau, c1, c2, cfg)
}

/// Closed form on raw coordinates, without reduction. Periodic in `x` although
/// `π Im τ x₂²` alone is not.
pub fn green_closed_form_raw(tau: ComplexUH, x1: f64, x2: f64, cfg: QSeriesConfig) -> Result<f64> {
    let th = theta1(p_tau(tau, x1, x2), tau, cfg)?;
    if th.norm() == 0.0 {
        return Err(Error::SingularPoint);
    }
    let eta = dedekind_eta(tau, cfg)?;
    Ok(PI * tau.im() * x2 * x2 - th.norm().ln() + eta.norm().ln())
}

/// Truncated eigen series with its Cauchy error estimate `|S_N − S_{N/2}|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSum {
    pub value: f64,
    pub error_estimate: f64,
}

pub fn green_eigen_series(tau: ComplexUH, x: TorusPoint, cutoff: usize) -> Result<EigenSum> {
    if x.is_origin() {
        return Err(Error::SingularPoint);
    }
    let nmax = cutoff as i64;
    let half = nmax / 2;
    let (x1, x2) = (x.x1(), x.x2());
    let mut total = 0.0;
    let mut inner = 0.0;
    // Half lattice {n > 0} ∪ {n = 0, m > 0}; the mirror image doubles each term.
    for n in 0..=nmax {
        let m_start = if n == 0 { 1 } else { -nmax };
        let mut row = 0.0;
        let mut row_inner = 0.0;
        for m in m_start..=nmax {
            let term = fourier_coefficient(tau, n, m) * (2.0 * PI * (n as f64 * x1 + m as f64 * x2)).cos();
            row += term;
            if n <= half && m.abs() <= half {
                row_inner += term;
            }
        }
        total += row;
        inner += row_inner;
    }
    Ok(EigenSum { value: 2.0 * total, error_estimate: 2.0 * (total - inner).abs() })
}

/// Poisson-resummed series: the `n = 0` modes in closed Bernoulli form plus, for
/// each lattice row `m`, the exponentially damped Fourier series in `x₁`.
pub fn green_appendix_series(tau: ComplexUH, x: TorusPoint, tolerance: f64) -> Result<f64> {
    if x.is_origin() {
        return Err(Error::SingularPoint);
    }
    let (x1, x2) = (x.x1(), x.x2());
    let mut value = PI * tau.im() * (x2 * x2 - x2 + 1.0 / 6.0);
    let row = |j: f64| -> f64 {
        let r = (-2.0 * PI * tau.im() * j.abs()).exp();
        let theta = 2.0 * PI * (x1 + tau.re() * j);
        if r > 0.5 {
            // Σ_k r^k cos(kθ)/k = −ln|1 − r e^{iθ}|; summed termwise this row converges too slowly.
            -(Complex64::new(1.0, 0.0) - Complex64::from_polar(r, theta)).norm().ln()
        } else {
            let mut acc = 0.0;
            let mut rk = r;
            let mut k = 1.0;
            while rk / (1.0 - r) >= tolerance / 10.0 {
                acc += rk * (k * theta).cos() / k;
                rk *= r;
                k += 1.0;
            }
            acc
        }
    };
    value += row(x2);
    let decay = (-2.0 * PI * tau.im()).exp();
    for sign in [1.0, -1.0] {
        let mut m = 1.0;
        loop {
            let j = x2 + sign * m;
            let r = (-2.0 * PI * tau.im() * j.abs()).exp();
            value += row(j);
            // Remaining rows are bounded by Σ_k r^k / (1 − r) with r shrinking geometrically.
            if r / ((1.0 - r) * (1.0 - decay)) < tolerance / 10.0 {
                break;
            }
            m += 1.0;
            if m > 1e6 {
                return Err(Error::NonConvergence { what: "Green appendix series", terms: 1_000_000 });
            }
        }
    }
    Ok(value)
}

/// `c_τ = ln|η(τ)| − ln|∂_zϑ₁(0,τ)|`, the constant in
/// `G_τ(x) = −ln|p_τ(x)| + c_τ + O(|x|²)`; equal to `Θ(τ)`.
pub fn short_distance_constant(tau: ComplexUH, cfg: QSeriesConfig) -> Result<f64> {
    let eta = dedekind_eta(tau, cfg)?;
    let d = theta1_z_derivative_at_zero(tau, cfg)?;
    Ok(eta.norm().ln() - d.norm().ln())
}

/// Midpoint quadrature of `∫_𝕋 G_τ dλ_τ` on a `grid × grid` lattice, with the
/// logarithmic singularity subtracted on a disk and added back analytically.
pub fn green_mean_zero_check(tau: ComplexUH, grid: usize, cfg: &GreenEvalConfig) -> Result<f64> {
    if grid == 0 {
        return Err(Error::InvalidParameter("quadrature grid must be positive"));
    }
    let radius = 0.4 * shortest_period(tau);
    let h = 1.0 / grid as f64;
    let mut acc = 0.0;
    for i in 0..grid {
        let mut row = 0.0;
        for j in 0..grid {
            let x = TorusPoint::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let u = nearest_lift(tau, x).norm();
            let g = green(tau, x, cfg)?;
            row += g - subtraction(u, radius);
        }
        acc += row;
    }
    let disk = PI * radius * radius * (25.0 / 96.0 - radius.ln() / 4.0);
    Ok(acc * tau.im() * h * h + disk)
}

/// `−ln r · (1 − r²/R²)³` on the disk `r < R`, zero outside.
fn subtraction(r: f64, radius: f64) -> f64 {
    if r >= radius {
        return 0.0;
    }
    let w = 1.0 - (r / radius) * (r / radius);
    -r.ln() * w * w * w
}

/// Double circle average `G_{τ,ε}(x)`, the covariance of circle averages of
/// radius `ε` (in the metric `ĝ_τ`) centred at points with difference `x`.
/// At `x = 0` this is the regularized variance `E[X_{τ,ε}(0)²]`.
pub fn green_regularized(tau: ComplexUH, x: TorusPoint, eps: f64, quad_points: usize, cfg: QSeriesConfig) -> Result<f64> {
    circle_covariance(tau, x, TorusPoint::origin(), eps, quad_points, cfg)
}

/// `E[X_{τ,ε}(x) X_{τ,ε}(y)]`: both circles are traced in torus coordinates
/// (wrapping across the cell boundary) before their difference is taken.
///
/// For `|p_τ(x−y)| ≤ 3ε` the integrand is split as `−ln|u| + R(u)`: the double
/// average of the logarithm is done exactly (the mean-value property leaves a
/// single integral with two kinks, handled by Gauss–Legendre between them),
/// while the smooth remainder `R` goes through the trapezoid rule.
pub fn circle_covariance(
    tau: ComplexUH,
    x: TorusPoint,
    y: TorusPoint,
    eps: f64,
    quad_points: usize,
    cfg: QSeriesConfig,
) -> Result<f64> {
    if quad_points < 16 {
        return Err(Error::InvalidParameter("quad_points must be at least 16"));
    }
    if !(eps > 0.0) || 4.0 * eps >= shortest_period(tau) {
        return Err(Error::InvalidParameter("circle radius must be positive and well inside a period cell"));
    }
    let u = nearest_lift(tau, x.sub(&y));
    let k = quad_points;
    let step = 2.0 * PI / k as f64;
    let on_circle = |centre: TorusPoint, t: usize| {
        let (d1, d2) = c_tau(tau, Complex64::from_polar(eps, t as f64 * step));
        TorusPoint::new(centre.x1() + d1, centre.x2() + d2)
    };
    let split = u.norm() <= 3.0 * eps;
    let theta = if split { short_distance_constant(tau, cfg)? } else { 0.0 };
    let mut acc = 0.0;
    for a in 0..k {
        let p = on_circle(x, a);
        for b in 0..k {
            let d = p.sub(&on_circle(y, b));
            acc += if !split {
                green_closed_form(tau, d, cfg)?
            } else {
                let w = nearest_lift(tau, d).norm();
                if w < 1e-12 {
                    theta
                } else {
                    green_closed_form(tau, d, cfg)? + w.ln()
                }
            };
        }
    }
    let mean = acc / (k * k) as f64;
    Ok(if split { mean - mean_log_max(u, eps) } else { mean })
}

/// `(1/2π) ∫ ln max(|u − εe^{iθ}|, ε) dθ`, the double circle average of `ln|·|`.
fn mean_log_max(u: Complex64, eps: f64) -> f64 {
    let r = u.norm();
    if r >= 2.0 * eps {
        return r.ln();
    }
    if r == 0.0 {
        return eps.ln();
    }
    // |u − εe^{iθ}| < ε exactly on the arc |θ − arg u| < arccos(r/2ε).
    let half = (r / (2.0 * eps)).acos();
    let inside = 2.0 * half * eps.ln();
    let start = u.arg() + half;
    let len = 2.0 * PI - 2.0 * half;
    let f = |t: f64| (u - Complex64::from_polar(eps, t)).norm().ln();
    // Endpoints sit at the kinks, so Gauss–Legendre on two halves of the smooth arc.
    let outside = gauss_legendre(&f, start, start + len / 2.0) + gauss_legendre(&f, start + len / 2.0, start + len);
    (inside + outside) / (2.0 * PI)
}

const GL_NODES: [f64; 16] = [
    0.04830766568773831,
    0.1444719615827965,
    0.23928736225213706,
    0.33186860228212767,
    0.42135127613063533,
    0.5068999089322294,
    0.5877157572407623,
    0.6630442669302152,
    0.7321821187402897,
    0.7944837959679424,
    0.84936761373257,
    0.8963211557660522,
    0.9349060759377397,
    0.9647622555875064,
    0.9856115115452684,
    0.9972638618494816,
];
const GL_WEIGHTS: [f64; 16] = [
    0.09654008851472781,
    0.09563872007927483,
    0.09384439908080457,
    0.09117387869576386,
    0.08765209300440391,
    0.08331192422694685,
    0.07819389578707031,
    0.07234579410884845,
    0.06582222277636175,
    0.058684093478535704,
    0.050998059262376244,
    0.042835898022226426,
    0.034273862913021626,
    0.025392065309262427,
    0.016274394730905965,
    0.007018610009469298,
];

/// 32-point Gauss–Legendre rule on `[a, b]`.
pub(crate) fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += w * (f(mid + half * x) + f(mid - half * x));
    }
    acc * half
}

/// `max_x |G_{ψ(τ)}(x) − G_τ(ψ̃(x))|` over the sample points.
pub fn modular_invariance_residual(tau: ComplexUH, psi: &ModularElement, points: &[TorusPoint], cfg: QSeriesConfig) -> Result<f64> {
    let image = psi.act_on_uhp(tau);
    let mut worst: f64 = 0.0;
    for &x in points {
        let lhs = green_closed_form(image, x, cfg)?;
        let rhs = green_closed_form(tau, psi.act_on_torus(x), cfg)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
