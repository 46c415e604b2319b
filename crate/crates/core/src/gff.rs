//! Spectral Gaussian free field on `𝕋` with covariance `G_τ`,
//!
//! `X_τ(x) = Σ_{(n,m)≠0} α_{n,m} c_{n,m}(τ)^{1/2} e^{2πi(nx₁+mx₂)}`,
//!
//! truncated to `|n|, |m| ≤ N`. Circle averages act diagonally through the
//! Bessel multiplier `J₀(2πε|nτ−m|/Im τ)`, so truncation and regularization
//! commute exactly.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft::{Direction, Fft2d};
use crate::modular_group::reduce_to_fundamental;
use crate::rng::RngStream;
use crate::special_fn::{dedekind_eta, ComplexUH, QSeriesConfig};
use crate::torus::TorusPoint;
use crate::torus_green::fourier_coefficient;

/// Truncated Fourier coefficients of a real field on `𝕋`, indexed by
/// `|n|, |m| ≤ cutoff`. The `(0,0)` entry is always zero and
/// `coeff(−n,−m) = conj(coeff(n,m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    tau: ComplexUH,
    cutoff: usize,
    eps: Option<f64>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(tau: ComplexUH, cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidParameter("spectral cutoff must be at least 1"));
        }
        let side = 2 * cutoff + 1;
        Ok(Self { tau, cutoff, eps: None, coeffs: vec![Complex64::new(0.0, 0.0); side * side] })
    }

    pub fn tau(&self) -> ComplexUH {
        self.tau
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Circle-average radius, if the field has been regularized.
    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    fn index(&self, n: i64, m: i64) -> Option<usize> {
        let c = self.cutoff as i64;
        if n.abs() > c || m.abs() > c {
            return None;
        }
        Some(((n + c) * (2 * c + 1) + (m + c)) as usize)
    }

    /// Coefficient of `e^{2πi(nx₁+mx₂)}`; zero outside the cutoff.
    pub fn coeff(&self, n: i64, m: i64) -> Complex64 {
        self.index(n, m).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Sets `(n, m)` and its mirror `(−n, −m)` to keep the field real.
    pub fn set_mode(&mut self, n: i64, m: i64, value: Complex64) -> Result<()> {
        if n == 0 && m == 0 {
            return Err(Error::InvalidParameter("the (0,0) mode is excluded"));
        }
        let i = self.index(n, m).ok_or(Error::IndexOutOfCutoff { n, m, cutoff: self.cutoff })?;
        let j = self.index(-n, -m).expect("mirror of an in-range index is in range");
        self.coeffs[i] = value;
        self.coeffs[j] = value.conj();
        Ok(())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let c = self.cutoff as i64;
        for n in -c..=c {
            for m in -c..=c {
                if (self.coeff(n, m) - self.coeff(-n, -m).conj()).norm() > tol {
                    return false;
                }
            }
        }
        self.coeff(0, 0) == Complex64::new(0.0, 0.0)
    }

    /// Direct evaluation `Σ coeff·e^{2πi(nx₁+mx₂)}` at one point.
    pub fn evaluate(&self, x: TorusPoint) -> f64 {
        let c = self.cutoff as i64;
        let mut acc = 0.0;
        for n in -c..=c {
            for m in -c..=c {
                let phase = 2.0 * PI * (n as f64 * x.x1() + m as f64 * x.x2());
                acc += (self.coeff(n, m) * Complex64::from_polar(1.0, phase)).re;
            }
        }
        acc
    }

    /// Values at the grid points `(j₁/g, j₂/g)`, row-major in `j₁`.
    pub fn to_grid(&self, g: usize) -> Result<Vec<f64>> {
        let plan = grid_plan(self.cutoff, g)?;
        let mut buf = vec![Complex64::new(0.0, 0.0); g * g];
        let c = self.cutoff as i64;
        for n in -c..=c {
            for m in -c..=c {
                buf[wrap(n, g) * g + wrap(m, g)] = self.coeff(n, m);
            }
        }
        plan.process(&mut buf, Direction::Inverse);
        Ok(buf.into_iter().map(|z| z.re).collect())
    }

    /// Circle average of radius `eps` in the metric `ĝ_τ`.
    pub fn circle_average(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter("circle radius must be positive"));
        }
        if self.eps.is_some() {
            return Err(Error::InvalidParameter("field is already circle-averaged"));
        }
        let mut out = self.clone();
        let c = self.cutoff as i64;
        for n in -c..=c {
            for m in -c..=c {
                if let Some(i) = self.index(n, m) {
                    out.coeffs[i] *= circle_multiplier(self.tau, n, m, eps);
                }
            }
        }
        out.eps = Some(eps);
        Ok(out)
    }

    /// `∫ |∇φ|²_τ dλ_τ = (4π²/Im τ) Σ |nτ−m|² |coeff_{n,m}|²`.
    pub fn dirichlet_energy(&self) -> f64 {
        let c = self.cutoff as i64;
        let mut acc = 0.0;
        for n in -c..=c {
            for m in -c..=c {
                let w = self.tau.to_complex() * n as f64 - m as f64;
                acc += w.norm_sqr() * self.coeff(n, m).norm_sqr();
            }
        }
        4.0 * PI * PI * acc / self.tau.im()
    }

    /// The same energy by quadrature of the metric gradient on a `g × g` grid,
    /// with `∂_{x₁}`, `∂_{x₂}` taken spectrally.
    pub fn dirichlet_energy_on_grid(&self, g: usize) -> Result<f64> {
        let mut d1 = self.clone();
        let mut d2 = self.clone();
        let c = self.cutoff as i64;
        for n in -c..=c {
            for m in -c..=c {
                if let Some(i) = self.index(n, m) {
                    d1.coeffs[i] *= Complex64::new(0.0, 2.0 * PI * n as f64);
                    d2.coeffs[i] *= Complex64::new(0.0, 2.0 * PI * m as f64);
                }
            }
        }
        let g1 = d1.to_grid(g)?;
        let g2 = d2.to_grid(g)?;
        let (re, im) = (self.tau.re(), self.tau.im());
        let mut acc = 0.0;
        for (a, b) in g1.iter().zip(g2.iter()) {
            // ∂_{Im u} = (∂_{x₂} − Re τ ∂_{x₁}) / Im τ for u = x₁ + τ x₂.
            let dy = (b - re * a) / im;
            acc += a * a + dy * dy;
        }
        Ok(acc * im / (g * g) as f64)
    }
}

pub(crate) fn wrap(k: i64, g: usize) -> usize {
    k.rem_euclid(g as i64) as usize
}

fn grid_plan(cutoff: usize, g: usize) -> Result<Fft2d> {
    if g < 2 * cutoff + 1 {
        return Err(Error::InvalidParameter("grid must exceed 2N+1 to avoid aliasing"));
    }
    Fft2d::new(g)
}

/// `J₀(2πε|nτ−m|/Im τ)`, the average of `e^{2πi(nx₁+mx₂)}` over the metric
/// circle of radius `ε`.
pub fn circle_multiplier(tau: ComplexUH, n: i64, m: i64, eps: f64) -> f64 {
    let w = tau.to_complex() * n as f64 - m as f64;
    libm::j0(2.0 * PI * eps * w.norm() / tau.im())
}

/// Half lattice `{n > 0} ∪ {n = 0, m > 0}` of `|n|, |m| ≤ N`, in sampling order.
pub(crate) fn half_lattice(cutoff: usize) -> impl Iterator<Item = (i64, i64)> {
    let c = cutoff as i64;
    (0..=c).flat_map(move |n| {
        let start = if n == 0 { 1 } else { -c };
        (start..=c).map(move |m| (n, m))
    })
}

/// Unit-variance complex Gaussian `(g₁ + i g₂)/√2`.
fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    Complex64::new(g1, g2) * core::f64::consts::FRAC_1_SQRT_2
}

/// Draws the truncated GFF at `τ` from stream `rng`.
pub fn sample_gff(tau: ComplexUH, cutoff: usize, rng: RngStream) -> Result<SpectralField> {
    let mut field = SpectralField::zeros(tau, cutoff)?;
    let mut r = rng.rng();
    for (n, m) in half_lattice(cutoff) {
        let alpha = complex_normal(&mut r);
        field.set_mode(n, m, alpha * fourier_coefficient(tau, n, m).sqrt())?;
    }
    Ok(field)
}

/// `E[X_{τ,ε}(x)²]` for the truncated field (`eps = None`: no circle average).
pub fn truncated_variance(tau: ComplexUH, cutoff: usize, eps: Option<f64>) -> f64 {
    let mut acc = 0.0;
    for (n, m) in half_lattice(cutoff) {
        let k = mode_weight(tau, n, m, eps);
        acc += k * k;
    }
    2.0 * acc
}

/// `E[X_{τ,ε}(x) X_{τ,ε}(0)]` for the truncated field.
pub fn truncated_covariance(tau: ComplexUH, cutoff: usize, eps: Option<f64>, x: TorusPoint) -> f64 {
    let mut acc = 0.0;
    for (n, m) in half_lattice(cutoff) {
        let k = mode_weight(tau, n, m, eps);
        acc += k * k * (2.0 * PI * (n as f64 * x.x1() + m as f64 * x.x2())).cos();
    }
    2.0 * acc
}

/// Standard deviation of one real coordinate pair of mode `(n,m)`:
/// `c_{n,m}^{1/2}` times the circle multiplier.
pub(crate) fn mode_weight(tau: ComplexUH, n: i64, m: i64, eps: Option<f64>) -> f64 {
    let base = fourier_coefficient(tau, n, m).sqrt();
    match eps {
        Some(e) => base * circle_multiplier(tau, n, m, e),
        None => base,
    }
}

/// Reusable sampler writing (circle-averaged) GFF grid values straight into an
/// FFT buffer. Two independent fields share one complex transform: the first
/// lands in the real part of the output, the second in the imaginary part.
///
/// Draws consume each stream in the same order as [`sample_gff`], so the grid
/// values equal `sample_gff(..).circle_average(eps)?.to_grid(g)` up to rounding.
#[derive(Debug, Clone)]
pub struct GridSampler {
    tau: ComplexUH,
    cutoff: usize,
    grid: usize,
    eps: Option<f64>,
    weights: Vec<f64>,
    variance: f64,
    rows: Vec<usize>,
    plan: Fft2d,
}

impl GridSampler {
    pub fn new(tau: ComplexUH, cutoff: usize, grid: usize, eps: Option<f64>) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidParameter("spectral cutoff must be at least 1"));
        }
        let plan = grid_plan(cutoff, grid)?;
        let weights: Vec<f64> = half_lattice(cutoff).map(|(n, m)| mode_weight(tau, n, m, eps)).collect();
        let variance = 2.0 * weights.iter().map(|w| w * w).sum::<f64>();
        let c = cutoff as i64;
        let mut rows: Vec<usize> = (-c..=c).map(|n| wrap(n, grid)).collect();
        rows.sort_unstable();
        Ok(Self { tau, cutoff, grid, eps, weights, variance, rows, plan })
    }

    pub fn tau(&self) -> ComplexUH {
        self.tau
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    /// Exact pointwise variance of the sampled field.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Fills `buf` (resized to `grid²`) with field `a` in the real parts and,
    /// if given, an independent field `b` in the imaginary parts.
    pub fn sample_into(&self, a: RngStream, b: Option<RngStream>, buf: &mut Vec<Complex64>) {
        let g = self.grid;
        buf.clear();
        buf.resize(g * g, Complex64::new(0.0, 0.0));
        let mut ra = a.rng();
        let mut rb = b.map(|s| s.rng());
        for ((n, m), &w) in half_lattice(self.cutoff).zip(self.weights.iter()) {
            let za = complex_normal(&mut ra) * w;
            let zb = rb.as_mut().map_or(Complex64::new(0.0, 0.0), |r| complex_normal(r) * w);
            let i = Complex64::new(0.0, 1.0);
            buf[wrap(n, g) * g + wrap(m, g)] = za + i * zb;
            buf[wrap(-n, g) * g + wrap(-m, g)] = za.conj() + i * zb.conj();
        }
        self.plan.process_sparse_rows(buf, &self.rows, Direction::Inverse);
    }
}

/// `Z^FF(τ) = 1 / (√(Im τ) |η(τ)|²)`.
pub fn free_field_partition(tau: ComplexUH, cfg: QSeriesConfig) -> Result<f64> {
    let eta = dedekind_eta(tau, cfg)?;
    Ok(1.0 / (tau.im().sqrt() * eta.norm_sqr()))
}

/// A modular log-conformal factor given by finitely many Fourier coefficients
/// `φ_{n,m}` on the fundamental domain, extended to all of `ℍ` by
/// `φ_{n,m}(ψ(τ)) = φ_{ψ̃ᵗ⁻¹(n,m)}(τ)`.
///
/// `profile` lets the coefficients depend on the reduced modulus; it must be
/// real-valued so that Hermitian symmetry survives.
#[derive(Debug, Clone)]
pub struct LogConformalFactor {
    entries: Vec<(i64, i64, Complex64)>,
    profile: fn(ComplexUH) -> f64,
}

fn unit_profile(_: ComplexUH) -> f64 {
    1.0
}

impl LogConformalFactor {
    /// Takes every entry explicitly; fails unless the set is Hermitian and
    /// avoids `(0,0)`.
    pub fn new(entries: Vec<(i64, i64, Complex64)>) -> Result<Self> {
        for &(n, m, v) in &entries {
            if n == 0 && m == 0 {
                return Err(Error::InvalidParameter("log-conformal factor cannot carry the (0,0) mode"));
            }
            let mirror = entries.iter().find(|&&(a, b, _)| a == -n && b == -m);
            match mirror {
                Some(&(_, _, w)) if (w - v.conj()).norm() <= 1e-14 * (1.0 + v.norm()) => {}
                _ => return Err(Error::InvalidParameter("log-conformal coefficients must satisfy conj(φ_{n,m}) = φ_{-n,-m}")),
            }
        }
        Ok(Self { entries, profile: unit_profile })
    }

    /// Builds the Hermitian completion of half-lattice entries.
    pub fn from_half(half: &[(i64, i64, Complex64)]) -> Result<Self> {
        let mut entries = Vec::with_capacity(2 * half.len());
        for &(n, m, v) in half {
            entries.push((n, m, v));
            entries.push((-n, -m, v.conj()));
        }
        Self::new(entries)
    }

    pub fn with_profile(mut self, profile: fn(ComplexUH) -> f64) -> Self {
        self.profile = profile;
        self
    }

    pub fn zero() -> Self {
        Self { entries: Vec::new(), profile: unit_profile }
    }

    pub fn entries(&self) -> &[(i64, i64, Complex64)] {
        &self.entries
    }

    /// `2π Σ |φ_{n,m}(τ)|²`, a modular invariant.
    pub fn energy(&self, tau: ComplexUH) -> f64 {
        let p = (self.profile)(reduce_to_fundamental(tau).tau);
        2.0 * PI * self.entries.iter().map(|&(_, _, v)| (v * p).norm_sqr()).sum::<f64>()
    }
}

/// Spectral field of `φ_τ(x) = Σ φ_{n,m}(τ) c_{n,m}(τ)^{1/2} e^{2πi(nx₁+mx₂)}`.
pub fn build_log_conformal_factor(spec: &LogConformalFactor, tau: ComplexUH, cutoff: usize) -> Result<SpectralField> {
    let reduced = reduce_to_fundamental(tau);
    // τ = ψ(τ*) with ψ = witness⁻¹, so φ_{n,m}(τ) = φ_{ψ̃ᵗ⁻¹(n,m)}(τ*): entry (n₀,m₀) moves to ψ̃ᵗ(n₀,m₀).
    let psi = reduced.witness.inverse();
    let p = (spec.profile)(reduced.tau);
    let mut field = SpectralField::zeros(tau, cutoff)?;
    for &(n0, m0, v) in &spec.entries {
        let (n, m) = psi.dual_index_inverse(n0, m0);
        if n.unsigned_abs() as usize > cutoff || m.unsigned_abs() as usize > cutoff {
            return Err(Error::IndexOutOfCutoff { n, m, cutoff });
        }
        field.set_mode(n, m, v * p * fourier_coefficient(tau, n, m).sqrt())?;
    }
    Ok(field)
}

#[cfg(test)]
mod tests;
