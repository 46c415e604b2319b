//! Discretized Gaussian multiplicative chaos on `𝕋_τ`.
//!
//! Cell weights use the exact-variance normalization
//! `A · e^{γX_ε(x) − γ²σ²_ε/2} · (cell area)`, with `σ²_ε` the variance of the
//! truncated, circle-averaged field. `E` of every cell factor is exactly 1 at any
//! truncation. The critical measure (`γ = 2`) has infinite mean mass; only
//! medians, quantiles and negative moments are meaningful there.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gff::{truncated_variance, GridSampler, SpectralField};
use crate::modular_group::ModularElement;
use crate::rng::{replica_pairs, RngStream};
use crate::special_fn::{variance_offset, ComplexUH, QSeriesConfig};

/// `Q = 2/γ + γ/2`.
pub fn background_charge(gamma: f64) -> f64 {
    2.0 / gamma + gamma / 2.0
}

/// Which normalization a chaos measure carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChaosKind {
    /// `γ ∈ (0, 2)`.
    Subcritical(f64),
    /// `γ = 2` with the `√(π/2) (ln 1/ε)^{1/2}` push.
    Critical,
    /// `γ = 2` without the push; its mass vanishes as `ε → 0`.
    CriticalUncorrected,
}

impl ChaosKind {
    pub fn subcritical(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 2.0 {
            Ok(Self::Subcritical(gamma))
        } else {
            Err(Error::InvalidGamma(gamma))
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            Self::Subcritical(g) => g,
            _ => 2.0,
        }
    }

    pub fn is_critical(&self) -> bool {
        !matches!(self, Self::Subcritical(_))
    }

    /// Log of the deterministic prefactor multiplying `e^{γX − γ²σ²/2} dλ_τ`.
    pub fn log_prefactor(&self, tau: ComplexUH, eps: f64, cfg: QSeriesConfig) -> Result<f64> {
        let theta = variance_offset(tau, cfg)?;
        let ln_im = tau.im().ln();
        Ok(match *self {
            Self::Subcritical(g) => 0.5 * g * g * theta - 0.5 * g * background_charge(g) * ln_im,
            Self::Critical => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(Error::InvalidParameter("critical chaos needs 0 < eps < 1"));
                }
                0.5 * (0.5 * PI).ln() + 0.5 * (1.0 / eps).ln().ln() + 2.0 * theta - 2.0 * ln_im
            }
            Self::CriticalUncorrected => 2.0 * theta - 2.0 * ln_im,
        })
    }
}

/// `ε = 2√(Im τ)/g`: two grid spacings of `ĝ_τ`, so the circle average is resolved.
pub fn default_eps(tau: ComplexUH, grid: usize) -> f64 {
    2.0 * tau.im().sqrt() / grid as f64
}

/// Spectral cutoff `N`, FFT grid `g` and circle radius `ε` of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub cutoff: usize,
    pub grid: usize,
    pub eps: f64,
}

impl Discretization {
    pub fn new(cutoff: usize, grid: usize, eps: f64) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidParameter("spectral cutoff must be at least 1"));
        }
        if !grid.is_power_of_two() || grid < 2 * cutoff + 1 {
            return Err(Error::InvalidParameter("grid must be a power of two with grid >= 2N+1"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter("eps must be positive"));
        }
        Ok(Self { cutoff, grid, eps })
    }

    /// `N = g/4` and `ε = 2√(Im τ)/g`. The ratio `εN/√(Im τ)` is the same for
    /// every `τ`, which keeps modular images of one setup exactly comparable.
    pub fn tied(tau: ComplexUH, grid: usize) -> Result<Self> {
        Self::new(grid / 4, grid, default_eps(tau, grid))
    }

    /// Smallest tied-style setup resolving a prescribed `ε`:
    /// `g = 2^⌈log₂(2√(Im τ)/ε)⌉`, `N = ⌈√(Im τ)/(2ε)⌉`.
    pub fn for_eps(tau: ComplexUH, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive"));
        }
        let s = tau.im().sqrt();
        let cutoff = (s / (2.0 * eps)).ceil().max(1.0) as usize;
        let grid = ((2.0 * s / eps).ceil() as usize).max(2 * cutoff + 1).next_power_of_two();
        Self::new(cutoff, grid, eps)
    }
}

/// A chaos measure on the `g × g` grid of cells centred at `(j₁/g, j₂/g)`,
/// stored row-major in `j₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosMeasure {
    grid: usize,
    weights: Vec<f64>,
    gamma: f64,
    tau: ComplexUH,
    eps: f64,
    critical: bool,
    seed: Option<RngStream>,
}

impl ChaosMeasure {
    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> ComplexUH {
        self.tau
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn is_critical(&self) -> bool {
        self.critical
    }

    pub fn seed(&self) -> Option<RngStream> {
        self.seed
    }

    pub fn with_seed(mut self, seed: RngStream) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn max_cell_fraction(&self) -> f64 {
        let max = self.weights.iter().fold(0.0f64, |m, &w| m.max(w));
        max / self.total_mass()
    }

    /// Mass of the cells whose centres satisfy `pred(x₁, x₂)`.
    pub fn mass_where(&self, pred: impl Fn(f64, f64) -> bool) -> f64 {
        let g = self.grid;
        let h = 1.0 / g as f64;
        let mut acc = 0.0;
        for j1 in 0..g {
            for j2 in 0..g {
                if pred(j1 as f64 * h, j2 as f64 * h) {
                    acc += self.weights[j1 * g + j2];
                }
            }
        }
        acc
    }

    /// `Σ f_j w_j` for per-cell values `f`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.weights.len() {
            return Err(Error::InvalidParameter("integrand must have one value per cell"));
        }
        Ok(f.iter().zip(self.weights.iter()).map(|(a, b)| a * b).sum())
    }

    /// `ψ̃⁻¹_* M`: the mass of each cell moves to the cell of `ψ̃⁻¹(centre)`.
    /// On grid centres `ψ̃⁻¹` is a bijection, so this permutes the weights.
    pub fn pushforward(&self, psi: &ModularElement) -> Self {
        let g = self.grid;
        let mut out = alloc::vec![0.0; g * g];
        for j1 in 0..g {
            for j2 in 0..g {
                let (k1, k2) = psi.act_on_grid_inverse(j1, j2, g);
                out[k1 * g + k2] += self.weights[j1 * g + j2];
            }
        }
        Self { weights: out, ..self.clone() }
    }
}

fn build_measure(field_eps: &SpectralField, kind: ChaosKind, grid: usize, cfg: QSeriesConfig) -> Result<ChaosMeasure> {
    let eps = field_eps.eps().ok_or(Error::MissingRegularization)?;
    let tau = field_eps.tau();
    let gamma = kind.gamma();
    let sigma2 = truncated_variance(tau, field_eps.cutoff(), Some(eps));
    let log_a = kind.log_prefactor(tau, eps, cfg)?;
    let area = tau.im() / (grid * grid) as f64;
    let values = field_eps.to_grid(grid)?;
    let weights = values.iter().map(|&x| (log_a + gamma * x - 0.5 * gamma * gamma * sigma2).exp() * area).collect();
    Ok(ChaosMeasure { grid, weights, gamma, tau, eps, critical: kind.is_critical(), seed: None })
}

/// Subcritical measure `M_{γ,τ,ε}` from a circle-averaged field sample.
pub fn chaos_measure(field_eps: &SpectralField, gamma: f64, grid: usize, cfg: QSeriesConfig) -> Result<ChaosMeasure> {
    build_measure(field_eps, ChaosKind::subcritical(gamma)?, grid, cfg)
}

/// Critical measure `M_{2,τ,ε}`; `corrected = false` drops the `√(π/2)(ln 1/ε)^{1/2}` push.
pub fn critical_chaos_measure(field_eps: &SpectralField, grid: usize, corrected: bool, cfg: QSeriesConfig) -> Result<ChaosMeasure> {
    let kind = if corrected { ChaosKind::Critical } else { ChaosKind::CriticalUncorrected };
    build_measure(field_eps, kind, grid, cfg)
}

/// `E[M_{γ,τ}(𝕋)] = e^{(γ²/2)Θ(τ) − (γQ/2) ln Im τ} · Im τ`.
pub fn expected_total_mass(tau: ComplexUH, gamma: f64, cfg: QSeriesConfig) -> Result<f64> {
    Ok(ChaosKind::subcritical(gamma)?.log_prefactor(tau, 0.5, cfg)?.exp() * tau.im())
}

/// Total and largest cell mass of one sampled measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSummary {
    pub total: f64,
    pub max_cell: f64,
}

impl MassSummary {
    pub fn max_cell_fraction(&self) -> f64 {
        self.max_cell / self.total
    }
}

/// Replica engine that turns grid field samples into chaos masses without
/// materializing a [`ChaosMeasure`].
///
/// An optional per-cell tilt `t_j` multiplies the cell weights, which is how
/// insertion factors `e^{γH}` enter.
#[derive(Debug, Clone)]
pub struct ChaosSampler {
    field: GridSampler,
    kind: ChaosKind,
    disc: Discretization,
    scale: f64,
    shift: f64,
    tilt: Option<Vec<f64>>,
}

impl ChaosSampler {
    pub fn new(tau: ComplexUH, disc: Discretization, kind: ChaosKind, cfg: QSeriesConfig) -> Result<Self> {
        let field = GridSampler::new(tau, disc.cutoff, disc.grid, Some(disc.eps))?;
        let gamma = kind.gamma();
        let area = tau.im() / (disc.grid * disc.grid) as f64;
        let scale = kind.log_prefactor(tau, disc.eps, cfg)?.exp() * area;
        let shift = 0.5 * gamma * gamma * field.variance();
        Ok(Self { field, kind, disc, scale, shift, tilt: None })
    }

    pub fn with_tilt(mut self, tilt: Vec<f64>) -> Result<Self> {
        if tilt.len() != self.disc.grid * self.disc.grid || tilt.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter("tilt must be finite, nonnegative and one value per cell"));
        }
        self.tilt = Some(tilt);
        Ok(self)
    }

    pub fn tau(&self) -> ComplexUH {
        self.field.tau()
    }

    pub fn kind(&self) -> ChaosKind {
        self.kind
    }

    pub fn discretization(&self) -> Discretization {
        self.disc
    }

    /// `σ²_ε` of the simulated field.
    pub fn variance(&self) -> f64 {
        self.field.variance()
    }

    /// Samples fields for `a` (and `b`) into `buf`; see [`GridSampler::sample_into`].
    pub fn sample_fields(&self, a: RngStream, b: Option<RngStream>, buf: &mut Vec<Complex64>) {
        self.field.sample_into(a, b, buf);
    }

    /// Mass summaries of the fields currently held in `buf` (real part, then imaginary part).
    pub fn summarize(&self, buf: &[Complex64]) -> (MassSummary, MassSummary) {
        let gamma = self.kind.gamma();
        let mut sa = MassSummary { total: 0.0, max_cell: 0.0 };
        let mut sb = sa;
        for (j, z) in buf.iter().enumerate() {
            let t = self.tilt.as_ref().map_or(1.0, |t| t[j]);
            let wa = t * (gamma * z.re - self.shift).exp();
            let wb = t * (gamma * z.im - self.shift).exp();
            sa.total += wa;
            sb.total += wb;
            sa.max_cell = sa.max_cell.max(wa);
            sb.max_cell = sb.max_cell.max(wb);
        }
        for s in [&mut sa, &mut sb] {
            s.total *= self.scale;
            s.max_cell *= self.scale;
        }
        (sa, sb)
    }

    /// Draws one or two independent replicas and returns their mass summaries.
    pub fn sample_masses(&self, a: RngStream, b: Option<RngStream>, buf: &mut Vec<Complex64>) -> (MassSummary, Option<MassSummary>) {
        self.sample_fields(a, b, buf);
        let (sa, sb) = self.summarize(buf);
        (sa, b.map(|_| sb))
    }

    /// Per-cell weights of the field in the real part of `buf`.
    pub fn weights_from_real(&self, buf: &[Complex64]) -> Vec<f64> {
        self.weights_with(buf, |z| z.re)
    }

    /// Per-cell weights of the field in the imaginary part of `buf`.
    pub fn weights_from_imag(&self, buf: &[Complex64]) -> Vec<f64> {
        self.weights_with(buf, |z| z.im)
    }

    fn weights_with(&self, buf: &[Complex64], part: impl Fn(&Complex64) -> f64) -> Vec<f64> {
        let gamma = self.kind.gamma();
        buf.iter()
            .enumerate()
            .map(|(j, z)| self.scale * self.tilt.as_ref().map_or(1.0, |t| t[j]) * (gamma * part(z) - self.shift).exp())
            .collect()
    }

    /// Full measure of one replica, tilt included.
    pub fn measure(&self, stream: RngStream, buf: &mut Vec<Complex64>) -> ChaosMeasure {
        self.sample_fields(stream, None, buf);
        ChaosMeasure {
            grid: self.disc.grid,
            weights: self.weights_from_real(buf),
            gamma: self.kind.gamma(),
            tau: self.tau(),
            eps: self.disc.eps,
            critical: self.kind.is_critical(),
            seed: Some(stream),
        }
    }
}

/// Runs `count` replicas with streams `(seed, 0..count)`, two per transform,
/// handing each replica's summary to `sink` in replica order.
pub fn for_each_replica(sampler: &ChaosSampler, seed: u64, count: usize, mut sink: impl FnMut(usize, MassSummary)) {
    let mut buf = Vec::new();
    for (a, b) in replica_pairs(count) {
        let (sa, sb) = sampler.sample_masses(RngStream::new(seed, a), b.map(|b| RngStream::new(seed, b)), &mut buf);
        sink(a as usize, sa);
        if let (Some(b), Some(sb)) = (b, sb) {
            sink(b as usize, sb);
        }
    }
}
