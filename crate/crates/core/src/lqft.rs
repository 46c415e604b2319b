//! Liouville partition functions on `𝕋_τ` with vertex insertions.
//!
//! The zero mode `c` is integrated in closed form,
//!
//! `Π = Z^FF(τ) e^{C_τ(z)} γ⁻¹ μ^{−s/γ} Γ(s/γ) E[(∫ e^{γH} dM_{γ,τ})^{−s/γ}]`, `s = Σ α_i`,
//!
//! so Monte Carlo randomness enters only through the tilted chaos mass.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::Gamma as GammaDist;

use crate::error::{Error, Result};
use crate::gff::{free_field_partition, half_lattice, mode_weight, SpectralField};
use crate::gmc::{background_charge, ChaosKind, ChaosSampler, Discretization};
use crate::rng::{replica_pairs, RngStream};
use crate::special_fn::{ln_gamma, variance_offset, ComplexUH, QSeriesConfig};
use crate::stats::MeanEstimate;
use crate::torus::TorusPoint;
use crate::torus_green::green_closed_form;

/// A vertex insertion `e^{αφ(z)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub z: TorusPoint,
    pub alpha: f64,
}

/// Insertions at pairwise distinct points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InsertionSet {
    points: Vec<Insertion>,
}

/// Outcome of checking `Σα_i > 0` and `α_i < Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeibergStatus {
    Admissible,
    SumViolation { sum: f64 },
    LocalViolation(SeibergDiagnostic),
}

/// First insertion with `α_i ≥ Q`; the partition function vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeibergDiagnostic {
    pub index: usize,
    pub alpha: f64,
    pub q: f64,
}

impl fmt::Display for SeibergDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "insertion {} has alpha = {} >= Q = {}; the partition function vanishes", self.index, self.alpha, self.q)
    }
}

impl From<SeibergDiagnostic> for Error {
    fn from(d: SeibergDiagnostic) -> Self {
        Error::SeibergViolationLocal { index: d.index, alpha: d.alpha, q: d.q }
    }
}

impl InsertionSet {
    pub fn new(points: Vec<Insertion>) -> Result<Self> {
        for i in 0..points.len() {
            if !points[i].alpha.is_finite() {
                return Err(Error::InvalidParameter("insertion weights must be finite"));
            }
            for j in 0..i {
                if points[i].z.sub(&points[j].z).is_origin() {
                    return Err(Error::DuplicateInsertion { first: j, second: i });
                }
            }
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(z: TorusPoint, alpha: f64) -> Result<Self> {
        Self::new(vec![Insertion { z, alpha }])
    }

    pub fn points(&self) -> &[Insertion] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `s = Σ α_i`.
    pub fn total_alpha(&self) -> f64 {
        self.points.iter().map(|p| p.alpha).sum()
    }

    pub fn seiberg_status(&self, q: f64) -> SeibergStatus {
        let sum = self.total_alpha();
        if !(sum > 0.0) {
            return SeibergStatus::SumViolation { sum };
        }
        match self.points.iter().position(|p| p.alpha >= q) {
            Some(index) => SeibergStatus::LocalViolation(SeibergDiagnostic { index, alpha: self.points[index].alpha, q }),
            None => SeibergStatus::Admissible,
        }
    }

    pub fn seiberg_ok(&self, q: f64) -> bool {
        self.seiberg_status(q) == SeibergStatus::Admissible
    }

    /// The same weights at the image points `f(z_i)`.
    pub fn mapped(&self, f: impl Fn(TorusPoint) -> TorusPoint) -> Result<Self> {
        Self::new(self.points.iter().map(|p| Insertion { z: f(p.z), alpha: p.alpha }).collect())
    }
}

/// Coupling `γ ∈ (0, 2]`, cosmological constant `μ > 0` and `Q = 2/γ + γ/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqftParams {
    gamma: f64,
    mu: f64,
    q: f64,
}

impl LqftParams {
    pub fn new(gamma: f64, mu: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 2.0) {
            return Err(Error::InvalidGamma(gamma));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter("cosmological constant must be positive"));
        }
        Ok(Self { gamma, mu, q: background_charge(gamma) })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.gamma, mu)
    }
}

/// Replica count, seed, batch size and confidence level of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub replicas: usize,
    pub seed: u64,
    pub batch: usize,
    pub ci_level: f64,
}

impl MonteCarloConfig {
    pub fn new(replicas: usize, seed: u64) -> Result<Self> {
        Self { replicas, seed, ..Self::default() }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.replicas == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter("replicas and batch must be positive"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidParameter("ci_level must lie in (0, 1)"));
        }
        Ok(self)
    }
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self { replicas: 1000, seed: 0, batch: 64, ci_level: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub diagnostic: Option<SeibergDiagnostic>,
}

/// `Δ_α = (α/2)(Q − α/2)`.
pub fn conformal_weight(alpha: f64, q: f64) -> f64 {
    0.5 * alpha * (q - 0.5 * alpha)
}

/// `H(x) = Σ α_i G_τ(x − z_i)` with the closed-form Green function.
pub fn insertion_potential(tau: ComplexUH, ins: &InsertionSet, x: TorusPoint, cfg: QSeriesConfig) -> Result<f64> {
    let mut acc = 0.0;
    for p in ins.points() {
        acc += p.alpha * green_closed_form(tau, x.sub(&p.z), cfg)?;
    }
    Ok(acc)
}

/// `C_τ(z) = Σ_{i<j} α_iα_j G_τ(z_i − z_j) + (Θ(τ)/2) Σ α_i² − (Q/2) ln Im τ Σ α_i`.
pub fn insertion_constant(tau: ComplexUH, ins: &InsertionSet, q: f64, cfg: QSeriesConfig) -> Result<f64> {
    if ins.is_empty() {
        return Ok(0.0);
    }
    let pts = ins.points();
    let mut pair = 0.0;
    for i in 0..pts.len() {
        for j in 0..i {
            pair += pts[i].alpha * pts[j].alpha * green_closed_form(tau, pts[i].z.sub(&pts[j].z), cfg)?;
        }
    }
    let sq: f64 = pts.iter().map(|p| p.alpha * p.alpha).sum();
    Ok(pair + 0.5 * variance_offset(tau, cfg)? * sq - 0.5 * q * tau.im().ln() * ins.total_alpha())
}

/// `(1 + 6Q²)/(96π)`, i.e. `c_L/(96π)`.
pub fn weyl_log_coefficient(q: f64) -> f64 {
    (1.0 + 6.0 * q * q) / (96.0 * PI)
}

/// `Π(e^φ ĝ_τ)/Π(ĝ_τ) = exp((1+6Q²)/(96π) ∫|∇φ|² dλ_τ)`.
pub fn weyl_anomaly_factor(phi: &SpectralField, q: f64) -> f64 {
    (weyl_log_coefficient(q) * phi.dirichlet_energy()).exp()
}

/// `γ⁻¹ μ^{−s/γ} Γ(s/γ) I^{−s/γ}`, the closed form of
/// `∫_ℝ e^{sc} exp(−μ e^{γc} I) dc`.
pub fn c_integral_closed_form(s: f64, gamma: f64, mu: f64, mass: f64) -> f64 {
    let a = s / gamma;
    (ln_gamma(a) - gamma.ln() - a * mu.ln() - a * mass.ln()).exp()
}

/// Trapezoid rule for `∫_ℝ e^{sc} exp(−μ e^{γc} I) dc` after the
/// compactifying map `c = c* + w u/(1 − u²)`, `u ∈ (−1, 1)`, where `c*` is the
/// integrand's peak.
pub fn c_integral_quadrature(s: f64, gamma: f64, mu: f64, mass: f64, points: usize) -> f64 {
    let c_star = (s / (gamma * mu * mass)).ln() / gamma;
    let w = 4.0 / s.min(gamma);
    let log_peak = s * c_star - s / gamma;
    let h = 2.0 / points as f64;
    let mut acc = 0.0;
    for k in 1..points {
        let u = -1.0 + k as f64 * h;
        let d = 1.0 - u * u;
        let c = c_star + w * u / d;
        let jac = w * (1.0 + u * u) / (d * d);
        let log_f = s * c - mu * (gamma * c).exp() * mass - log_peak;
        acc += jac * log_f.exp();
    }
    acc * h * log_peak.exp()
}

/// How `e^{γH}` enters the discretized chaos integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InsertionKernel {
    /// `H_ε(x_j) = Σ α_i E[X_ε(x_j) X_ε(z_i)]`, the covariance of the simulated
    /// field itself. This is the exact Girsanov shift of the discretization.
    #[default]
    Matched,
    /// Closed-form `H` at cell centres; cells holding an insertion are averaged
    /// by uniform subdivision until the average moves by less than 1e-3.
    ClosedForm,
}

const MAX_SUBDIVISION: u32 = 9;

/// `e^{γH_ε}` on the grid for [`InsertionKernel::Matched`], via one inverse FFT.
pub fn matched_insertion_potential(tau: ComplexUH, ins: &InsertionSet, disc: Discretization) -> Result<Vec<f64>> {
    let mut field = SpectralField::zeros(tau, disc.cutoff)?;
    for (n, m) in half_lattice(disc.cutoff) {
        let w = mode_weight(tau, n, m, Some(disc.eps));
        let mut phase = Complex64::new(0.0, 0.0);
        for p in ins.points() {
            let arg = -2.0 * PI * (n as f64 * p.z.x1() + m as f64 * p.z.x2());
            phase += Complex64::from_polar(p.alpha, arg);
        }
        field.set_mode(n, m, phase * w * w)?;
    }
    field.to_grid(disc.grid)
}

fn closed_form_tilt(tau: ComplexUH, ins: &InsertionSet, gamma: f64, grid: usize, cfg: QSeriesConfig) -> Result<Vec<f64>> {
    let h = 1.0 / grid as f64;
    let mut tilt = Vec::with_capacity(grid * grid);
    for j1 in 0..grid {
        for j2 in 0..grid {
            let x = TorusPoint::new(j1 as f64 * h, j2 as f64 * h);
            let singular = ins.points().iter().any(|p| {
                let (d1, d2) = x.sub(&p.z).centered();
                d1.abs() <= 0.5 * h && d2.abs() <= 0.5 * h
            });
            let value = if singular {
                subdivided_average(tau, ins, gamma, x, h, cfg)?
            } else {
                (gamma * insertion_potential(tau, ins, x, cfg)?).exp()
            };
            tilt.push(value);
        }
    }
    Ok(tilt)
}

fn subdivided_average(tau: ComplexUH, ins: &InsertionSet, gamma: f64, centre: TorusPoint, h: f64, cfg: QSeriesConfig) -> Result<f64> {
    let mut prev = f64::NAN;
    for level in 1..=MAX_SUBDIVISION {
        let k = 1usize << level;
        let step = h / k as f64;
        let mut acc = 0.0;
        for a in 0..k {
            for b in 0..k {
                let dx = -0.5 * h + (a as f64 + 0.5) * step;
                let dy = -0.5 * h + (b as f64 + 0.5) * step;
                let x = centre.add(&TorusPoint::new(dx, dy));
                acc += (gamma * insertion_potential(tau, ins, x, cfg)?).exp();
            }
        }
        let avg = acc / (k * k) as f64;
        if (avg - prev).abs() < 1e-3 * avg {
            return Ok(avg);
        }
        prev = avg;
    }
    Ok(prev)
}

fn chaos_kind(gamma: f64) -> Result<ChaosKind> {
    if gamma == 2.0 {
        Ok(ChaosKind::Critical)
    } else {
        ChaosKind::subcritical(gamma)
    }
}

/// Everything needed to draw replicas of `(∫ e^{γH} dM_{γ,τ})^{−s/γ}` and to
/// assemble them into `Π`.
#[derive(Debug, Clone)]
pub struct PartitionProblem {
    params: LqftParams,
    tau: ComplexUH,
    ins: InsertionSet,
    chaos: ChaosSampler,
    potential: Vec<f64>,
    log_deterministic: f64,
    exponent: f64,
}

/// A problem ready to sample, or the diagnostic of a vanishing partition function.
#[derive(Debug, Clone)]
pub enum PartitionSetup {
    Ready(alloc::boxed::Box<PartitionProblem>),
    Vanishing(SeibergDiagnostic),
}

impl PartitionSetup {
    /// The problem, or `SeibergViolationLocal` for callers that need samples.
    pub fn into_problem(self) -> Result<PartitionProblem> {
        match self {
            Self::Ready(p) => Ok(*p),
            Self::Vanishing(d) => Err(d.into()),
        }
    }
}

/// One weighted sample of the Liouville field and measure on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleSample {
    /// `φ = c + X_ε + H − (Q/2) ln Im τ` at the grid points.
    pub field: Vec<f64>,
    /// Cell masses of `e^{γc} e^{γH} dM`; they sum to `volume`.
    pub measure: Vec<f64>,
    pub volume: f64,
    pub zero_mode: f64,
    /// Importance weight `(∫ e^{γH} dM)^{−s/γ}`.
    pub weight: f64,
}

impl PartitionProblem {
    /// `SeibergViolationSum` for `Σα ≤ 0`; a [`PartitionSetup::Vanishing`]
    /// diagnostic when some `α_i ≥ Q`.
    pub fn prepare(params: LqftParams, tau: ComplexUH, ins: &InsertionSet, disc: Discretization, kernel: InsertionKernel, cfg: QSeriesConfig) -> Result<PartitionSetup> {
        match ins.seiberg_status(params.q()) {
            SeibergStatus::SumViolation { sum } => return Err(Error::SeibergViolationSum { sum }),
            SeibergStatus::LocalViolation(d) => return Ok(PartitionSetup::Vanishing(d)),
            SeibergStatus::Admissible => {}
        }
        let gamma = params.gamma();
        let (potential, tilt) = match kernel {
            InsertionKernel::Matched => {
                let h = matched_insertion_potential(tau, ins, disc)?;
                let t = h.iter().map(|v| (gamma * v).exp()).collect();
                (h, t)
            }
            InsertionKernel::ClosedForm => {
                let t = closed_form_tilt(tau, ins, gamma, disc.grid, cfg)?;
                (t.iter().map(|v| v.ln() / gamma).collect(), t)
            }
        };
        let chaos = ChaosSampler::new(tau, disc, chaos_kind(gamma)?, cfg)?.with_tilt(tilt)?;
        let log_deterministic = free_field_partition(tau, cfg)?.ln() + insertion_constant(tau, ins, params.q(), cfg)?;
        Ok(PartitionSetup::Ready(alloc::boxed::Box::new(Self {
            params,
            tau,
            ins: ins.clone(),
            chaos,
            potential,
            log_deterministic,
            exponent: ins.total_alpha() / gamma,
        })))
    }

    pub fn params(&self) -> LqftParams {
        self.params
    }

    pub fn tau(&self) -> ComplexUH {
        self.tau
    }

    pub fn insertions(&self) -> &InsertionSet {
        &self.ins
    }

    pub fn discretization(&self) -> Discretization {
        self.chaos.discretization()
    }

    /// `H` on the grid (the log of the tilt divided by `γ`).
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `s/γ`.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `ln Z^FF(τ) + C_τ(z)`.
    pub fn log_deterministic(&self) -> f64 {
        self.log_deterministic
    }

    /// Tilted chaos masses `∫ e^{γH} dM` of replicas `a` (and `b`).
    pub fn chaos_integral_pair(&self, a: RngStream, b: Option<RngStream>, buf: &mut Vec<Complex64>) -> (f64, Option<f64>) {
        let (sa, sb) = self.chaos.sample_masses(a, b, buf);
        (sa.total, sb.map(|s| s.total))
    }

    /// Moment samples `(∫ e^{γH} dM)^{−s/γ}` of replicas `a` (and `b`).
    pub fn replica_pair(&self, a: RngStream, b: Option<RngStream>, buf: &mut Vec<Complex64>) -> (f64, Option<f64>) {
        let (ia, ib) = self.chaos_integral_pair(a, b, buf);
        (ia.powf(-self.exponent), ib.map(|i| i.powf(-self.exponent)))
    }

    /// Replicas `(seed, 0..count)` in order, two per transform.
    pub fn moment_samples(&self, seed: u64, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        let mut buf = Vec::new();
        for (a, b) in replica_pairs(count) {
            let (ya, yb) = self.replica_pair(RngStream::new(seed, a), b.map(|b| RngStream::new(seed, b)), &mut buf);
            out.push(ya);
            out.extend(yb);
        }
        out
    }

    /// `Z^FF e^{C_τ} γ⁻¹ μ^{−s/γ} Γ(s/γ)`.
    pub fn prefactor(&self, mu: f64) -> f64 {
        let a = self.exponent;
        (self.log_deterministic + ln_gamma(a) - self.params.gamma().ln() - a * mu.ln()).exp()
    }

    pub fn assemble(&self, moment: &MeanEstimate, mu: f64) -> PartitionEstimate {
        let p = self.prefactor(mu);
        PartitionEstimate { value: p * moment.mean, std_error: p * moment.std_error, replicas: moment.count, diagnostic: None }
    }

    /// Draws `(φ, e^{γφ} dλ)` for replica `stream`. Without `volume`, the volume
    /// is drawn from `Gamma(s/γ, μ)` on a stream disjoint from the field streams.
    pub fn liouville_sample(&self, volume: Option<f64>, stream: RngStream, buf: &mut Vec<Complex64>) -> Result<LiouvilleSample> {
        let y = match volume {
            Some(y) if y > 0.0 && y.is_finite() => y,
            Some(_) => return Err(Error::InvalidParameter("volume must be positive")),
            None => sample_volume(self.exponent, self.params.mu(), stream)?,
        };
        self.chaos.sample_fields(stream, None, buf);
        let cells = self.chaos.weights_from_real(buf);
        let mass: f64 = cells.iter().sum();
        let gamma = self.params.gamma();
        let zero_mode = (y / mass).ln() / gamma;
        let offset = zero_mode - 0.5 * self.params.q() * self.tau.im().ln();
        let field = buf.iter().zip(self.potential.iter()).map(|(x, h)| offset + x.re + h).collect();
        let measure = cells.iter().map(|w| w * (y / mass)).collect();
        Ok(LiouvilleSample { field, measure, volume: y, zero_mode, weight: mass.powf(-self.exponent) })
    }
}

/// Stream id offset reserving the upper half of the id space for volume draws.
const VOLUME_STREAM: u64 = 1 << 63;

/// `Gamma(shape, rate μ)` draw attached to replica `stream`.
pub fn sample_volume(shape: f64, mu: f64, stream: RngStream) -> Result<f64> {
    let dist = GammaDist::new(shape, 1.0 / mu).map_err(|_| Error::InvalidParameter("Gamma law needs positive shape and rate"))?;
    let mut rng = RngStream::new(stream.seed, stream.stream_id ^ VOLUME_STREAM).rng();
    Ok(rng.sample(dist))
}

/// Serial Monte Carlo estimate of `Π_{γ,μ}`.
pub fn partition_function(
    params: LqftParams,
    tau: ComplexUH,
    ins: &InsertionSet,
    mc: MonteCarloConfig,
    disc: Discretization,
    cfg: QSeriesConfig,
) -> Result<PartitionEstimate> {
    let mc = mc.validated()?;
    if mc.replicas < 100 {
        return Err(Error::InvalidParameter("partition estimates need at least 100 replicas"));
    }
    match PartitionProblem::prepare(params, tau, ins, disc, InsertionKernel::Matched, cfg)? {
        PartitionSetup::Vanishing(d) => Ok(PartitionEstimate { value: 0.0, std_error: 0.0, replicas: 0, diagnostic: Some(d) }),
        PartitionSetup::Ready(p) => {
            let samples = p.moment_samples(mc.seed, mc.replicas);
            Ok(p.assemble(&MeanEstimate::from_samples(&samples)?, params.mu()))
        }
    }
}
