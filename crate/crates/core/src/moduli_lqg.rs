//! Liouville quantum gravity on the moduli space of tori: matter and ghost
//! partition functions, the KPZ relations, the density of the Liouville
//! modulus, and samplers for the joint law of volume, modulus and measure.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gff::free_field_partition;
use crate::gmc::Discretization;
use crate::lqft::{insertion_constant, sample_volume, InsertionKernel, InsertionSet, LqftParams, PartitionProblem};
use crate::lqft::{Insertion, LiouvilleSample};
use crate::rng::RngStream;
use crate::special_fn::{dedekind_eta, theta_aux, AuxTheta, ComplexUH, QSeriesConfig};
use crate::stats::MeanEstimate;
use crate::torus::TorusPoint;

/// Matter CFT coupled to gravity. Overall constants of `Z_Matter` are fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatterCft {
    /// `c_m = 0`, `Z_Matter = 1`.
    PureGravity,
    /// Critical Ising model, `c_m = 1/2`.
    Ising,
    /// `c_m = D` free bosons: `Z_Matter = (Z^FF)^D`.
    FreeFieldPower(f64),
}

impl MatterCft {
    pub fn free_field_power(c: f64) -> Result<Self> {
        if !(c <= 1.0) {
            return Err(Error::InvalidCentralCharge(c));
        }
        Ok(Self::FreeFieldPower(c))
    }

    pub fn central_charge(&self) -> f64 {
        match *self {
            Self::PureGravity => 0.0,
            Self::Ising => 0.5,
            Self::FreeFieldPower(c) => c,
        }
    }
}

/// `γ = (√(25 − c_m) − √(1 − c_m))/√6`.
pub fn gamma_from_central_charge(c_m: f64) -> Result<f64> {
    if !(c_m <= 1.0) {
        return Err(Error::InvalidCentralCharge(c_m));
    }
    Ok(((25.0 - c_m).sqrt() - (1.0 - c_m).sqrt()) / 6.0f64.sqrt())
}

/// Root `α = Q − √(Q² + 4Δ_m − 4)` of `Δ_m + (α/2)(Q − α/2) = 1`, the one below `Q`.
pub fn alpha_from_matter_weight(delta_m: f64, q: f64) -> Result<f64> {
    let disc = q * q + 4.0 * delta_m - 4.0;
    if !(disc > 0.0) {
        return Err(Error::NoAdmissibleRoot { delta: delta_m, boundary: disc == 0.0 });
    }
    Ok(q - disc.sqrt())
}

/// `Z_Ghost(τ) = |η(τ)|⁴/(2 Im τ)`.
pub fn ghost_partition(tau: ComplexUH, cfg: QSeriesConfig) -> Result<f64> {
    let e = dedekind_eta(tau, cfg)?.norm_sqr();
    Ok(e * e / (2.0 * tau.im()))
}

pub fn matter_partition(matter: MatterCft, tau: ComplexUH, cfg: QSeriesConfig) -> Result<f64> {
    match matter {
        MatterCft::PureGravity => Ok(1.0),
        MatterCft::Ising => {
            let two_eta = dedekind_eta(tau, cfg)? * 2.0;
            let mut acc = 0.0;
            for k in [AuxTheta::Two, AuxTheta::Three, AuxTheta::Four] {
                acc += (theta_aux(k, tau, cfg)? / two_eta).norm();
            }
            Ok(acc)
        }
        MatterCft::FreeFieldPower(c) => Ok(free_field_partition(tau, cfg)?.powf(c)),
    }
}

/// Positions and matter weights `Δ_m` of the marked points.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertionTemplate {
    points: Vec<TorusPoint>,
    weights: Vec<f64>,
}

impl InsertionTemplate {
    pub fn new(points: Vec<TorusPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidParameter("template needs one matter weight per point and at least one point"));
        }
        Ok(Self { points, weights })
    }

    /// `n` identity operators (`Δ_m = 0`) on the diagonal at `z_k = (k/n, k/n)`.
    pub fn identity(n: usize) -> Result<Self> {
        let pts = (0..n).map(|k| TorusPoint::new(k as f64 / n as f64, k as f64 / n as f64)).collect();
        Self::new(pts, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Insertions with `α_i` solving the matter KPZ relation.
    pub fn insertions(&self, q: f64) -> Result<InsertionSet> {
        let mut out = Vec::with_capacity(self.len());
        for (z, &d) in self.points.iter().zip(self.weights.iter()) {
            out.push(Insertion { z: *z, alpha: alpha_from_matter_weight(d, q)? });
        }
        InsertionSet::new(out)
    }
}

/// Matter, couplings and insertions fixing the law of the Liouville modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusModel {
    matter: MatterCft,
    params: LqftParams,
    ins: InsertionSet,
}

impl ModulusModel {
    /// `γ` follows from `c_m`. Refuses `c_m = 1`, where the identity insertion
    /// sits on the Seiberg boundary `α = γ = Q`.
    pub fn new(matter: MatterCft, mu: f64, template: &InsertionTemplate) -> Result<Self> {
        let c = matter.central_charge();
        if c == 1.0 {
            return Err(Error::CriticalMatter);
        }
        let params = LqftParams::new(gamma_from_central_charge(c)?, mu)?;
        let ins = template.insertions(params.q())?;
        if let crate::lqft::SeibergStatus::SumViolation { sum } = ins.seiberg_status(params.q()) {
            return Err(Error::SeibergViolationSum { sum });
        }
        Ok(Self { matter, params, ins })
    }

    pub fn matter(&self) -> MatterCft {
        self.matter
    }

    pub fn params(&self) -> LqftParams {
        self.params
    }

    pub fn insertions(&self) -> &InsertionSet {
        &self.ins
    }

    /// `s/γ`, the shape of the Gamma law of the volume.
    pub fn volume_shape(&self) -> f64 {
        self.ins.total_alpha() / self.params.gamma()
    }

    /// `PartitionProblem` whose moment samples feed [`Self::density_from_moment`].
    pub fn partition_problem(&self, tau: ComplexUH, disc: Discretization, cfg: QSeriesConfig) -> Result<PartitionProblem> {
        PartitionProblem::prepare(self.params, tau, &self.ins, disc, InsertionKernel::Matched, cfg)?.into_problem()
    }

    /// `e^{C_τ(z)} Z_Matter(τ) (Im τ)ⁿ √(Im τ) |η(τ)|²`.
    pub fn density_prefactor(&self, tau: ComplexUH, cfg: QSeriesConfig) -> Result<f64> {
        let c = insertion_constant(tau, &self.ins, self.params.q(), cfg)?;
        let y = tau.im();
        let eta = dedekind_eta(tau, cfg)?.norm_sqr();
        Ok(c.exp() * matter_partition(self.matter, tau, cfg)? * y.powi(self.ins.len() as i32) * y.sqrt() * eta)
    }

    /// Unnormalized density w.r.t. `λ_S = d²τ/(Im τ)²` and its standard error.
    pub fn density_from_moment(&self, tau: ComplexUH, moment: &MeanEstimate, cfg: QSeriesConfig) -> Result<(f64, f64)> {
        let p = self.density_prefactor(tau, cfg)?;
        Ok((p * moment.mean, p * moment.std_error))
    }

    /// Serial Monte Carlo density at one modulus.
    pub fn density(&self, tau: ComplexUH, disc: Discretization, seed: u64, replicas: usize, cfg: QSeriesConfig) -> Result<(f64, f64)> {
        let problem = self.partition_problem(tau, disc, cfg)?;
        let m = MeanEstimate::from_samples(&problem.moment_samples(seed, replicas))?;
        self.density_from_moment(tau, &m, cfg)
    }

    /// `Z_Matter(τ) √(Im τ) |η(τ)|²`, the closed form the pure-gravity `n = 1`
    /// density should reduce to.
    pub fn reference_density(&self, tau: ComplexUH, cfg: QSeriesConfig) -> Result<f64> {
        Ok(matter_partition(self.matter, tau, cfg)? * tau.im().sqrt() * dedekind_eta(tau, cfg)?.norm_sqr())
    }
}

/// Nodes `τ = u + i y` over the fundamental domain truncated at `Im τ ≤ t_max`.
///
/// `u` is uniform on `[−1/2, 1/2]`. Rows `0..=split` run linearly in `y` from
/// the arc `√(1−u²)` to `Im τ = 2`; the remaining rows are logarithmic up to `t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityGrid {
    pub nu: usize,
    pub nw: usize,
    pub t_max: f64,
}

pub const DEFAULT_T_MAX: f64 = 10.0;
const LOG_START: f64 = 2.0;

impl DensityGrid {
    pub fn new(nu: usize, nw: usize, t_max: f64) -> Result<Self> {
        if nu < 2 || nw < 4 {
            return Err(Error::InvalidParameter("density grid needs at least 2 x 4 nodes"));
        }
        if !(t_max > LOG_START) {
            return Err(Error::InvalidParameter("t_max must exceed 2"));
        }
        Ok(Self { nu, nw, t_max })
    }

    fn split(&self) -> usize {
        (self.nw - 1) / 2
    }

    pub fn u(&self, i: usize) -> f64 {
        -0.5 + i as f64 / (self.nu - 1) as f64
    }

    fn y_at(&self, u: f64, j: usize) -> f64 {
        let s = self.split();
        let floor = (1.0 - u * u).sqrt();
        if j <= s {
            floor + (LOG_START - floor) * j as f64 / s as f64
        } else {
            LOG_START * (self.t_max / LOG_START).powf((j - s) as f64 / (self.nw - 1 - s) as f64)
        }
    }

    pub fn node(&self, i: usize, j: usize) -> ComplexUH {
        let u = self.u(i);
        ComplexUH::new(u, self.y_at(u, j)).expect("grid nodes lie in the upper half-plane")
    }

    /// All nodes, row-major in `i`.
    pub fn nodes(&self) -> Vec<ComplexUH> {
        let mut out = Vec::with_capacity(self.nu * self.nw);
        for i in 0..self.nu {
            for j in 0..self.nw {
                out.push(self.node(i, j));
            }
        }
        out
    }

    fn log_row(&self, j: usize) -> bool {
        j >= self.split()
    }

    /// `∂y/∂t` of row-cell `j` (`t ∈ [0,1]` across the cell) at column position `u`.
    fn y_in_cell(&self, u: f64, j: usize, t: f64) -> (f64, f64) {
        let (a, b) = (self.y_at(u, j), self.y_at(u, j + 1));
        if self.log_row(j) {
            let y = a * (b / a).powf(t);
            (y, y * (b / a).ln())
        } else {
            (a + (b - a) * t, b - a)
        }
    }
}

/// Density values and standard errors on a [`DensityGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub grid: DensityGrid,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl DensityTable {
    pub fn new(grid: DensityGrid, values: Vec<f64>, std_errors: Vec<f64>) -> Result<Self> {
        let n = grid.nu * grid.nw;
        if values.len() != n || std_errors.len() != n {
            return Err(Error::InvalidParameter("density table size does not match its grid"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("density values must be finite and nonnegative"));
        }
        Ok(Self { grid, values, std_errors })
    }

    /// Tabulates `f(τ) = (value, se)` at every node.
    pub fn from_fn(grid: DensityGrid, mut f: impl FnMut(ComplexUH) -> Result<(f64, f64)>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.nu * grid.nw);
        let mut ses = Vec::with_capacity(grid.nu * grid.nw);
        for tau in grid.nodes() {
            let (v, s) = f(tau)?;
            values.push(v);
            ses.push(s);
        }
        Self::new(grid, values, ses)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nw + j]
    }

    /// Mass above `t_max` relative to the tabulated mass. The top row is
    /// continued with the `y`-profile of `reference` (the closed-form
    /// `Z_Matter √(Im τ) |η|²` decay).
    pub fn tail_fraction(&self, reference: impl Fn(ComplexUH) -> Result<f64>) -> Result<f64> {
        let g = self.grid;
        let top = g.nw - 1;
        let mut tail = 0.0;
        for i in 0..g.nu {
            let u = g.u(i);
            let at = |y: f64| ComplexUH::new(u, y);
            let r0 = reference(at(g.t_max)?)?;
            // ∫_{T}^{∞} ρ(y)/ρ(T) y^{-2} dy by the trapezoid rule until the integrand is negligible.
            let h = 0.05;
            let mut acc = 0.0;
            let mut prev = 1.0 / (g.t_max * g.t_max);
            let mut y = g.t_max;
            for _ in 0..20000 {
                y += h;
                let f = reference(at(y)?)? / r0 / (y * y);
                acc += 0.5 * h * (prev + f);
                if f < 1e-16 * acc {
                    break;
                }
                prev = f;
            }
            let wgt = if i == 0 || i == g.nu - 1 { 0.5 } else { 1.0 };
            tail += wgt * self.value(i, top) * acc / (g.nu - 1) as f64;
        }
        let sampler = ModulusSampler::new(self)?;
        Ok(tail / sampler.total_mass)
    }
}

/// Inverse-CDF sampler of the modulus over a density table, bilinear in each
/// cell of the `(u, t)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusSampler {
    grid: DensityGrid,
    corners: Vec<[f64; 4]>,
    cdf: Vec<f64>,
    total_mass: f64,
}

impl ModulusSampler {
    pub fn new(table: &DensityTable) -> Result<Self> {
        let g = table.grid;
        let du = 1.0 / (g.nu - 1) as f64;
        let mut corners = Vec::with_capacity((g.nu - 1) * (g.nw - 1));
        let mut cdf = Vec::with_capacity(corners.capacity());
        let mut acc = 0.0;
        for i in 0..g.nu - 1 {
            for j in 0..g.nw - 1 {
                let mut c = [0.0; 4];
                for (k, (di, dj)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                    // Density in (u, t): f(τ) ∂y/∂t / y², the one-sided Jacobian of this cell.
                    let u = g.u(i + di);
                    let (y, jac) = g.y_in_cell(u, j, dj as f64);
                    c[k] = table.value(i + di, j + dj) * jac / (y * y);
                }
                acc += du * 0.25 * (c[0] + c[1] + c[2] + c[3]);
                corners.push(c);
                cdf.push(acc);
            }
        }
        if !(acc > 0.0) {
            return Err(Error::Empty("density table has no mass"));
        }
        Ok(Self { grid: g, corners, cdf, total_mass: acc })
    }

    /// `∫ f dλ_S` over the truncated domain (trapezoid-exact for the bilinear model).
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Probability of each cell, row-major in `i`.
    pub fn cell_probabilities(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .map(|&c| {
                let p = (c - prev) / self.total_mass;
                prev = c;
                p
            })
            .collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> ComplexUH {
        let g = self.grid;
        let target = rng.random::<f64>() * self.total_mass;
        let k = self.cdf.partition_point(|&c| c < target).min(self.cdf.len() - 1);
        let (i, j) = (k / (g.nw - 1), k % (g.nw - 1));
        let [h00, h10, h01, h11] = self.corners[k];
        let s = linear_inverse(h00 + h01, h10 + h11, rng.random());
        let t = linear_inverse((1.0 - s) * h00 + s * h10, (1.0 - s) * h01 + s * h11, rng.random());
        let u = g.u(i) + s / (g.nu - 1) as f64;
        let (y, _) = g.y_in_cell(u, j, t);
        ComplexUH::new(u, y).expect("sampled modulus lies in the upper half-plane")
    }

    /// Cell index of a modulus inside the truncated domain.
    pub fn cell_of(&self, tau: ComplexUH) -> Option<usize> {
        let g = self.grid;
        let (u, y) = (tau.re(), tau.im());
        if !(-0.5..=0.5).contains(&u) {
            return None;
        }
        let i = (((u + 0.5) * (g.nu - 1) as f64).floor() as usize).min(g.nu - 2);
        (0..g.nw - 1).find(|&j| y >= g.y_at(u, j) && y <= g.y_at(u, j + 1)).map(|j| i * (g.nw - 1) + j)
    }
}

/// Inverse CDF of the density `∝ a(1−x) + b x` on `[0, 1]`.
fn linear_inverse(a: f64, b: f64, v: f64) -> f64 {
    if (b - a).abs() <= 1e-12 * (a + b) {
        return v;
    }
    let x = (-a + (a * a + (b - a) * v * (a + b)).sqrt()) / (b - a);
    x.clamp(0.0, 1.0)
}

/// One draw of the joint law.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    pub tau: ComplexUH,
    pub volume: f64,
    /// Cell masses of the Liouville measure at `tau`, summing to `volume`.
    pub measure: Option<Vec<f64>>,
}

/// Candidates for the sampling-importance-resampling draw of the measure.
pub const MAX_MEASURE_CANDIDATES: usize = 256;

/// Draws `(τ, volume[, measure])` for replica `stream`. The modulus comes from
/// `sampler`, the volume from `Gamma(s/γ, μ)` independently, and, with
/// `candidates > 0`, the measure by resampling that many conditional Liouville
/// samples at fixed volume in proportion to their importance weights.
pub fn joint_law_sampler(
    model: &ModulusModel,
    sampler: &ModulusSampler,
    grid: usize,
    candidates: usize,
    stream: RngStream,
    cfg: QSeriesConfig,
) -> Result<JointSample> {
    if candidates > MAX_MEASURE_CANDIDATES {
        return Err(Error::InvalidParameter("too many measure candidates"));
    }
    let mut rng = stream.rng();
    let tau = sampler.sample(&mut rng);
    let volume = sample_volume(model.volume_shape(), model.params().mu(), stream)?;
    let measure = if candidates == 0 {
        None
    } else {
        let problem = model.partition_problem(tau, Discretization::tied(tau, grid)?, cfg)?;
        let mut buf: Vec<Complex64> = Vec::new();
        let mut draws: Vec<LiouvilleSample> = Vec::with_capacity(candidates);
        for k in 0..candidates {
            let id = (1u64 << 62) | (stream.stream_id << 8) | k as u64;
            draws.push(problem.liouville_sample(Some(volume), RngStream::new(stream.seed, id), &mut buf)?);
        }
        let total: f64 = draws.iter().map(|d| d.weight).sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = draws.len() - 1;
        for (k, d) in draws.iter().enumerate() {
            acc += d.weight;
            if acc >= target {
                pick = k;
                break;
            }
        }
        Some(draws.swap_remove(pick).measure)
    };
    Ok(JointSample { tau, volume, measure })
}

/// `√(Im τ)|η(τ)|²/(Im τ)²`, the pure-gravity modulus density w.r.t. `d²τ`.
pub fn pure_gravity_lebesgue_density(tau: ComplexUH, cfg: QSeriesConfig) -> Result<f64> {
    let y = tau.im();
    Ok(dedekind_eta(tau, cfg)?.norm_sqr() * y.sqrt() / (y * y))
}

#[cfg(test)]
mod tests;
