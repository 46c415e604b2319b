//! Experiment drivers shared by the subcommands and the acceptance checks.

use rayon::prelude::*;
use torus_lqg::gmc::{ChaosKind, Discretization};
use torus_lqg::lqft::{
    conformal_weight, Insertion, InsertionKernel, InsertionSet, LqftParams, PartitionEstimate, PartitionProblem, PartitionSetup,
};
use torus_lqg::moduli_lqg::{joint_law_sampler, DensityGrid, DensityTable, JointSample, MatterCft, ModulusModel, ModulusSampler};
use torus_lqg::rng::RngStream;
use torus_lqg::stats::MeanEstimate;
use torus_lqg::{ComplexUH, ModularElement, QSeriesConfig, TorusPoint};

use crate::cache::{config_hash, MomentCache};
use crate::config::parse_list;
use crate::error::{CliError, CliResult};
use crate::parallel;

/// `"x1,x2,α; x1,x2,α; …"`.
pub fn parse_insertions(s: &str) -> CliResult<InsertionSet> {
    let mut pts = Vec::new();
    for part in s.split(';').filter(|p| !p.trim().is_empty()) {
        match parse_list(part)?.as_slice() {
            [x1, x2, a] => pts.push(Insertion { z: TorusPoint::new(*x1, *x2), alpha: *a }),
            _ => return Err(CliError::Config(format!("insertion `{part}` must be `x1,x2,alpha`"))),
        }
    }
    Ok(InsertionSet::new(pts)?)
}

/// `inversion`, `translation`, `identity` or `a,b,c,d`.
pub fn parse_psi(s: &str) -> CliResult<ModularElement> {
    match s.trim() {
        "inversion" | "S" => Ok(ModularElement::inversion()),
        "translation" | "T" => Ok(ModularElement::translation()),
        "identity" => Ok(ModularElement::identity()),
        other => {
            let v = parse_list(other)?;
            if v.len() != 4 || v.iter().any(|x| x.fract() != 0.0) {
                return Err(CliError::Config(format!("modular element `{other}` must be four integers a,b,c,d")));
            }
            Ok(ModularElement::new(v[0] as i64, v[1] as i64, v[2] as i64, v[3] as i64)?)
        }
    }
}

/// `pure`, `ising` or `ffpower:<c>`.
pub fn parse_matter(s: &str) -> CliResult<MatterCft> {
    match s.trim() {
        "pure" => Ok(MatterCft::PureGravity),
        "ising" => Ok(MatterCft::Ising),
        other => match other.strip_prefix("ffpower:") {
            Some(c) => {
                let c: f64 = c.parse().map_err(|_| CliError::Config(format!("bad central charge in `{other}`")))?;
                Ok(MatterCft::free_field_power(c)?)
            }
            None => Err(CliError::Config(format!("unknown matter `{other}` (pure, ising or ffpower:<c>)"))),
        },
    }
}

/// `"12x12"` → `(12, 12)`.
pub fn parse_grid_shape(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Config(format!("grid `{s}` must look like 12x12"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn chaos_kind(gamma: f64, uncorrected: bool) -> CliResult<ChaosKind> {
    if gamma == 2.0 {
        Ok(if uncorrected { ChaosKind::CriticalUncorrected } else { ChaosKind::Critical })
    } else if uncorrected {
        Err(CliError::Config("`uncorrected` only applies at gamma = 2".into()))
    } else {
        Ok(ChaosKind::subcritical(gamma)?)
    }
}

/// Discretization from whichever of `N`, `ε`, grid are given; missing pieces
/// follow the tied convention `N = g/4`, `ε = 2√(Im τ)/g`.
pub fn discretization(tau: ComplexUH, cutoff: Option<usize>, eps: Option<f64>, grid: Option<usize>) -> CliResult<Discretization> {
    let s = tau.im().sqrt();
    let d = match (cutoff, eps, grid) {
        (None, None, g) => Discretization::tied(tau, g.unwrap_or(64))?,
        (None, Some(e), None) => Discretization::for_eps(tau, e)?,
        (n, e, g) => {
            let grid = match (g, n, e) {
                (Some(g), _, _) => g,
                (None, Some(n), Some(e)) => ((2.0 * s / e).ceil() as usize).max(2 * n + 1).next_power_of_two(),
                (None, Some(n), None) => (4 * n).next_power_of_two(),
                (None, None, Some(e)) => Discretization::for_eps(tau, e)?.grid,
                (None, None, None) => unreachable!("handled above"),
            };
            let n = n.unwrap_or(grid / 4);
            Discretization::new(n, grid, e.unwrap_or_else(|| 2.0 * s / grid as f64))?
        }
    };
    Ok(d)
}

/// A partition-function estimate with the replica moments behind it.
#[derive(Debug, Clone)]
pub struct PartitionRun {
    pub estimate: PartitionEstimate,
    pub problem: Option<PartitionProblem>,
    pub samples: Vec<f64>,
}

/// Parallel counterpart of `lqft::partition_function` with a selectable kernel.
#[allow(clippy::too_many_arguments)]
pub fn partition(
    params: LqftParams,
    tau: ComplexUH,
    ins: &InsertionSet,
    disc: Discretization,
    kernel: InsertionKernel,
    replicas: usize,
    seed: u64,
    cfg: QSeriesConfig,
) -> CliResult<PartitionRun> {
    if replicas < 100 {
        return Err(CliError::Config("partition estimates need at least 100 replicas".into()));
    }
    match PartitionProblem::prepare(params, tau, ins, disc, kernel, cfg)? {
        PartitionSetup::Vanishing(d) => Ok(PartitionRun {
            estimate: PartitionEstimate { value: 0.0, std_error: 0.0, replicas: 0, diagnostic: Some(d) },
            problem: None,
            samples: Vec::new(),
        }),
        PartitionSetup::Ready(p) => {
            let samples = parallel::moment_samples(&p, seed, replicas);
            let estimate = p.assemble(&MeanEstimate::from_samples(&samples)?, params.mu());
            Ok(PartitionRun { estimate, problem: Some(*p), samples })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpzRow {
    pub mu: f64,
    pub ratio: f64,
    pub expected: f64,
    pub residual: f64,
}

/// `Π_{γ,μ}/Π_{γ,1}` against `μ^{−Σα/γ}` on one shared replica set.
pub fn kpz_rows(problem: &PartitionProblem, samples: &[f64], mus: &[f64]) -> CliResult<Vec<KpzRow>> {
    let m = MeanEstimate::from_samples(samples)?;
    let base = problem.assemble(&m, 1.0).value;
    let a = problem.exponent();
    Ok(mus
        .iter()
        .map(|&mu| {
            let ratio = problem.assemble(&m, mu).value / base;
            let expected = mu.powf(-a);
            KpzRow { mu, ratio, expected, residual: (ratio / expected - 1.0).abs() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModularReport {
    /// `Π` at `ψ(τ)` with the original insertions.
    pub image: PartitionEstimate,
    /// `Π` at `τ` with insertions moved by `ψ̃`.
    pub base: PartitionEstimate,
    /// `∏ |ψ′(τ)|^{−Δ_{α_i}}`.
    pub factor: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub z: f64,
}

/// Compares `Π(ψτ, z)` with `∏|ψ′|^{−Δ} Π(τ, ψ̃z)` on independent replica sets
/// (seeds `seed` and `seed + 1`) and tied discretizations of the same grid.
#[allow(clippy::too_many_arguments)]
pub fn modular_covariance(
    params: LqftParams,
    tau: ComplexUH,
    ins: &InsertionSet,
    psi: &ModularElement,
    grid: usize,
    replicas: usize,
    cfg: QSeriesConfig,
    seed: u64,
) -> CliResult<ModularReport> {
    let image_tau = psi.act_on_uhp(tau);
    let moved = ins.mapped(|z| psi.act_on_torus(z))?;
    let kernel = InsertionKernel::Matched;
    let image = partition(params, image_tau, ins, Discretization::tied(image_tau, grid)?, kernel, replicas, seed, cfg)?.estimate;
    let base = partition(params, tau, &moved, Discretization::tied(tau, grid)?, kernel, replicas, seed.wrapping_add(1), cfg)?.estimate;
    if image.value == 0.0 || base.value == 0.0 {
        return Err(CliError::Config("modular check needs Seiberg-admissible insertions".into()));
    }
    let dpsi = psi.derivative(tau).norm();
    let factor: f64 = ins.points().iter().map(|p| dpsi.powf(-conformal_weight(p.alpha, params.q()))).product();
    let ratio = image.value / (factor * base.value);
    let ratio_se = ratio.abs() * ((image.std_error / image.value).powi(2) + (base.std_error / base.value).powi(2)).sqrt();
    Ok(ModularReport { image, base, factor, ratio, ratio_se, z: (ratio - 1.0) / ratio_se })
}

/// Everything the modulus-density table depends on.
#[derive(Debug, Clone)]
pub struct DensityRequest {
    pub model: ModulusModel,
    pub grid: DensityGrid,
    pub field_grid: usize,
    pub replicas: usize,
    pub seed: u64,
    pub cfg: QSeriesConfig,
}

impl DensityRequest {
    /// Hash of the inputs a GMC moment depends on. `μ` and the matter
    /// partition function enter only the deterministic prefactor and are left out.
    pub fn cache_hash(&self) -> String {
        let p = self.model.params();
        let ins: Vec<String> = self
            .model
            .insertions()
            .points()
            .iter()
            .map(|i| format!("{:016x}:{:016x}:{:016x}", i.z.x1().to_bits(), i.z.x2().to_bits(), i.alpha.to_bits()))
            .collect();
        config_hash(&[
            ("format", "gmc-moment-v1".to_string()),
            ("gamma", format!("{:016x}", p.gamma().to_bits())),
            ("insertions", ins.join(";")),
            ("kernel", "matched".to_string()),
            ("field_grid", self.field_grid.to_string()),
            ("replicas", self.replicas.to_string()),
            ("seed", self.seed.to_string()),
            ("qseries_tolerance", format!("{:016x}", self.cfg.tolerance.to_bits())),
            ("qseries_max_terms", self.cfg.max_terms.to_string()),
        ])
    }

    /// GMC moment at `tau`. Every node uses the same streams `(seed, 0..replicas)`.
    pub fn moment(&self, tau: ComplexUH) -> CliResult<MeanEstimate> {
        let problem = self.model.partition_problem(tau, Discretization::tied(tau, self.field_grid)?, self.cfg)?;
        Ok(MeanEstimate::from_samples(&parallel::moment_samples(&problem, self.seed, self.replicas))?)
    }
}

/// Density table plus the per-node moments, read from or added to `cache`.
pub fn density_table(
    req: &DensityRequest,
    mut cache: Option<&mut MomentCache>,
    mut progress: impl FnMut(usize, usize),
) -> CliResult<(DensityTable, Vec<MeanEstimate>)> {
    let nodes = req.grid.nodes();
    let mut moments = Vec::with_capacity(nodes.len());
    let mut values = Vec::with_capacity(nodes.len());
    let mut ses = Vec::with_capacity(nodes.len());
    for (k, &tau) in nodes.iter().enumerate() {
        let m = match cache.as_deref_mut() {
            Some(c) => c.get_or_compute(tau, || req.moment(tau))?,
            None => req.moment(tau)?,
        };
        let (v, s) = req.model.density_from_moment(tau, &m, req.cfg)?;
        values.push(v);
        ses.push(s);
        moments.push(m);
        progress(k + 1, nodes.len());
    }
    if let Some(c) = cache {
        c.save()?;
    }
    Ok((DensityTable::new(req.grid, values, ses)?, moments))
}

/// Joint draws `(τ, volume[, measure])` for streams `(seed, 0..count)`.
pub fn joint_samples(
    model: &ModulusModel,
    table: &DensityTable,
    field_grid: usize,
    candidates: usize,
    count: usize,
    seed: u64,
    cfg: QSeriesConfig,
) -> CliResult<Vec<JointSample>> {
    let sampler = ModulusSampler::new(table)?;
    (0..count as u64)
        .into_par_iter()
        .map(|k| joint_law_sampler(model, &sampler, field_grid, candidates, RngStream::new(seed, k), cfg).map_err(CliError::from))
        .collect()
}
