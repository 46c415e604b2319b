//! The acceptance criteria, shared by `check all` and the `acceptance` test.
//!
//! Each check returns a verdict and a one-line detail. Tolerances and sample
//! sizes are pinned here; `Scale::Quick` shrinks sample sizes only.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use torus_lqg::gff::{build_log_conformal_factor, sample_gff, truncated_covariance, truncated_variance, LogConformalFactor};
use torus_lqg::gmc::{expected_total_mass, ChaosKind, ChaosSampler, Discretization};
use torus_lqg::lqft::{
    partition_function, weyl_anomaly_factor, weyl_log_coefficient, Insertion, InsertionKernel, InsertionSet,
    LqftParams, MonteCarloConfig,
};
use torus_lqg::moduli_lqg::{DensityGrid, InsertionTemplate, MatterCft, ModulusModel, DEFAULT_T_MAX};
use torus_lqg::rng::RngStream;
use torus_lqg::special_fn::{dedekind_eta, theta1_with, theta1_z_derivative_at_zero, variance_offset, Theta1Method};
use torus_lqg::stats::{correlation, ks_one_sample, ks_two_sample, median, MeanEstimate};
use torus_lqg::torus_green::{
    circle_covariance, green_appendix_series, green_closed_form, green_eigen_series, green_mean_zero_check,
    green_regularized, modular_invariance_residual, GreenEvalConfig,
};
use torus_lqg::{ComplexUH, Error as CoreError, ModularElement, QSeriesConfig, TorusPoint};

use crate::commands;
use crate::error::{CliError, CliResult};
use crate::experiments::{self, DensityRequest};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Full,
    Quick,
}

impl Scale {
    fn pick<T>(self, full: T, quick: T) -> T {
        match self {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }
}

/// Criteria that cannot pass as stated; they still run and report FAIL.
pub const EXPECTED_FAILURES: &[u8] = &[8];

pub const TITLES: [&str; 15] = [
    "special-function identities",
    "Green function triple oracle",
    "modular invariance of G",
    "variance offset extraction",
    "GFF covariance",
    "subcritical GMC",
    "GMC modular pushforward",
    "critical GMC",
    "KPZ scaling",
    "modular covariance of the partition function",
    "Seiberg gating",
    "Weyl anomaly",
    "volume law",
    "modulus-law reduction",
    "determinism",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: u8,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckOutcome {
    pub fn expected_failure(&self) -> bool {
        !self.passed && EXPECTED_FAILURES.contains(&self.id)
    }

    pub fn line(&self) -> String {
        let status = match (self.passed, self.expected_failure()) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        format!(
            "criterion {:>2} {:<13} {} [{:.1}s]: {}",
            self.id,
            status,
            TITLES[self.id as usize - 1],
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub passed: usize,
    pub expected_failures: Vec<u8>,
    pub unexpected_failures: usize,
}

impl Summary {
    pub fn of(outcomes: &[CheckOutcome]) -> Self {
        Self {
            passed: outcomes.iter().filter(|o| o.passed).count(),
            expected_failures: outcomes.iter().filter(|o| o.expected_failure()).map(|o| o.id).collect(),
            unexpected_failures: outcomes.iter().filter(|o| !o.passed && !o.expected_failure()).count(),
        }
    }

    pub fn line(&self) -> String {
        let known = if self.expected_failures.is_empty() {
            String::new()
        } else {
            let ids: Vec<String> = self.expected_failures.iter().map(|i| i.to_string()).collect();
            format!(", known failures: criterion {}", ids.join(", "))
        };
        format!("summary: {} passed, {} failed{known}", self.passed, self.unexpected_failures + self.expected_failures.len())
    }
}

type Verdict = CliResult<(bool, String)>;

pub fn run_check(id: u8, scale: Scale) -> CheckOutcome {
    let start = Instant::now();
    let result = match id {
        1 => special_functions(),
        2 => green_triple(scale),
        3 => green_modular(),
        4 => variance_offset_ladder(scale),
        5 => gff_covariance(scale),
        6 => subcritical_gmc(scale),
        7 => gmc_pushforward(scale),
        8 => critical_gmc(scale),
        9 => kpz(scale),
        10 => modular_partition(scale),
        11 => seiberg(scale),
        12 => weyl(),
        13 => volume_law(scale),
        14 => modulus_reduction(scale),
        15 => determinism(),
        _ => Err(CliError::Usage(format!("no criterion {id}"))),
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome { id, passed, detail, elapsed: start.elapsed() }
}

/// Runs the selected criteria (all if `None`) in order, reporting each as it finishes.
pub fn run_selected(scale: Scale, only: Option<&[u8]>, mut report: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let ids: Vec<u8> = match only {
        Some(ids) => ids.to_vec(),
        None => (1..=15).collect(),
    };
    ids.into_iter()
        .map(|id| {
            let o = run_check(id, scale);
            report(&o);
            o
        })
        .collect()
}

fn cfg() -> QSeriesConfig {
    QSeriesConfig::default()
}

fn tau(re: f64, im: f64) -> ComplexUH {
    ComplexUH::new(re, im).expect("fixed moduli lie in the upper half-plane")
}

/// 10 × 10 points of the closed fundamental domain, boundary included.
fn domain_grid() -> Vec<ComplexUH> {
    let mut out = Vec::with_capacity(100);
    for i in 0..10 {
        let re = -0.5 + i as f64 / 9.0;
        let floor = (1.0 - re * re).sqrt();
        for j in 0..10 {
            out.push(tau(re, floor + 3.0 * j as f64 / 9.0));
        }
    }
    out
}

/// Deterministic scattered torus points avoiding the origin.
fn scattered_points(count: usize) -> Vec<TorusPoint> {
    (1..=count)
        .map(|k| {
            let k = k as f64;
            TorusPoint::new((0.6180339887 * k + 0.05).fract(), (0.7548776662 * k + 0.11).fract())
        })
        .collect()
}

const SPECIAL_FN_TOL: f64 = 1e-10;

fn special_functions() -> Verdict {
    let q = cfg();
    let phase = Complex64::new(0.0, std::f64::consts::PI / 12.0).exp();
    let mut worst = [0.0f64; 4];
    for t in domain_grid() {
        let e = dedekind_eta(t, q)?;
        let shifted = dedekind_eta(tau(t.re() + 1.0, t.im()), q)?;
        worst[0] = worst[0].max((shifted - phase * e).norm());
        let z = t.to_complex();
        let inv = dedekind_eta(ComplexUH::from_complex(-z.inv())?, q)?;
        worst[1] = worst[1].max((inv - (z / Complex64::new(0.0, 1.0)).sqrt() * e).norm());
        let d = theta1_z_derivative_at_zero(t, q)?;
        worst[2] = worst[2].max((d - e.powi(3) * (2.0 * std::f64::consts::PI)).norm());
        for (x, y) in [(0.1, 0.0), (0.37, 0.05), (-0.45, -0.1), (0.8, 0.1)] {
            let zz = Complex64::new(x, (y * t.im()).clamp(-t.im() / 4.0, t.im() / 4.0));
            let s = theta1_with(zz, t, q, Theta1Method::Series)?;
            let p = theta1_with(zz, t, q, Theta1Method::Product)?;
            worst[3] = worst[3].max((s - p).norm());
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    Ok((
        max <= SPECIAL_FN_TOL,
        format!(
            "max residuals: eta(tau+1) {:.1e}, eta(-1/tau) {:.1e}, theta1' {:.1e}, series/product {:.1e} (tol {SPECIAL_FN_TOL:.0e})",
            worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

const EIGEN_CUTOFF: usize = 400;
const EIGEN_TOL: f64 = 5e-3;
const APPENDIX_TOL: f64 = 1e-8;
const MEAN_ZERO_TOL: f64 = 1e-3;

fn green_triple(scale: Scale) -> Verdict {
    let q = cfg();
    let taus = scale.pick(vec![tau(0.0, 1.0), tau(0.3, 1.2), tau(-0.45, 0.95)], vec![tau(0.3, 1.2)]);
    let points = scattered_points(scale.pick(8, 3));
    let (mut eig, mut app, mut mean) = (0.0f64, 0.0f64, 0.0f64);
    for &t in &taus {
        for &x in &points {
            let c = green_closed_form(t, x, q)?;
            eig = eig.max((c - green_eigen_series(t, x, EIGEN_CUTOFF)?.value).abs());
            app = app.max((c - green_appendix_series(t, x, 1e-15)?).abs());
        }
        mean = mean.max(green_mean_zero_check(t, 256, &GreenEvalConfig::closed_form())?.abs());
    }
    Ok((
        eig <= EIGEN_TOL && app <= APPENDIX_TOL && mean <= MEAN_ZERO_TOL,
        format!(
            "closed vs eigen(N={EIGEN_CUTOFF}) {eig:.1e} (tol {EIGEN_TOL:.0e}), closed vs appendix {app:.1e} (tol {APPENDIX_TOL:.0e}), |mean| {mean:.1e} (tol {MEAN_ZERO_TOL:.0e})"
        ),
    ))
}

const MODULAR_GREEN_TOL: f64 = 1e-9;

fn green_modular() -> Verdict {
    let points = scattered_points(50);
    let taus = [tau(0.0, 1.0), tau(0.3, 1.2), tau(-0.45, 0.95), tau(0.1, 2.5), tau(0.5, 0.7)];
    let mut worst = 0.0f64;
    for &t in &taus {
        for psi in [ModularElement::translation(), ModularElement::inversion()] {
            worst = worst.max(modular_invariance_residual(t, &psi, &points, cfg())?);
        }
    }
    Ok((worst <= MODULAR_GREEN_TOL, format!("max |G_psi(tau)(x) - G_tau(psi~ x)| = {worst:.1e} over 50 points x 2 generators x 5 moduli")))
}

const OFFSET_TOL: f64 = 1e-2;
const UNIFORMITY_TOL: f64 = 1e-6;

fn variance_offset_ladder(scale: Scale) -> Verdict {
    let t = tau(0.0, 1.0);
    let theta = variance_offset(t, cfg())?;
    let ladder = scale.pick(vec![1e-2, 3e-3, 1e-3], vec![1e-2, 3e-3]);
    let mut defects = Vec::new();
    for &eps in &ladder {
        let eps: f64 = eps;
        // Matched cutoff: the truncation tail of the circle-averaged variance is O(1/(Nε)).
        let n = (10.0 / eps).ceil() as usize;
        defects.push(truncated_variance(t, n, Some(eps)) + eps.ln() - theta);
    }
    let last_eps = *ladder.last().expect("nonempty ladder");
    let exact = green_regularized(t, TorusPoint::origin(), last_eps, 64, cfg())? + last_eps.ln() - theta;
    let bases = [(0.0, 0.0), (0.999_999, 0.5), (0.5, 0.999_999), (0.25, 0.75), (0.999, 0.999), (0.123, 0.456)];
    let vars = bases
        .iter()
        .map(|&(a, b)| circle_covariance(t, TorusPoint::new(a, b), TorusPoint::new(a, b), last_eps, 64, cfg()))
        .collect::<torus_lqg::Result<Vec<f64>>>()?;
    let spread = vars.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vars.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = *defects.last().expect("nonempty ladder");
    let shown: Vec<String> = ladder.iter().zip(&defects).map(|(e, d)| format!("{e:.0e}:{d:+.2e}")).collect();
    Ok((
        last.abs() <= OFFSET_TOL && spread <= UNIFORMITY_TOL,
        format!(
            "defect E[X^2]+ln eps-Theta by rung {} (tol {OFFSET_TOL:.0e}); untruncated circle average {exact:+.1e}; x-uniformity {spread:.1e} (tol {UNIFORMITY_TOL:.0e})",
            shown.join(" ")
        ),
    ))
}

/// Fast evaluation of a spectral field at a point from its coefficients.
fn evaluate_field(field: &torus_lqg::gff::SpectralField, x: TorusPoint) -> f64 {
    let c = field.cutoff() as i64;
    let phase = |k: f64| Complex64::new(0.0, 2.0 * std::f64::consts::PI * k).exp();
    let p1: Vec<Complex64> = (-c..=c).map(|n| phase(n as f64 * x.x1())).collect();
    let p2: Vec<Complex64> = (-c..=c).map(|m| phase(m as f64 * x.x2())).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for n in -c..=c {
        let mut row = Complex64::new(0.0, 0.0);
        for m in -c..=c {
            row += field.coeff(n, m) * p2[(m + c) as usize];
        }
        acc += row * p1[(n + c) as usize];
    }
    acc.re
}

const COVARIANCE_Z: f64 = 3.0;

fn gff_covariance(scale: Scale) -> Verdict {
    let t = tau(0.0, 1.0);
    let n = 64;
    let samples = scale.pick(10_000u64, 2_000);
    let base = TorusPoint::new(0.1, 0.2);
    let shifts = [(0.05, 0.0), (0.0, 0.1), (0.2, 0.3), (0.5, 0.5), (0.37, 0.81)];
    let probe = sample_gff(t, n, RngStream::new(55, 0))?;
    if (evaluate_field(&probe, base) - probe.evaluate(base)).abs() > 1e-9 {
        return Err(CliError::Format("field evaluator disagrees with SpectralField::evaluate".into()));
    }
    let products: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let f = sample_gff(t, n, RngStream::new(55, r)).expect("valid GFF parameters");
            let x0 = evaluate_field(&f, base);
            shifts.iter().map(|&(a, b)| x0 * evaluate_field(&f, base.add(&TorusPoint::new(a, b)))).collect()
        })
        .collect();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (k, &(a, b)) in shifts.iter().enumerate() {
        let xs: Vec<f64> = products.iter().map(|p| p[k]).collect();
        let est = MeanEstimate::from_samples(&xs)?;
        let exact = truncated_covariance(t, n, None, TorusPoint::new(a, b));
        let z = (est.mean - exact) / est.std_error;
        worst = worst.max(z.abs());
        parts.push(format!("{:.3}/{:.3} z={z:+.2}", est.mean, exact));
    }
    Ok((worst <= COVARIANCE_Z, format!("{samples} samples, N={n}: {} (|z| <= {COVARIANCE_Z})", parts.join(", "))))
}

const GMC_Z: f64 = 3.0;

fn subcritical_gmc(scale: Scale) -> Verdict {
    let t = tau(0.2, 1.1);
    let grid = 64;
    let replicas = scale.pick(4000, 1000);
    let cells = [0usize, 17 * 64 + 5, 2000, 4095];
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [0.5, 1.0, 1.5] {
        let disc = Discretization::tied(t, grid)?;
        let kind = ChaosKind::subcritical(gamma)?;
        let sampler = ChaosSampler::new(t, disc, kind, cfg())?;
        let scale_factor = kind.log_prefactor(t, disc.eps, cfg())?.exp() * t.im() / (grid * grid) as f64;
        let draws = parallel::map_pairs(31, replicas, |buf, a, b| {
            sampler.sample_fields(a, b, buf);
            let pick = |w: Vec<f64>| -> (f64, Vec<f64>) { (w.iter().sum(), cells.iter().map(|&c| w[c] / scale_factor).collect()) };
            let ra = pick(sampler.weights_from_real(buf));
            let rb = b.map(|_| pick(sampler.weights_from_imag(buf)));
            (ra, rb)
        });
        let totals: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let total = MeanEstimate::from_samples(&totals)?;
        let target = expected_total_mass(t, gamma, cfg())?;
        let zt = total.z_against(target);
        let mut zc = 0.0f64;
        for k in 0..cells.len() {
            let xs: Vec<f64> = draws.iter().map(|d| d.1[k]).collect();
            zc = zc.max(MeanEstimate::from_samples(&xs)?.z_against(1.0).abs());
        }
        let fractions: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&g| {
                let s = ChaosSampler::new(t, Discretization::tied(t, g)?, kind, cfg())?;
                let f: Vec<f64> = parallel::chaos_masses(&s, 32, 200).iter().map(|m| m.max_cell_fraction()).collect();
                Ok(f.iter().sum::<f64>() / f.len() as f64)
            })
            .collect::<CliResult<Vec<f64>>>()?;
        let decreasing = fractions.windows(2).all(|w| w[1] < w[0]);
        ok &= zt.abs() <= GMC_Z && zc <= GMC_Z && decreasing;
        parts.push(format!(
            "gamma={gamma}: mass {:.4}±{:.4} vs {target:.4} (z={zt:+.2}), max cell |z|={zc:.2}, max-cell fraction {:.2e}>{:.2e}>{:.2e}",
            total.mean, total.std_error, fractions[0], fractions[1], fractions[2]
        ));
    }
    Ok((ok, parts.join("; ")))
}

const KS_ALPHA: f64 = 0.01;

fn gmc_pushforward(scale: Scale) -> Verdict {
    let t = tau(0.0, 2.0);
    let psi = ModularElement::inversion();
    let image = psi.act_on_uhp(t);
    let grid = 128;
    let replicas = scale.pick(1000u64, 300);
    let kind = ChaosKind::subcritical(1.0)?;
    let left = ChaosSampler::new(image, Discretization::tied(image, grid)?, kind, cfg())?;
    let right = ChaosSampler::new(t, Discretization::tied(t, grid)?, kind, cfg())?;
    let in_quadrant = |x1: f64, x2: f64| x1 < 0.5 && x2 < 0.5;
    let draws: Vec<(f64, f64, f64, f64)> = (0..replicas)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| {
            let a = left.measure(RngStream::new(71, r), buf);
            let b = right.measure(RngStream::new(72, r), buf).pushforward(&psi);
            (a.total_mass(), a.mass_where(in_quadrant), b.total_mass(), b.mass_where(in_quadrant))
        })
        .collect();
    let col = |f: fn(&(f64, f64, f64, f64)) -> f64| draws.iter().map(f).collect::<Vec<f64>>();
    let total = ks_two_sample(&col(|d| d.0), &col(|d| d.2))?;
    let quad = ks_two_sample(&col(|d| d.1), &col(|d| d.3))?;
    Ok((
        total.p_value > KS_ALPHA && quad.p_value > KS_ALPHA,
        format!(
            "tau=2i, inversion, {replicas} replicas per side: total mass KS D={:.3} p={:.3}; quadrant mass KS D={:.3} p={:.3} (reject below {KS_ALPHA})",
            total.statistic, total.p_value, quad.statistic, quad.p_value
        ),
    ))
}

const CRITICAL_STABILITY: f64 = 0.10;
const UNCORRECTED_DROP: f64 = 0.30;

fn critical_gmc(scale: Scale) -> Verdict {
    let t = tau(0.0, 1.0);
    let ladder = [1e-2, 3e-3, 1e-3];
    let replicas = scale.pick(600, 150);
    let mut medians = Vec::new();
    let mut raw_medians = Vec::new();
    let mut inverse_roots = Vec::new();
    for &eps in &ladder {
        let disc = Discretization::for_eps(t, eps)?;
        let corrected = ChaosSampler::new(t, disc, ChaosKind::Critical, cfg())?;
        let uncorrected = ChaosSampler::new(t, disc, ChaosKind::CriticalUncorrected, cfg())?;
        // Both normalizations see the same fields.
        let masses = parallel::map_pairs(81, replicas, |buf, a, b| {
            corrected.sample_fields(a, b, buf);
            let (ca, cb) = corrected.summarize(buf);
            let (ua, ub) = uncorrected.summarize(buf);
            ((ca.total, ua.total), b.map(|_| (cb.total, ub.total)))
        });
        let c: Vec<f64> = masses.iter().map(|m| m.0).collect();
        let u: Vec<f64> = masses.iter().map(|m| m.1).collect();
        medians.push(median(&c));
        raw_medians.push(median(&u));
        inverse_roots.push(MeanEstimate::from_samples(&c.iter().map(|m| m.powf(-0.5)).collect::<Vec<_>>())?.mean);
    }
    let rel = |v: &[f64]| (v[2] / v[1] - 1.0).abs();
    let stable = rel(&medians) <= CRITICAL_STABILITY;
    let stable_inv = rel(&inverse_roots) <= CRITICAL_STABILITY;
    let drops: Vec<f64> = raw_medians.windows(2).map(|w| 1.0 - w[1] / w[0]).collect();
    let dropping = drops.iter().all(|&d| d >= UNCORRECTED_DROP);
    Ok((
        stable && stable_inv && dropping,
        format!(
            "eps 1e-2/3e-3/1e-3, {replicas} replicas: corrected median {:.4}/{:.4}/{:.4} (last change {:.1}%, tol 10%); E[M^-1/2] {:.4}/{:.4}/{:.4} (last change {:.1}%); uncorrected median drop per rung {:.1}%/{:.1}% (need >= 30%)",
            medians[0],
            medians[1],
            medians[2],
            100.0 * rel(&medians),
            inverse_roots[0],
            inverse_roots[1],
            inverse_roots[2],
            100.0 * rel(&inverse_roots),
            100.0 * drops[0],
            100.0 * drops[1]
        ),
    ))
}

fn kpz(scale: Scale) -> Verdict {
    let t = tau(0.1, 1.2);
    let params = LqftParams::new(1.0, 1.0)?;
    let ins = InsertionSet::new(vec![
        Insertion { z: TorusPoint::origin(), alpha: 1.0 },
        Insertion { z: TorusPoint::new(0.5, 0.25), alpha: 0.6 },
    ])?;
    let run = experiments::partition(params, t, &ins, Discretization::tied(t, 32)?, InsertionKernel::Matched, scale.pick(1000, 200), 91, cfg())?;
    let problem = run.problem.as_ref().ok_or_else(|| CliError::Format("admissible insertions vanished".into()))?;
    let rows = experiments::kpz_rows(problem, &run.samples, &[0.5, 2.0, 10.0])?;
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok((worst <= commands::KPZ_TOLERANCE, format!("max |ratio/mu^(-sum alpha/gamma) - 1| = {worst:.1e} for mu in 0.5, 2, 10 (tol 1e-12)")))
}

fn modular_partition(scale: Scale) -> Verdict {
    let params = LqftParams::new(1.0, 1.0)?;
    let ins = InsertionSet::single(TorusPoint::new(0.25, 0.5), 1.0)?;
    let replicas = scale.pick(10_000, 2_000);
    let grid = scale.pick(128, 64);
    let r = experiments::modular_covariance(params, tau(0.0, 2.0), &ins, &ModularElement::inversion(), grid, replicas, cfg(), 101)?;
    Ok((
        r.z.abs() <= commands::MODULAR_Z_MAX,
        format!(
            "tau=2i, inversion, alpha=gamma=1, {replicas} replicas, grid {grid}: ratio {:.4} ± {:.4} (z={:+.2}, |z| <= 3); factor {:.4}",
            r.ratio, r.ratio_se, r.z, r.factor
        ),
    ))
}

fn seiberg(scale: Scale) -> Verdict {
    let t = tau(0.0, 1.0);
    let params = LqftParams::new(1.0, 1.0)?;
    let q = params.q();
    let disc = Discretization::tied(t, 32)?;
    let mc = MonteCarloConfig::new(scale.pick(400, 100), 111)?;
    let values = [-1.0, 0.5, q];
    let mut ok = true;
    let mut counts = [0usize; 3];
    for &a1 in &values {
        for &a2 in &values {
            let ins = InsertionSet::new(vec![
                Insertion { z: TorusPoint::origin(), alpha: a1 },
                Insertion { z: TorusPoint::new(0.5, 0.5), alpha: a2 },
            ])?;
            let r = partition_function(params, t, &ins, mc, disc, cfg());
            let good = if a1 + a2 <= 0.0 {
                counts[0] += 1;
                matches!(r, Err(CoreError::SeibergViolationSum { .. }))
            } else if a1 >= q || a2 >= q {
                counts[1] += 1;
                matches!(&r, Ok(e) if e.value == 0.0 && e.diagnostic.is_some_and(|d| d.alpha >= q))
            } else {
                counts[2] += 1;
                matches!(&r, Ok(e) if e.value.is_finite() && e.value > 0.0 && e.diagnostic.is_none())
            };
            ok &= good;
        }
    }
    Ok((ok, format!("alpha in {{-1, 0.5, Q={q}}}^2: {} sum violations, {} vanishing with diagnostic, {} positive estimates", counts[0], counts[1], counts[2])))
}

const ENERGY_TOL: f64 = 1e-6;

fn weyl() -> Verdict {
    let half = [(1, 0, Complex64::new(0.3, 0.1)), (1, -2, Complex64::new(-0.2, 0.05)), (0, 3, Complex64::new(0.07, -0.12))];
    let spec = LogConformalFactor::from_half(&half)?;
    let doubled = LogConformalFactor::from_half(&half.map(|(n, m, v)| (n, m, v * 2.0)))?;
    let (mut coef_err, mut energy_err, mut scale_err) = (0.0f64, 0.0f64, 0.0f64);
    for t in [tau(0.1, 1.3), tau(0.0, 1.0), tau(0.4, 0.6)] {
        for gamma in [0.5, 1.0, 2.0] {
            let q = 2.0 / gamma + gamma / 2.0;
            let phi = build_log_conformal_factor(&spec, t, 8)?;
            let log_factor = weyl_anomaly_factor(&phi, q).ln();
            let formula = weyl_log_coefficient(q) * spec.energy(t);
            coef_err = coef_err.max((log_factor / formula - 1.0).abs());
            let e = phi.dirichlet_energy();
            energy_err = energy_err.max((phi.dirichlet_energy_on_grid(64)? / e - 1.0).abs());
            let twice = weyl_anomaly_factor(&build_log_conformal_factor(&doubled, t, 8)?, q).ln();
            scale_err = scale_err.max((twice / (4.0 * log_factor) - 1.0).abs());
        }
    }
    Ok((
        coef_err <= 1e-12 && energy_err <= ENERGY_TOL && scale_err <= 1e-12,
        format!(
            "log factor vs (1+6Q^2)/(96 pi) 2pi sum|phi|^2: {coef_err:.1e}; spectral vs grid-gradient energy: {energy_err:.1e} (tol {ENERGY_TOL:.0e}); quadratic scaling: {scale_err:.1e}"
        ),
    ))
}

/// Pure gravity, one marked point, `μ = 1`.
fn pure_gravity_request(scale: Scale) -> CliResult<DensityRequest> {
    let model = ModulusModel::new(MatterCft::PureGravity, 1.0, &InsertionTemplate::identity(1)?)?;
    let (nu, nw) = scale.pick((12, 12), (6, 6));
    Ok(DensityRequest {
        model,
        grid: DensityGrid::new(nu, nw, DEFAULT_T_MAX)?,
        field_grid: 64,
        replicas: scale.pick(4000, 1000),
        seed: 121,
        cfg: cfg(),
    })
}

/// The density table, through the moment cache shared with `lqg modulus-density`.
fn pure_gravity_table(req: &DensityRequest) -> CliResult<(torus_lqg::moduli_lqg::DensityTable, Vec<MeanEstimate>)> {
    let mut cache = crate::cache::MomentCache::open(&crate::cache::cache_dir(), &req.cache_hash())?;
    experiments::density_table(req, Some(&mut cache), |_, _| {})
}

fn volume_law(scale: Scale) -> Verdict {
    let req = pure_gravity_request(scale)?;
    let (table, _) = pure_gravity_table(&req)?;
    let samples = scale.pick(10_000, 2_000);
    let draws = experiments::joint_samples(&req.model, &table, req.field_grid, 0, samples, 131, cfg())?;
    let volumes: Vec<f64> = draws.iter().map(|d| d.volume).collect();
    let heights: Vec<f64> = draws.iter().map(|d| d.tau.im()).collect();
    let ks = ks_one_sample(&volumes, |x| if x > 0.0 { 1.0 - (-x).exp() } else { 0.0 })?;
    let (r, se) = correlation(&volumes, &heights)?;
    Ok((
        ks.p_value > KS_ALPHA && r.abs() <= 3.0 * se,
        format!(
            "{samples} draws, {}x{} table: volume KS vs Exp(1) D={:.4} p={:.3}; corr(volume, Im tau) = {r:+.4} (3 SE = {:.4})",
            req.grid.nu,
            req.grid.nw,
            ks.statistic,
            ks.p_value,
            3.0 * se
        ),
    ))
}

const REDUCTION_Z: f64 = 3.0;

fn modulus_reduction(scale: Scale) -> Verdict {
    let req = pure_gravity_request(scale)?;
    let (table, _) = pure_gravity_table(&req)?;
    let g = req.grid;
    let nodes = g.nodes();
    let mut ratios = Vec::with_capacity(nodes.len());
    for (k, &t) in nodes.iter().enumerate() {
        let r = req.model.reference_density(t, req.cfg)?;
        ratios.push((table.values[k] / r, table.std_errors[k] / r));
    }
    let weights: Vec<f64> = ratios.iter().map(|r| 1.0 / (r.1 * r.1)).collect();
    let wsum: f64 = weights.iter().sum();
    let mean = ratios.iter().zip(&weights).map(|(r, w)| r.0 * w).sum::<f64>() / wsum;
    // Nodes share random streams, so their errors are strongly correlated; quote the
    // typical per-node SE for the constant rather than the independent-node figure.
    let mean_se = ratios.iter().map(|r| r.1).sum::<f64>() / ratios.len() as f64;
    let pooled_se = wsum.recip().sqrt();
    let z_const = ratios.iter().map(|r| ((r.0 - mean) / (r.1 * r.1 + pooled_se * pooled_se).sqrt()).abs()).fold(0.0, f64::max);
    // Identifications: τ ~ τ + 1 on the vertical sides, τ ~ −1/τ on the arc.
    let idx = |i: usize, j: usize| i * g.nw + j;
    let pair_z = |a: usize, b: usize| {
        let (va, sa) = (table.values[a], table.std_errors[a]);
        let (vb, sb) = (table.values[b], table.std_errors[b]);
        ((va - vb) / (sa * sa + sb * sb).sqrt()).abs()
    };
    let mut z_sides = 0.0f64;
    for j in 0..g.nw {
        z_sides = z_sides.max(pair_z(idx(0, j), idx(g.nu - 1, j)));
    }
    let mut z_arc = 0.0f64;
    for i in 0..g.nu / 2 {
        z_arc = z_arc.max(pair_z(idx(i, 0), idx(g.nu - 1 - i, 0)));
    }
    Ok((
        z_const <= REDUCTION_Z && z_sides <= REDUCTION_Z && z_arc <= REDUCTION_Z,
        format!(
            "{}x{} nodes, {} replicas each (common streams): density/(sqrt(Im tau)|eta|^2) = {mean:.4} (per-node SE {mean_se:.4}), max |z| from mean {z_const:.2}; boundary pairs max |z|: Re tau = ±1/2 {z_sides:.2}, arc {z_arc:.2} (limit 3)",
            g.nu, g.nw, req.replicas
        ),
    ))
}

fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("torus-lqg-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = |name: &str| dir.join(name);
    let s = |p: &std::path::Path| p.display().to_string();
    let runs: Vec<(Vec<String>, std::path::PathBuf)> = vec![
        (vec!["green", "eval", "--tau", "0.2,1.1", "--x", "0.3,0.4"], path("green.json")),
        (vec!["gff", "sample", "--tau", "0,1", "--N", "8", "--seed", "3"], path("field.csv")),
        (vec!["gmc", "sample", "--gamma", "1", "--tau", "0,1", "--N", "16", "--replicas", "20", "--seed", "4"], path("masses.csv")),
        (vec!["lqft", "partition", "--gamma", "1", "--tau", "0,1.2", "--insertions", "0,0,1", "--replicas", "100", "--grid", "32"], path("pi.json")),
        (vec!["green", "table", "--tau", "0.1,1.3", "--grid", "16"], path("green.csv")),
    ]
    .into_iter()
    .map(|(args, out)| {
        let mut argv: Vec<String> = std::iter::once("torus-lqg").chain(args).map(String::from).collect();
        argv.push("--out".into());
        argv.push(s(&out));
        (argv, out)
    })
    .collect();
    // The plot input must exist before the plot rerun.
    commands::run(runs[4].0.iter().cloned())?;
    let grid_csv = path("grid.csv");
    write_density_fixture(&grid_csv)?;
    let runs: Vec<(Vec<String>, std::path::PathBuf)> = runs
        .into_iter()
        .chain([
            (
                ["torus-lqg", "lqg", "plot", &s(&grid_csv), "--kind", "heatmap", "--out", &s(&path("heat.svg"))].map(String::from).to_vec(),
                path("heat.svg"),
            ),
            (
                ["torus-lqg", "lqg", "plot", &s(&path("green.csv")), "--kind", "line", "--x-col", "x1", "--y-col", "green", "--out", &s(&path("line.svg"))]
                    .map(String::from)
                    .to_vec(),
                path("line.svg"),
            ),
        ])
        .collect();
    let mut same = 0;
    for (argv, out) in &runs {
        if commands::rerun_identical(argv, &[out.as_path()])? {
            same += 1;
        }
    }
    // Thread count must not matter either.
    let masses = path("masses-threads.csv");
    let mut a = runs[2].0.clone();
    a.truncate(a.len() - 2);
    a.extend(["--out".to_string(), s(&masses), "--threads".to_string(), "1".to_string()]);
    commands::run(a.iter().cloned())?;
    let one = crate::output::without_duration(&std::fs::read_to_string(&masses).map_err(|e| CliError::io(&masses, e))?);
    *a.last_mut().expect("thread count") = "3".into();
    commands::run(a.iter().cloned())?;
    let three = crate::output::without_duration(&std::fs::read_to_string(&masses).map_err(|e| CliError::io(&masses, e))?);
    let _ = std::fs::remove_dir_all(&dir);
    Ok((
        same == runs.len() && one == three,
        format!("{same}/{} subcommands reproduced bit-for-bit (duration line excluded); 1 vs 3 threads identical: {}", runs.len(), one == three),
    ))
}

/// A small 3 × 4 density table in the `lqg modulus-density` layout.
fn write_density_fixture(path: &std::path::Path) -> CliResult<()> {
    let mut text = String::from("re_tau,im_tau,density,se\n");
    for i in 0..3 {
        for j in 0..4 {
            let re = -0.5 + 0.5 * i as f64;
            let im = (1.0 - re * re).sqrt() + 0.5 * j as f64;
            text.push_str(&format!("{re},{im},{},0.01\n", 1.0 / (1.0 + j as f64)));
        }
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
