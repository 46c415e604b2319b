//! Subcommand definitions and handlers.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};
use torus_lqg::gff::GridSampler;
use torus_lqg::gmc::ChaosSampler;
use torus_lqg::lqft::{InsertionKernel, LqftParams, PartitionEstimate};
use torus_lqg::moduli_lqg::{DensityGrid, InsertionTemplate, ModulusModel, DEFAULT_T_MAX};
use torus_lqg::rng::RngStream;
use torus_lqg::special_fn::{dedekind_eta, theta1, theta1_z_derivative_at_zero, theta_aux, variance_offset, AuxTheta};
use torus_lqg::torus_green::{green, green_closed_form, green_eigen_series, GreenEvalConfig};
use torus_lqg::{reduce_to_fundamental, ComplexUH, QSeriesConfig, TorusPoint};

use crate::cache::{cache_dir, MomentCache};
use crate::checks::{self, Scale};
use crate::config::{parse_pair, parse_point, ExperimentConfig, Scoped};
use crate::error::{CliError, CliResult};
use crate::experiments::{self, DensityRequest};
use crate::output::{emit_json, fmt_f64, write_csv, RunHeader};
use crate::parallel;
use crate::plot::{emit_plot, PlotKind};

/// Liouville quantum field theory on complex tori: numerics and experiments.
#[derive(Debug, Parser)]
#[command(name = "torus-lqg", version)]
pub struct Cli {
    /// TOML file of experiment settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for replica loops (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theta and eta function values.
    #[command(name = "special-fn", subcommand)]
    SpecialFn(SpecialFnCmd),
    /// Modular group utilities.
    #[command(subcommand)]
    Modular(ModularCmd),
    /// Torus Green function.
    #[command(subcommand)]
    Green(GreenCmd),
    /// Gaussian free field samples.
    #[command(subcommand)]
    Gff(GffCmd),
    /// Gaussian multiplicative chaos.
    #[command(subcommand)]
    Gmc(GmcCmd),
    /// Liouville partition functions.
    #[command(subcommand)]
    Lqft(LqftCmd),
    /// Law of the Liouville modulus.
    #[command(subcommand)]
    Lqg(LqgCmd),
    /// Acceptance suite.
    #[command(subcommand)]
    Check(CheckCmd),
}

#[derive(Debug, Subcommand)]
pub enum SpecialFnCmd {
    /// η, ϑ₁(z), ϑ₁′(0), ϑ₂₋₄ and Θ at one modulus, as JSON.
    Eval(SpecialFnEval),
}

#[derive(Debug, Subcommand)]
pub enum ModularCmd {
    /// Reduce τ to the fundamental domain; prints the witness matrix.
    Reduce(ModularReduce),
}

#[derive(Debug, Subcommand)]
pub enum GreenCmd {
    /// G_τ(x) as JSON.
    Eval(GreenEval),
    /// G_τ on a grid, as CSV.
    Table(GreenTable),
}

#[derive(Debug, Subcommand)]
pub enum GffCmd {
    /// One field sample on the grid, as CSV.
    Sample(GffSample),
}

#[derive(Debug, Subcommand)]
pub enum GmcCmd {
    /// Total mass and largest cell fraction per replica, as CSV.
    Sample(GmcSample),
}

#[derive(Debug, Subcommand)]
pub enum LqftCmd {
    /// Monte Carlo estimate of the partition function.
    Partition(PartitionArgs),
    /// KPZ scaling in μ on one replica set.
    CheckKpz(KpzArgs),
    /// Modular covariance of the partition function.
    CheckModular(ModularArgs),
}

#[derive(Debug, Subcommand)]
pub enum LqgCmd {
    /// Modulus density table over the fundamental domain, as CSV.
    ModulusDensity(DensityArgs),
    /// Joint samples of modulus and volume, as CSV.
    SampleJoint(JointArgs),
    /// SVG plot of a CSV table.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum CheckCmd {
    /// Run the acceptance criteria.
    All(CheckAllArgs),
}

trait Flags {
    fn apply(&self, cfg: &mut ExperimentConfig);
}

/// Text form of a flag value as recorded in the config.
trait FlagText {
    fn flag_text(&self) -> String;
}

macro_rules! display_flag {
    ($($t:ty),*) => {
        $(impl FlagText for $t {
            fn flag_text(&self) -> String {
                self.to_string()
            }
        })*
    };
}
display_flag!(String, f64, u64, usize, u32, u8, bool);

impl FlagText for PathBuf {
    fn flag_text(&self) -> String {
        self.display().to_string()
    }
}

macro_rules! flags {
    ($t:ty { $($field:ident => $key:literal),* $(,)? }) => {
        impl Flags for $t {
            fn apply(&self, cfg: &mut ExperimentConfig) {
                $(cfg.flag($key, self.$field.as_ref().map(|v| v.flag_text()));)*
            }
        }
    };
}

#[derive(Debug, Args)]
pub struct SpecialFnEval {
    /// Modulus as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Argument of ϑ₁ as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// Absolute q-series tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
flags!(SpecialFnEval { tau => "tau", z => "z", tolerance => "tolerance", out => "out" });

#[derive(Debug, Args)]
pub struct ModularReduce {
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
flags!(ModularReduce { tau => "tau", out => "out" });

#[derive(Debug, Args)]
pub struct GreenEval {
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Torus point `x1,x2`.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// closed, eigen or appendix.
    #[arg(long)]
    pub mode: Option<String>,
    /// Eigen-series cutoff.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
flags!(GreenEval { tau => "tau", x => "x", mode => "mode", cutoff => "cutoff", tolerance => "tolerance", out => "out" });

#[derive(Debug, Args)]
pub struct GreenTable {
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Points per side.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
flags!(GreenTable { tau => "tau", grid => "grid", out => "out" });

#[derive(Debug, Args)]
pub struct GffSample {
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Spectral cutoff.
    #[arg(long = "N", alias = "cutoff")]
    pub n: Option<usize>,
    /// Grid points per side (power of two, default 4N rounded up).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Circle-average radius; omit for the bare truncated field.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stream id of the sample.
    #[arg(long)]
    pub replica: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
flags!(GffSample { tau => "tau", n => "N", grid => "grid", eps => "eps", seed => "seed", replica => "replica", out => "out" });

#[derive(Debug, Args)]
pub struct GmcSample {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "N", alias = "cutoff")]
    pub n: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// At γ = 2, drop the (ln 1/ε)^{1/2} push.
    #[arg(long)]
    pub uncorrected: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
impl Flags for GmcSample {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        cfg.flag("gamma", self.gamma);
        cfg.flag("tau", self.tau.as_ref());
        cfg.flag("eps", self.eps);
        cfg.flag("N", self.n);
        cfg.flag("grid", self.grid);
        cfg.flag("replicas", self.replicas);
        cfg.flag("seed", self.seed);
        cfg.flag("uncorrected", self.uncorrected.then_some(true));
        cfg.flag("out", self.out.as_ref().map(|p| p.display().to_string()));
    }
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// `x1,x2,alpha;…`.
    #[arg(long, allow_hyphen_values = true)]
    pub insertions: Option<String>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Field grid per side; N and ε follow the tied convention.
    #[arg(long)]
    pub grid: Option<usize>,
    /// matched or closed.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
flags!(PartitionArgs {
    gamma => "gamma", mu => "mu", tau => "tau", insertions => "insertions", replicas => "replicas",
    seed => "seed", grid => "grid", kernel => "kernel", out => "out",
});

#[derive(Debug, Args)]
pub struct KpzArgs {
    #[command(flatten)]
    pub base: PartitionArgs,
    /// Couplings compared against μ = 1.
    #[arg(long)]
    pub mus: Option<String>,
}
impl Flags for KpzArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        self.base.apply(cfg);
        cfg.flag("mus", self.mus.as_ref());
    }
}

#[derive(Debug, Args)]
pub struct ModularArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub insertions: Option<String>,
    /// inversion, translation or `a,b,c,d`.
    #[arg(long, allow_hyphen_values = true)]
    pub psi: Option<String>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
flags!(ModularArgs {
    gamma => "gamma", mu => "mu", tau => "tau", insertions => "insertions", psi => "psi",
    replicas => "replicas", seed => "seed", grid => "grid", out => "out",
});

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// pure, ising or ffpower:<c>.
    #[arg(long)]
    pub matter: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Number of marked points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Modulus grid `NUxNW`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Upper cut of the fundamental domain in Im τ.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// GMC field grid per side.
    #[arg(long)]
    pub field_grid: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the moment cache.
    #[arg(long)]
    pub no_cache: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
impl Flags for DensityArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        cfg.flag("matter", self.matter.as_ref());
        cfg.flag("mu", self.mu);
        cfg.flag("n", self.n);
        cfg.flag("grid", self.grid.as_ref());
        cfg.flag("t_max", self.t_max);
        cfg.flag("field_grid", self.field_grid);
        cfg.flag("replicas", self.replicas);
        cfg.flag("seed", self.seed);
        cfg.flag("no_cache", self.no_cache.then_some(true));
        cfg.flag("out", self.out.as_ref().map(|p| p.display().to_string()));
    }
}

#[derive(Debug, Args)]
pub struct JointArgs {
    #[command(flatten)]
    pub density: DensityArgs,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed of the joint draws (the table uses --seed).
    #[arg(long)]
    pub sample_seed: Option<u64>,
    /// Conditional measure candidates per draw; 0 skips the measure.
    #[arg(long)]
    pub measure_candidates: Option<usize>,
}
impl Flags for JointArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        self.density.apply(cfg);
        cfg.flag("samples", self.samples);
        cfg.flag("sample_seed", self.sample_seed);
        cfg.flag("measure_candidates", self.measure_candidates);
    }
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV input.
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// heatmap or line.
    #[arg(long)]
    pub kind: Option<String>,
    /// Line plots: x column.
    #[arg(long)]
    pub x_col: Option<String>,
    /// Line plots: y column.
    #[arg(long)]
    pub y_col: Option<String>,
}
impl Flags for PlotArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        cfg.flag("data", Some(self.data.display()));
        cfg.flag("out", self.out.as_ref().map(|p| p.display().to_string()));
        cfg.flag("kind", self.kind.as_ref());
        cfg.flag("x_col", self.x_col.as_ref());
        cfg.flag("y_col", self.y_col.as_ref());
    }
}

#[derive(Debug, Args)]
pub struct CheckAllArgs {
    /// Reduced sample sizes.
    #[arg(long)]
    pub quick: bool,
    /// Comma-separated criterion numbers to run.
    #[arg(long)]
    pub only: Option<String>,
}

fn out_path(s: &mut Scoped, default: Option<&str>) -> Option<PathBuf> {
    match default {
        Some(d) => Some(PathBuf::from(s.string("out", d))),
        None => s.raw("out").map(PathBuf::from),
    }
}

fn qseries(s: &mut Scoped) -> CliResult<QSeriesConfig> {
    let d = QSeriesConfig::default();
    Ok(QSeriesConfig::new(s.get("tolerance", d.tolerance)?, d.max_terms)?)
}

fn c2(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn estimate_json(e: &PartitionEstimate) -> Value {
    json!({
        "value": e.value,
        "std_error": e.std_error,
        "replicas": e.replicas,
        "diagnostic": e.diagnostic.map(|d| json!({"index": d.index, "alpha": d.alpha, "q": d.q, "message": d.to_string()})),
    })
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run<I, T>(argv: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let pool = parallel::pool(cli.threads)?;
    pool.install(|| dispatch(&cli.command, &mut cfg))
}

fn dispatch(cmd: &Command, cfg: &mut ExperimentConfig) -> CliResult<()> {
    match cmd {
        Command::SpecialFn(SpecialFnCmd::Eval(a)) => {
            a.apply(cfg);
            special_fn_eval(cfg)
        }
        Command::Modular(ModularCmd::Reduce(a)) => {
            a.apply(cfg);
            modular_reduce(cfg)
        }
        Command::Green(GreenCmd::Eval(a)) => {
            a.apply(cfg);
            green_eval(cfg)
        }
        Command::Green(GreenCmd::Table(a)) => {
            a.apply(cfg);
            green_table(cfg)
        }
        Command::Gff(GffCmd::Sample(a)) => {
            a.apply(cfg);
            gff_sample(cfg)
        }
        Command::Gmc(GmcCmd::Sample(a)) => {
            a.apply(cfg);
            gmc_sample(cfg)
        }
        Command::Lqft(LqftCmd::Partition(a)) => {
            a.apply(cfg);
            lqft_partition(cfg)
        }
        Command::Lqft(LqftCmd::CheckKpz(a)) => {
            a.apply(cfg);
            lqft_check_kpz(cfg)
        }
        Command::Lqft(LqftCmd::CheckModular(a)) => {
            a.apply(cfg);
            lqft_check_modular(cfg)
        }
        Command::Lqg(LqgCmd::ModulusDensity(a)) => {
            a.apply(cfg);
            lqg_modulus_density(cfg)
        }
        Command::Lqg(LqgCmd::SampleJoint(a)) => {
            a.apply(cfg);
            lqg_sample_joint(cfg)
        }
        Command::Lqg(LqgCmd::Plot(a)) => {
            a.apply(cfg);
            lqg_plot(cfg)
        }
        Command::Check(CheckCmd::All(a)) => check_all(a),
    }
}

fn special_fn_eval(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["special-fn", "eval"]);
    let tau = s.tau("tau", "0,1")?;
    let (zr, zi) = parse_pair(&s.string("z", "0.1,0"), "z")?;
    let z = Complex64::new(zr, zi);
    let q = qseries(&mut s)?;
    let out = out_path(&mut s, None);
    let body = json!({
        "tau": [tau.re(), tau.im()],
        "z": c2(z),
        "eta": c2(dedekind_eta(tau, q)?),
        "theta1": c2(theta1(z, tau, q)?),
        "theta1_prime_at_0": c2(theta1_z_derivative_at_zero(tau, q)?),
        "theta2": c2(theta_aux(AuxTheta::Two, tau, q)?),
        "theta3": c2(theta_aux(AuxTheta::Three, tau, q)?),
        "theta4": c2(theta_aux(AuxTheta::Four, tau, q)?),
        "variance_offset": variance_offset(tau, q)?,
    });
    emit_json(out.as_deref(), &RunHeader::new(s.resolved(), vec![]).finished(start.elapsed()), body)?;
    Ok(())
}

fn modular_reduce(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["modular", "reduce"]);
    let tau = s.tau("tau", "0,1")?;
    let out = out_path(&mut s, None);
    let r = reduce_to_fundamental(tau);
    let body = json!({
        "tau": [tau.re(), tau.im()],
        "reduced": [r.tau.re(), r.tau.im()],
        "witness": r.witness.entries(),
    });
    emit_json(out.as_deref(), &RunHeader::new(s.resolved(), vec![]).finished(start.elapsed()), body)?;
    Ok(())
}

fn green_eval(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["green", "eval"]);
    let tau = s.tau("tau", "0,1")?;
    let x = parse_point(&s.string("x", "0.25,0.25"))?;
    let mode = s.string("mode", "closed");
    let out = out_path(&mut s, None);
    let mut body = json!({ "tau": [tau.re(), tau.im()], "x": [x.x1(), x.x2()], "mode": mode });
    match mode.as_str() {
        "closed" => body["green"] = json!(green(tau, x, &GreenEvalConfig::closed_form())?),
        "appendix" => {
            let tol = s.get("tolerance", 1e-15)?;
            body["green"] = json!(green(tau, x, &GreenEvalConfig { tolerance: tol, ..GreenEvalConfig::appendix_series() })?);
        }
        "eigen" => {
            let sum = green_eigen_series(tau, x, s.get("cutoff", 400usize)?)?;
            body["green"] = json!(sum.value);
            body["error_estimate"] = json!(sum.error_estimate);
        }
        other => return Err(CliError::Config(format!("unknown Green mode `{other}` (closed, eigen or appendix)"))),
    }
    emit_json(out.as_deref(), &RunHeader::new(s.resolved(), vec![]).finished(start.elapsed()), body)?;
    Ok(())
}

fn green_table(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["green", "table"]);
    let tau = s.tau("tau", "0,1")?;
    let g: usize = s.get("grid", 64)?;
    let out = out_path(&mut s, Some("green_table.csv")).expect("defaulted");
    if g < 2 {
        return Err(CliError::Config("grid must be at least 2".into()));
    }
    let q = QSeriesConfig::default();
    let mut rows = Vec::with_capacity(g * g);
    for j1 in 0..g {
        for j2 in 0..g {
            if j1 == 0 && j2 == 0 {
                continue;
            }
            let (x1, x2) = (j1 as f64 / g as f64, j2 as f64 / g as f64);
            let v = green_closed_form(tau, TorusPoint::new(x1, x2), q)?;
            rows.push(vec![fmt_f64(x1), fmt_f64(x2), fmt_f64(v)]);
        }
    }
    let header = RunHeader::new(s.resolved(), vec![]).finished(start.elapsed());
    write_csv(&out, &header, &["x1", "x2", "green"], &rows)
}

fn gff_sample(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["gff", "sample"]);
    let tau = s.tau("tau", "0,1")?;
    let n: usize = s.get("N", 32)?;
    let grid: usize = s.get("grid", (4 * n).next_power_of_two())?;
    let eps = s.raw("eps").map(|e| e.parse::<f64>().map_err(|_| CliError::Config(format!("cannot parse `eps` from `{e}`")))).transpose()?;
    let seed: u64 = s.get("seed", 0)?;
    let replica: u64 = s.get("replica", 0)?;
    let out = out_path(&mut s, Some("field.csv")).expect("defaulted");
    let sampler = GridSampler::new(tau, n, grid, eps)?;
    let mut buf = Vec::new();
    sampler.sample_into(RngStream::new(seed, replica), None, &mut buf);
    let mut rows = Vec::with_capacity(grid * grid);
    for j1 in 0..grid {
        for j2 in 0..grid {
            rows.push(vec![fmt_f64(j1 as f64 / grid as f64), fmt_f64(j2 as f64 / grid as f64), fmt_f64(buf[j1 * grid + j2].re)]);
        }
    }
    let header = RunHeader::new(s.resolved(), vec![seed]).finished(start.elapsed());
    write_csv(&out, &header, &["x1", "x2", "value"], &rows)
}

fn optional<T: std::str::FromStr>(s: &mut Scoped, key: &str) -> CliResult<Option<T>> {
    s.raw(key).map(|v| v.trim().parse::<T>().map_err(|_| CliError::Config(format!("cannot parse `{key}` from `{v}`")))).transpose()
}

fn gmc_sample(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["gmc", "sample"]);
    let gamma: f64 = s.get("gamma", 1.0)?;
    let tau = s.tau("tau", "0,1")?;
    let eps = optional::<f64>(&mut s, "eps")?;
    let n = optional::<usize>(&mut s, "N")?;
    let grid = optional::<usize>(&mut s, "grid")?;
    let replicas: usize = s.get("replicas", 1000)?;
    let seed: u64 = s.get("seed", 0)?;
    let uncorrected: bool = s.get("uncorrected", false)?;
    let out = out_path(&mut s, Some("masses.csv")).expect("defaulted");
    if replicas == 0 {
        return Err(CliError::Config("replicas must be at least 1".into()));
    }
    let disc = experiments::discretization(tau, n, eps, grid)?;
    let sampler = ChaosSampler::new(tau, disc, experiments::chaos_kind(gamma, uncorrected)?, qseries(&mut s)?)?;
    let masses = parallel::chaos_masses(&sampler, seed, replicas);
    let rows: Vec<Vec<String>> =
        masses.iter().enumerate().map(|(r, m)| vec![r.to_string(), fmt_f64(m.total), fmt_f64(m.max_cell_fraction())]).collect();
    let mut resolved = s.resolved();
    resolved.push(("resolved_discretization".into(), format!("N={} grid={} eps={}", disc.cutoff, disc.grid, fmt_f64(disc.eps))));
    let header = RunHeader::new(resolved, vec![seed]).finished(start.elapsed());
    write_csv(&out, &header, &["replica_id", "total_mass", "max_cell_fraction"], &rows)
}

struct PartitionInputs {
    params: LqftParams,
    tau: ComplexUH,
    ins: torus_lqg::lqft::InsertionSet,
    replicas: usize,
    seed: u64,
    grid: usize,
    q: QSeriesConfig,
}

fn partition_inputs(s: &mut Scoped, default_tau: &str, default_ins: &str, default_replicas: usize, default_grid: usize) -> CliResult<PartitionInputs> {
    let params = LqftParams::new(s.get("gamma", 1.0)?, s.get("mu", 1.0)?)?;
    let tau = s.tau("tau", default_tau)?;
    let ins = experiments::parse_insertions(&s.string("insertions", default_ins))?;
    Ok(PartitionInputs {
        params,
        tau,
        ins,
        replicas: s.get("replicas", default_replicas)?,
        seed: s.get("seed", 0)?,
        grid: s.get("grid", default_grid)?,
        q: qseries(s)?,
    })
}

fn kernel(s: &mut Scoped) -> CliResult<InsertionKernel> {
    match s.string("kernel", "matched").as_str() {
        "matched" => Ok(InsertionKernel::Matched),
        "closed" => Ok(InsertionKernel::ClosedForm),
        other => Err(CliError::Config(format!("unknown kernel `{other}` (matched or closed)"))),
    }
}

fn lqft_partition(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["lqft", "partition"]);
    let p = partition_inputs(&mut s, "0,1", "0,0,1", 1000, 64)?;
    let kernel = kernel(&mut s)?;
    let out = out_path(&mut s, None);
    let disc = torus_lqg::gmc::Discretization::tied(p.tau, p.grid)?;
    let run = experiments::partition(p.params, p.tau, &p.ins, disc, kernel, p.replicas, p.seed, p.q)?;
    let header = RunHeader::new(s.resolved(), vec![p.seed]).finished(start.elapsed());
    emit_json(out.as_deref(), &header, estimate_json(&run.estimate))?;
    Ok(())
}

/// Largest allowed `|Π_μ/Π_1 / μ^{−Σα/γ} − 1|`.
pub const KPZ_TOLERANCE: f64 = 1e-12;

fn lqft_check_kpz(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["lqft", "check-kpz"]);
    let p = partition_inputs(&mut s, "0.1,1.2", "0,0,1;0.5,0.25,0.6", 400, 32)?;
    let mus = s.list_f64("mus", "0.5,2,10")?;
    let kernel = kernel(&mut s)?;
    let out = out_path(&mut s, None);
    let disc = torus_lqg::gmc::Discretization::tied(p.tau, p.grid)?;
    let run = experiments::partition(p.params, p.tau, &p.ins, disc, kernel, p.replicas, p.seed, p.q)?;
    let problem = run.problem.as_ref().ok_or_else(|| CliError::Config("KPZ check needs Seiberg-admissible insertions".into()))?;
    let rows = experiments::kpz_rows(problem, &run.samples, &mus)?;
    let max = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let pass = max <= KPZ_TOLERANCE;
    let body = json!({
        "pass": pass,
        "max_residual": max,
        "tolerance": KPZ_TOLERANCE,
        "rows": rows.iter().map(|r| json!({"mu": r.mu, "ratio": r.ratio, "expected": r.expected, "residual": r.residual})).collect::<Vec<_>>(),
    });
    emit_json(out.as_deref(), &RunHeader::new(s.resolved(), vec![p.seed]).finished(start.elapsed()), body)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Acceptance { failed: 1 })
    }
}

/// Pass threshold, in combined standard errors, of the modular covariance check.
pub const MODULAR_Z_MAX: f64 = 3.0;

fn lqft_check_modular(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["lqft", "check-modular"]);
    let p = partition_inputs(&mut s, "0,2", "0.25,0.5,1", 10_000, 128)?;
    let psi = experiments::parse_psi(&s.string("psi", "inversion"))?;
    let out = out_path(&mut s, None);
    let r = experiments::modular_covariance(p.params, p.tau, &p.ins, &psi, p.grid, p.replicas, p.q, p.seed)?;
    let pass = r.z.abs() <= MODULAR_Z_MAX;
    let body = json!({
        "pass": pass,
        "image": estimate_json(&r.image),
        "base": estimate_json(&r.base),
        "factor": r.factor,
        "ratio": r.ratio,
        "ratio_std_error": r.ratio_se,
        "z": r.z,
        "z_max": MODULAR_Z_MAX,
    });
    emit_json(out.as_deref(), &RunHeader::new(s.resolved(), vec![p.seed, p.seed.wrapping_add(1)]).finished(start.elapsed()), body)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Acceptance { failed: 1 })
    }
}

fn density_request(s: &mut Scoped) -> CliResult<(DensityRequest, bool)> {
    let matter = experiments::parse_matter(&s.string("matter", "pure"))?;
    let mu: f64 = s.get("mu", 1.0)?;
    let n: usize = s.get("n", 1)?;
    let (nu, nw) = experiments::parse_grid_shape(&s.string("grid", "12x12"))?;
    let t_max: f64 = s.get("t_max", DEFAULT_T_MAX)?;
    let field_grid: usize = s.get("field_grid", 64)?;
    let replicas: usize = s.get("replicas", 4000)?;
    let seed: u64 = s.get("seed", 0)?;
    let no_cache: bool = s.get("no_cache", false)?;
    if replicas < 2 {
        return Err(CliError::Config("replicas must be at least 2".into()));
    }
    let model = ModulusModel::new(matter, mu, &InsertionTemplate::identity(n)?)?;
    let req = DensityRequest { model, grid: DensityGrid::new(nu, nw, t_max)?, field_grid, replicas, seed, cfg: qseries(s)? };
    Ok((req, !no_cache))
}

fn build_table(req: &DensityRequest, use_cache: bool) -> CliResult<torus_lqg::moduli_lqg::DensityTable> {
    let mut cache = if use_cache { Some(MomentCache::open(&cache_dir(), &req.cache_hash())?) } else { None };
    Ok(experiments::density_table(req, cache.as_mut(), |_, _| {})?.0)
}

fn lqg_modulus_density(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["lqg", "modulus-density"]);
    let (req, use_cache) = density_request(&mut s)?;
    let out = out_path(&mut s, Some("density.csv")).expect("defaulted");
    let table = build_table(&req, use_cache)?;
    let rows: Vec<Vec<String>> = req
        .grid
        .nodes()
        .iter()
        .zip(table.values.iter().zip(&table.std_errors))
        .map(|(t, (v, e))| vec![fmt_f64(t.re()), fmt_f64(t.im()), fmt_f64(*v), fmt_f64(*e)])
        .collect();
    let header = RunHeader::new(s.resolved(), vec![req.seed]).finished(start.elapsed());
    write_csv(&out, &header, &["re_tau", "im_tau", "density", "se"], &rows)
}

fn lqg_sample_joint(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let mut s = cfg.scope(&["lqg", "sample-joint"]);
    let (req, use_cache) = density_request(&mut s)?;
    let samples: usize = s.get("samples", 1000)?;
    let sample_seed: u64 = s.get("sample_seed", 1)?;
    let candidates: usize = s.get("measure_candidates", 0)?;
    let out = out_path(&mut s, Some("joint.csv")).expect("defaulted");
    let table = build_table(&req, use_cache)?;
    let draws = experiments::joint_samples(&req.model, &table, req.field_grid, candidates, samples, sample_seed, req.cfg)?;
    let mut columns = vec!["sample_id", "re_tau", "im_tau", "volume"];
    if candidates > 0 {
        columns.push("measure_mass");
    }
    let rows: Vec<Vec<String>> = draws
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let mut r = vec![k.to_string(), fmt_f64(d.tau.re()), fmt_f64(d.tau.im()), fmt_f64(d.volume)];
            if let Some(m) = &d.measure {
                r.push(fmt_f64(m.iter().sum()));
            }
            r
        })
        .collect();
    let header = RunHeader::new(s.resolved(), vec![req.seed, sample_seed]).finished(start.elapsed());
    write_csv(&out, &header, &columns, &rows)
}

fn lqg_plot(cfg: &ExperimentConfig) -> CliResult<()> {
    let mut s = cfg.scope(&["lqg", "plot"]);
    let data = PathBuf::from(s.string("data", ""));
    let kind: PlotKind = s.string("kind", "heatmap").parse()?;
    let out = out_path(&mut s, Some("plot.svg")).expect("defaulted");
    let x = s.raw("x_col");
    let y = s.raw("y_col");
    let columns = match (&x, &y) {
        (Some(a), Some(b)) => Some((a.as_str(), b.as_str())),
        (None, None) => None,
        _ => return Err(CliError::Config("give both x_col and y_col or neither".into())),
    };
    // Plots must be byte-identical for identical input, so the header carries no duration.
    let provenance = RunHeader::new(s.resolved(), vec![]).provenance().to_string();
    emit_plot(&data, kind, &out, columns, Some(&provenance))
}

fn check_all(a: &CheckAllArgs) -> CliResult<()> {
    let scale = if a.quick { Scale::Quick } else { Scale::Full };
    let only = match &a.only {
        Some(list) => Some(
            list.split(',')
                .map(|p| p.trim().parse::<u8>().map_err(|_| CliError::Usage(format!("bad criterion number `{p}`"))))
                .collect::<CliResult<Vec<u8>>>()?,
        ),
        None => None,
    };
    let outcomes = checks::run_selected(scale, only.as_deref(), |o| {
        println!("{}", o.line());
        let _ = std::io::stdout().flush();
    });
    let summary = checks::Summary::of(&outcomes);
    println!("{}", summary.line());
    if summary.unexpected_failures > 0 {
        Err(CliError::Acceptance { failed: summary.unexpected_failures })
    } else {
        Ok(())
    }
}

/// Runs `argv` twice and reports whether the files named in `outputs` are
/// identical apart from their duration lines.
pub fn rerun_identical(argv: &[String], outputs: &[&Path]) -> CliResult<bool> {
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        run(argv.iter().cloned())?;
        let mut texts = Vec::new();
        for p in outputs {
            let t = std::fs::read_to_string(p).map_err(|e| CliError::io(*p, e))?;
            texts.push(crate::output::without_duration(&t));
        }
        snapshots.push(texts);
    }
    Ok(snapshots[0] == snapshots[1])
}
