use super::*;
use crate::modular_group::{reduce_to_fundamental, ModularElement};
use crate::stats::{chi_square_gof, correlation, gamma_cdf, ks_one_sample};
use core::f64::consts::PI;

extern crate std;

fn cfg() -> QSeriesConfig {
    QSeriesConfig::default()
}

fn tau(re: f64, im: f64) -> ComplexUH {
    ComplexUH::new(re, im).unwrap()
}

#[test]
fn kpz_central_charge_relation() {
    assert!((gamma_from_central_charge(0.0).unwrap() - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!((gamma_from_central_charge(0.5).unwrap() - 3.0f64.sqrt()).abs() < 1e-15);
    assert!((gamma_from_central_charge(1.0).unwrap() - 2.0).abs() < 1e-15);
    assert!(matches!(gamma_from_central_charge(1.5), Err(Error::InvalidCentralCharge(_))));
    assert!(MatterCft::free_field_power(2.0).is_err());
}

#[test]
fn matter_kpz_roots() {
    assert!((alpha_from_matter_weight(0.0, 2.5).unwrap() - 1.0).abs() < 1e-15);
    assert!(alpha_from_matter_weight(1.0, 2.5).unwrap().abs() < 1e-15);
    let q = 2.0 / 1.3 + 0.65;
    let mut rng = RngStream::new(1, 0).rng();
    for _ in 0..100 {
        let d: f64 = rng.random::<f64>() * 1.5;
        let a = alpha_from_matter_weight(d, q).unwrap();
        assert!(a < q);
        assert!((d + 0.5 * a * (q - 0.5 * a) - 1.0).abs() < 1e-12);
    }
    assert_eq!(alpha_from_matter_weight(0.0, 2.0), Err(Error::NoAdmissibleRoot { delta: 0.0, boundary: true }));
    assert!(matches!(alpha_from_matter_weight(-1.0, 2.0), Err(Error::NoAdmissibleRoot { boundary: false, .. })));
    let single = InsertionTemplate::new(vec![TorusPoint::origin()], vec![1.0]).unwrap();
    assert!(matches!(ModulusModel::new(MatterCft::PureGravity, 1.0, &single), Err(Error::SeibergViolationSum { .. })));
    assert_eq!(ModulusModel::new(MatterCft::FreeFieldPower(1.0), 1.0, &InsertionTemplate::identity(1).unwrap()), Err(Error::CriticalMatter));
}

#[test]
fn ghost_partition_values_and_covariance() {
    let eta_i = statrs::function::gamma::gamma(0.25) / (2.0 * PI.powf(0.75));
    let g = ghost_partition(tau(0.0, 1.0), cfg()).unwrap();
    assert!((g - eta_i.powi(4) / 2.0).abs() < 1e-14);
    assert!((g - 0.174150).abs() < 1e-6);
    for t in [tau(0.2, 1.1), tau(-0.4, 0.6), tau(0.1, 2.5)] {
        for psi in [ModularElement::translation(), ModularElement::inversion()] {
            let pt = psi.act_on_uhp(t);
            let lhs = ghost_partition(pt, cfg()).unwrap() * pt.im().powi(2);
            let rhs = ghost_partition(t, cfg()).unwrap() * t.im().powi(2);
            assert!((lhs / rhs - 1.0).abs() < 1e-10);
        }
    }
    let y = 6.0;
    let g = ghost_partition(tau(0.0, y), cfg()).unwrap();
    assert!((g * 2.0 * y / (-PI * y / 3.0).exp() - 1.0).abs() < 1e-3);
}

#[test]
fn matter_partitions() {
    let t = tau(0.3, 0.8);
    assert_eq!(matter_partition(MatterCft::PureGravity, t, cfg()).unwrap(), 1.0);
    let ff = free_field_partition(t, cfg()).unwrap();
    assert!((matter_partition(MatterCft::FreeFieldPower(1.0), t, cfg()).unwrap() - ff).abs() < 1e-14 * ff);
    for t in [tau(0.2, 1.1), tau(-0.45, 0.95), tau(0.0, 1.7)] {
        let z = matter_partition(MatterCft::Ising, t, cfg()).unwrap();
        assert!(z > 0.0 && z.is_finite());
        for psi in [ModularElement::translation(), ModularElement::inversion()] {
            let w = matter_partition(MatterCft::Ising, psi.act_on_uhp(t), cfg()).unwrap();
            assert!((w - z).abs() < 1e-8 * z);
        }
    }
}

fn pure_model() -> ModulusModel {
    ModulusModel::new(MatterCft::PureGravity, 1.0, &InsertionTemplate::identity(1).unwrap()).unwrap()
}

#[test]
fn pure_gravity_density_reduces_to_closed_form() {
    let model = pure_model();
    assert!((model.insertions().points()[0].alpha - model.params().gamma()).abs() < 1e-15);
    let mut ratios = vec![];
    for t in [tau(0.0, 1.0), tau(0.4, 0.95), tau(-0.2, 2.5)] {
        let (v, se) = model.density(t, Discretization::tied(t, 32).unwrap(), 3, 3000, cfg()).unwrap();
        let r = model.reference_density(t, cfg()).unwrap();
        ratios.push((v / r, se / r));
    }
    for &(r, se) in &ratios {
        assert!((r - 1.0).abs() < 4.0 * se, "{r} ± {se}");
    }
    // μ enters only the volume law.
    let other = ModulusModel::new(MatterCft::PureGravity, 7.0, &InsertionTemplate::identity(1).unwrap()).unwrap();
    let t = tau(0.1, 1.3);
    assert_eq!(other.density_prefactor(t, cfg()), pure_model().density_prefactor(t, cfg()));
}

fn closed_form_table(grid: DensityGrid) -> DensityTable {
    let model = pure_model();
    DensityTable::from_fn(grid, |t| Ok((model.reference_density(t, cfg())?, 0.0))).unwrap()
}

#[test]
fn tail_estimate_flags_tight_truncation() {
    let model = pure_model();
    let reference = |t: ComplexUH| model.reference_density(t, cfg());
    let loose = closed_form_table(DensityGrid::new(12, 12, DEFAULT_T_MAX).unwrap()).tail_fraction(reference).unwrap();
    assert!(loose < 1e-3, "{loose}");
    let tight = closed_form_table(DensityGrid::new(12, 12, 8.0).unwrap()).tail_fraction(reference).unwrap();
    assert!(tight > 1e-3, "{tight}");
    let deep = closed_form_table(DensityGrid::new(12, 12, 4.0).unwrap()).tail_fraction(reference).unwrap();
    assert!(deep > tight);
}

#[test]
fn sampler_matches_table_and_stays_in_domain() {
    let table = closed_form_table(DensityGrid::new(12, 12, DEFAULT_T_MAX).unwrap());
    let sampler = ModulusSampler::new(&table).unwrap();
    let n = 10000;
    let mut counts = vec![0.0; table.grid.nu.saturating_sub(1) * (table.grid.nw - 1)];
    let mut rng = RngStream::new(44, 0).rng();
    for _ in 0..n {
        let t = sampler.sample(&mut rng);
        assert!(t.re().abs() <= 0.5 && t.re() * t.re() + t.im() * t.im() >= 1.0 - 1e-12 && t.im() <= DEFAULT_T_MAX + 1e-12);
        counts[sampler.cell_of(t).unwrap()] += 1.0;
    }
    let expected: Vec<f64> = sampler.cell_probabilities().iter().map(|p| p * n as f64).collect();
    assert!(chi_square_gof(&counts, &expected, 5.0, 0).unwrap().p_value > 0.01);
}

#[test]
#[allow(clippy::needless_range_loop)]
fn sampled_mode_sits_at_the_density_maximum() {
    let table = closed_form_table(DensityGrid::new(21, 24, DEFAULT_T_MAX).unwrap());
    let sampler = ModulusSampler::new(&table).unwrap();
    // Maximizer of √y|η|²/y² over the domain, by scanning.
    let mut best = (f64::MIN, 0.0, 0.0);
    for a in 0..=100 {
        let u = -0.5 + a as f64 / 100.0;
        for b in 0..=100 {
            let y = (1.0 - u * u).sqrt() + b as f64 * 0.02;
            let v = pure_gravity_lebesgue_density(tau(u, y), cfg()).unwrap();
            if v > best.0 {
                best = (v, u, y);
            }
        }
    }
    // Lebesgue histogram with 0.125-wide bins, normalized by the in-domain area.
    let bins = |t: ComplexUH| (((t.re() + 0.5) / 0.125).floor().min(7.0) as usize, ((t.im() - 0.75) / 0.125).floor() as usize);
    let mut counts = vec![vec![0.0; 16]; 8];
    let mut rng = RngStream::new(45, 0).rng();
    for _ in 0..20000 {
        let (a, b) = bins(sampler.sample(&mut rng));
        if b < 16 {
            counts[a][b] += 1.0;
        }
    }
    let mut mode = (0.0, 0usize, 0usize);
    for a in 0..8 {
        for b in 0..16 {
            let mut inside = 0;
            for p in 0..20 {
                for r in 0..20 {
                    let u = -0.5 + 0.125 * (a as f64 + (p as f64 + 0.5) / 20.0);
                    let y = 0.75 + 0.125 * (b as f64 + (r as f64 + 0.5) / 20.0);
                    inside += (u * u + y * y >= 1.0) as usize;
                }
            }
            if inside >= 200 {
                let d = counts[a][b] / inside as f64;
                if d > mode.0 {
                    mode = (d, a, b);
                }
            }
        }
    }
    let cu = -0.5 + 0.125 * (mode.1 as f64 + 0.5);
    let cy = 0.75 + 0.125 * (mode.2 as f64 + 0.5);
    assert!((cu.abs() - best.1.abs()).abs() < 0.2 && (cy - best.2).abs() < 0.2, "mode ({cu}, {cy}) vs max ({}, {})", best.1, best.2);
}

#[test]
fn joint_sampler_composes_independent_parts() {
    let model = pure_model();
    let table = closed_form_table(DensityGrid::new(8, 8, DEFAULT_T_MAX).unwrap());
    let sampler = ModulusSampler::new(&table).unwrap();
    let mut vols = vec![];
    let mut ims = vec![];
    for r in 0..3000u64 {
        let s = joint_law_sampler(&model, &sampler, 16, 0, RngStream::new(6, r), cfg()).unwrap();
        assert!(reduce_to_fundamental(s.tau).witness.is_identity());
        vols.push(s.volume);
        ims.push(s.tau.im());
    }
    assert!(ks_one_sample(&vols, |x| gamma_cdf(x, 1.0, 1.0)).unwrap().p_value > 0.01);
    let (rho, se) = correlation(&vols, &ims).unwrap();
    assert!(rho.abs() < 3.0 * se);
    let s = joint_law_sampler(&model, &sampler, 16, 8, RngStream::new(6, 1), cfg()).unwrap();
    let m = s.measure.unwrap();
    assert!((m.iter().sum::<f64>() - s.volume).abs() < 1e-12 * s.volume);
}
