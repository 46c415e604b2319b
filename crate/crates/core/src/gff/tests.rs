use super::*;
use crate::modular_group::ModularElement;
use crate::special_fn::variance_offset;
use crate::torus_green::green_regularized;

extern crate std;

fn tau(re: f64, im: f64) -> ComplexUH {
    ComplexUH::new(re, im).unwrap()
}

#[test]
fn samples_are_hermitian_mean_zero_and_deterministic() {
    let t = tau(0.2, 1.1);
    let a = sample_gff(t, 8, RngStream::new(1, 0)).unwrap();
    let b = sample_gff(t, 8, RngStream::new(1, 0)).unwrap();
    assert_eq!(a, b);
    assert!(a.is_hermitian(0.0));
    let grid = a.to_grid(64).unwrap();
    let mean: f64 = grid.iter().sum::<f64>() / grid.len() as f64;
    assert!(mean.abs() < 1e-14);
    let x = TorusPoint::new(5.0 / 64.0, 17.0 / 64.0);
    assert!((grid[5 * 64 + 17] - a.evaluate(x)).abs() < 1e-12);
}

#[test]
fn grid_sampler_matches_spectral_path() {
    let t = tau(-0.3, 0.9);
    let eps = 0.02;
    let sampler = GridSampler::new(t, 10, 64, Some(eps)).unwrap();
    let mut buf = std::vec::Vec::new();
    sampler.sample_into(RngStream::new(3, 1), Some(RngStream::new(3, 2)), &mut buf);
    let fa = sample_gff(t, 10, RngStream::new(3, 1)).unwrap().circle_average(eps).unwrap().to_grid(64).unwrap();
    let fb = sample_gff(t, 10, RngStream::new(3, 2)).unwrap().circle_average(eps).unwrap().to_grid(64).unwrap();
    for i in 0..buf.len() {
        assert!((buf[i].re - fa[i]).abs() < 1e-12);
        assert!((buf[i].im - fb[i]).abs() < 1e-12);
    }
    assert!((sampler.variance() - truncated_variance(t, 10, Some(eps))).abs() < 1e-12);
}

#[test]
fn circle_multiplier_matches_theta_quadrature() {
    let t = tau(0.37, 0.81);
    let eps = 0.013;
    let k = 256;
    for n in -64i64..=64 {
        for m in -64i64..=64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..k {
                let z = Complex64::from_polar(eps, 2.0 * PI * j as f64 / k as f64);
                let (x1, x2) = crate::torus::c_tau(t, z);
                acc += Complex64::from_polar(1.0, 2.0 * PI * (n as f64 * x1 + m as f64 * x2));
            }
            let quad = acc / k as f64;
            assert!((quad.re - circle_multiplier(t, n, m, eps)).abs() < 1e-10 && quad.im.abs() < 1e-10);
        }
    }
}

#[test]
fn small_radius_leaves_field_unchanged() {
    let t = tau(0.0, 1.0);
    let f = sample_gff(t, 32, RngStream::new(9, 9)).unwrap();
    let g = f.circle_average(1e-6).unwrap();
    let a = f.to_grid(128).unwrap();
    let b = g.to_grid(128).unwrap();
    // Each mode moves by (πε|k|)²/4 relative; the RMS change over the grid stays near 1e-8.
    let rms = (a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt();
    assert!(rms < 1e-8, "{rms}");
    assert!(g.circle_average(1e-3).is_err());
}

#[test]
fn spectral_variance_matches_regularized_green() {
    let t = tau(0.0, 1.0);
    let eps = 0.02;
    let spectral = truncated_variance(t, 2000, Some(eps));
    let direct = green_regularized(t, TorusPoint::origin(), eps, 64, QSeriesConfig::default()).unwrap();
    // Square truncation at N drops a tail of order Im τ / (2π² ε N).
    assert!((spectral - direct).abs() < 5e-3, "{spectral} vs {direct}");
    let theta = variance_offset(t, QSeriesConfig::default()).unwrap();
    for e in [0.02, 0.01, 0.005] {
        let v = truncated_variance(t, (20.0 / e) as usize, Some(e));
        assert!((v + e.ln() - theta).abs() < 3e-3);
    }
}

#[test]
fn free_field_partition_values() {
    let cfg = QSeriesConfig::default();
    let eta_i = statrs::function::gamma::gamma(0.25) / (2.0 * PI.powf(0.75));
    let z = free_field_partition(tau(0.0, 1.0), cfg).unwrap();
    assert!((z - 1.0 / (eta_i * eta_i)).abs() < 1e-13);
    assert!((z - 1.6944).abs() < 1e-4);
    let t = tau(0.3, 1.7);
    for psi in [ModularElement::translation(), ModularElement::inversion()] {
        let a = free_field_partition(psi.act_on_uhp(t), cfg).unwrap();
        assert!((a - free_field_partition(t, cfg).unwrap()).abs() < 1e-10);
    }
    let big = tau(0.0, 12.0);
    let ratio = free_field_partition(big, cfg).unwrap() / ((PI * 12.0 / 6.0).exp() / 12f64.sqrt());
    assert!((ratio - 1.0).abs() < 1e-12);
}

fn example_spec() -> LogConformalFactor {
    LogConformalFactor::from_half(&[
        (1, 0, Complex64::new(0.3, -0.1)),
        (0, 2, Complex64::new(0.05, 0.2)),
        (1, -1, Complex64::new(-0.4, 0.0)),
        (2, 1, Complex64::new(0.1, 0.1)),
    ])
    .unwrap()
}

#[test]
fn log_conformal_energy_two_ways() {
    let spec = example_spec();
    for t in [tau(0.1, 1.2), tau(2.3, 0.4), tau(-0.45, 0.3)] {
        let field = build_log_conformal_factor(&spec, t, 24).unwrap();
        let coeffs = spec.energy(t);
        let spectral = field.dirichlet_energy();
        let grid = field.dirichlet_energy_on_grid(64).unwrap();
        assert!((coeffs - spectral).abs() < 1e-10 * coeffs);
        assert!((coeffs - grid).abs() < 1e-6, "{coeffs} vs {grid}");
    }
}

#[test]
fn log_conformal_energy_is_modular_invariant() {
    let spec = example_spec();
    let t = tau(0.2, 1.3);
    let base = build_log_conformal_factor(&spec, t, 24).unwrap().dirichlet_energy();
    for psi in [ModularElement::translation(), ModularElement::inversion(), ModularElement::new(1, 2, 1, 3).unwrap()] {
        let image = psi.act_on_uhp(t);
        let e = build_log_conformal_factor(&spec, image, 24).unwrap().dirichlet_energy();
        assert!((e - base).abs() < 1e-10 * base.max(1.0));
    }
    let zero = build_log_conformal_factor(&LogConformalFactor::zero(), t, 4).unwrap();
    assert_eq!(zero.dirichlet_energy(), 0.0);
    assert!(zero.to_grid(16).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn log_conformal_relabelling_must_fit() {
    let spec = LogConformalFactor::from_half(&[(3, 3, Complex64::new(1.0, 0.0))]).unwrap();
    // τ = 7 + i reduces by the translation by −7, which sends (3,3) to (3, 3 + 21).
    let err = build_log_conformal_factor(&spec, tau(7.0, 1.0), 8).unwrap_err();
    assert!(matches!(err, Error::IndexOutOfCutoff { .. }));
    assert!(LogConformalFactor::new(std::vec![(1, 0, Complex64::new(1.0, 0.0))]).is_err());
}
