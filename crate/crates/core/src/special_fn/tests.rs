use super::*;
use std::vec::Vec;

extern crate std;

fn cfg() -> QSeriesConfig {
    QSeriesConfig::default()
}

fn tau(re: f64, im: f64) -> ComplexUH {
    ComplexUH::new(re, im).unwrap()
}

/// 100 points of the closed fundamental domain, including points on its boundary.
fn domain_grid() -> Vec<ComplexUH> {
    let mut out = Vec::new();
    for i in 0..10 {
        let re = -0.5 + i as f64 / 9.0;
        let floor = (1.0 - re * re).sqrt();
        for j in 0..10 {
            let im = floor + 3.0 * j as f64 / 9.0;
            out.push(tau(re, im.max(floor)));
        }
    }
    out
}

#[test]
fn eta_at_i_matches_gamma_quarter_closed_form() {
    let oracle = statrs::function::gamma::gamma(0.25) / (2.0 * PI.powf(0.75));
    let eta = dedekind_eta(tau(0.0, 1.0), cfg()).unwrap();
    assert!((eta.re - oracle).abs() < 1e-14, "{eta} vs {oracle}");
    assert!((eta.re - 0.7682254223260566).abs() < 1e-14);
    assert!(eta.im.abs() < 1e-15);
}

#[test]
fn eta_series_matches_product() {
    for t in domain_grid() {
        let a = dedekind_eta(t, cfg()).unwrap();
        let b = dedekind_eta_product(t, cfg()).unwrap();
        assert!((a - b).norm() < 1e-13, "{t:?}");
    }
}

#[test]
fn eta_translation_and_inversion_laws() {
    let phase = Complex64::new(0.0, PI / 12.0).exp();
    for t in domain_grid() {
        let e = dedekind_eta(t, cfg()).unwrap();
        let shifted = dedekind_eta(tau(t.re() + 1.0, t.im()), cfg()).unwrap();
        assert!((shifted - phase * e).norm() < 1e-10);
        let z = t.to_complex();
        let inv = ComplexUH::from_complex(-z.inv()).unwrap();
        let lhs = dedekind_eta(inv, cfg()).unwrap();
        let rhs = (z / Complex64::new(0.0, 1.0)).sqrt() * e;
        assert!((lhs - rhs).norm() < 1e-10, "{t:?}: {lhs} vs {rhs}");
    }
}

#[test]
fn eta_tolerance_refinement_is_consistent() {
    for im in [0.05, 0.1, 0.3, 1.0, 2.5] {
        for re in [-0.4, 0.0, 0.25] {
            for t in [1e-6, 1e-9, 1e-12] {
                let coarse = dedekind_eta(tau(re, im), QSeriesConfig::new(t, 100_000).unwrap()).unwrap();
                let fine = dedekind_eta(tau(re, im), QSeriesConfig::new(t / 100.0, 100_000).unwrap()).unwrap();
                assert!((coarse - fine).norm() <= t);
            }
        }
    }
}

#[test]
fn small_imaginary_part_is_rejected() {
    assert!(matches!(dedekind_eta(tau(0.0, 5e-4), cfg()), Err(Error::ModulusTooClose { .. })));
    assert!(ComplexUH::new(0.0, 0.0).is_err());
    assert!(ComplexUH::new(0.0, -1.0).is_err());
    let tight = QSeriesConfig::new(1e-15, 2).unwrap();
    assert!(matches!(dedekind_eta(tau(0.0, 0.01), tight), Err(Error::NonConvergence { .. })));
}

#[test]
fn theta1_zero_and_odd() {
    for t in domain_grid().into_iter().step_by(7) {
        assert_eq!(theta1(Complex64::new(0.0, 0.0), t, cfg()).unwrap(), Complex64::new(0.0, 0.0));
        let z = Complex64::new(0.31, 0.07);
        let a = theta1(z, t, cfg()).unwrap();
        let b = theta1(-z, t, cfg()).unwrap();
        assert!((a + b).norm() < 1e-14);
    }
}

#[test]
fn theta1_series_matches_product() {
    let z = Complex64::new(0.3, 0.1);
    let t = tau(0.0, 2.0);
    let s = theta1_with(z, t, cfg(), Theta1Method::Series).unwrap();
    let p = theta1_with(z, t, cfg(), Theta1Method::Product).unwrap();
    assert!((s - p).norm() < 1e-12, "{s} vs {p}");
    for t in domain_grid() {
        for (x, y) in [(0.1, 0.0), (0.37, 0.2), (-0.45, -0.25), (0.8, 0.1)] {
            let z = Complex64::new(x, y * t.im() / 4.0 / 0.25);
            let z = Complex64::new(z.re, z.im.clamp(-t.im() / 4.0, t.im() / 4.0));
            let s = theta1_with(z, t, cfg(), Theta1Method::Series).unwrap();
            let p = theta1_with(z, t, cfg(), Theta1Method::Product).unwrap();
            assert!((s - p).norm() < 1e-10, "{t:?} {z}: {s} vs {p}");
        }
    }
}

#[test]
fn theta1_derivative_is_two_pi_eta_cubed() {
    for t in domain_grid().into_iter().chain([tau(0.0, 2.0)]) {
        let d = theta1_z_derivative_at_zero(t, cfg()).unwrap();
        let e = dedekind_eta(t, cfg()).unwrap();
        assert!((d - e.powi(3) * (2.0 * PI)).norm() < 1e-10);
    }
    // Finite-difference check of the termwise derivative.
    let t = tau(0.2, 1.3);
    let h = 1e-5;
    let fd = (theta1(Complex64::new(h, 0.0), t, cfg()).unwrap() - theta1(Complex64::new(-h, 0.0), t, cfg()).unwrap())
        / (2.0 * h);
    assert!((fd - theta1_z_derivative_at_zero(t, cfg()).unwrap()).norm() < 1e-8);
    let a = theta1_z_derivative_at_zero(tau(0.0, 1.0), cfg()).unwrap();
    let b = theta1_z_derivative_at_zero(tau(1.0, 1.0), cfg()).unwrap();
    assert!((a.norm() - b.norm()).abs() < 1e-13);
    assert!(a.im.abs() < 1e-15 && a.re > 0.0);
}

#[test]
fn theta_constants() {
    let t = tau(0.0, 1.5);
    let th2 = theta_aux(AuxTheta::Two, t, cfg()).unwrap();
    let th3 = theta_aux(AuxTheta::Three, t, cfg()).unwrap();
    let th4 = theta_aux(AuxTheta::Four, t, cfg()).unwrap();
    assert!((th2.powi(4) + th4.powi(4) - th3.powi(4)).norm() < 1e-12);
    for v in [th2, th3, th4] {
        assert_eq!(v.im, 0.0);
    }
    // ϑ₃(0,i) = π^{1/4} / Γ(3/4).
    let oracle = PI.powf(0.25) / statrs::function::gamma::gamma(0.75);
    let th3_i = theta_aux(AuxTheta::Three, tau(0.0, 1.0), cfg()).unwrap();
    assert!((th3_i.re - oracle).abs() < 1e-14);
    assert!((th3_i.re - 1.086_434_811_213_308).abs() < 1e-14);
    // ϑ₂ϑ₃ϑ₄ = 2η³ on a generic modulus.
    let t = tau(0.3, 0.9);
    let prod = theta_aux(AuxTheta::Two, t, cfg()).unwrap()
        * theta_aux(AuxTheta::Three, t, cfg()).unwrap()
        * theta_aux(AuxTheta::Four, t, cfg()).unwrap();
    assert!((prod - dedekind_eta(t, cfg()).unwrap().powi(3) * 2.0).norm() < 1e-12);
    assert!(AuxTheta::from_index(5).is_err());
}

#[test]
fn variance_offset_at_i() {
    let v = variance_offset(tau(0.0, 1.0), cfg()).unwrap();
    let eta_i = statrs::function::gamma::gamma(0.25) / (2.0 * PI.powf(0.75));
    assert!((v - (-(2.0 * PI).ln() - 2.0 * eta_i.ln())).abs() < 1e-13);
    assert!((v + 1.3106).abs() < 1e-4);
}

#[test]
fn gamma_matches_reference() {
    for &x in &[0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 25.5, 100.0, -0.5, -2.3] {
        let a = gamma(x);
        let b = statrs::function::gamma::gamma(x);
        assert!(((a - b) / b).abs() < 3e-13, "{x}: {a} vs {b}");
        let la = ln_gamma(x);
        let lb = libm::lgamma(x);
        assert!((la - lb).abs() < 1e-12 * lb.abs().max(1.0), "{x}");
    }
    assert!(gamma(0.0).is_nan() && gamma(-3.0).is_nan());
    let mut factorial = 1.0f64;
    for n in 1..=30u32 {
        let g = gamma(n as f64 + 1.0);
        factorial *= n as f64;
        assert!(((g - factorial) / factorial).abs() < 1e-13, "{n}");
    }
}

#[test]
fn incomplete_gamma_matches_reference() {
    for &a in &[0.5, 1.0, 2.5, 10.0, 40.0] {
        for &x in &[0.01, 0.5, 1.0, 3.0, 12.0, 60.0] {
            let p = regularized_gamma_p(a, x);
            let q = regularized_gamma_q(a, x);
            let ref_p = statrs::function::gamma::gamma_lr(a, x);
            assert!((p - ref_p).abs() < 1e-12, "{a} {x}: {p} vs {ref_p}");
            assert!((p + q - 1.0).abs() < 1e-14);
        }
    }
    assert!((regularized_gamma_p(1.0, 2.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
}
