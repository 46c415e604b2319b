use super::*;
use crate::special_fn::variance_offset;

extern crate std;
use std::vec::Vec;

fn tau(re: f64, im: f64) -> ComplexUH {
    ComplexUH::new(re, im).unwrap()
}

fn q() -> QSeriesConfig {
    QSeriesConfig::default()
}

fn sample_points(count: usize, seed: u64) -> Vec<TorusPoint> {
    // Weyl sequence; keeps clear of the origin.
    let a = 0.754_877_666_246_692_7;
    let b = 0.569_840_290_998_053_3;
    (0..count)
        .map(|i| {
            let k = (i as u64 + seed) as f64;
            TorusPoint::new(0.1 + 0.8 * (k * a).fract(), 0.1 + 0.8 * (k * b).fract())
        })
        .collect()
}

#[test]
fn symmetric_under_reflection() {
    let t = tau(1.0, 2.0);
    for x in sample_points(40, 3) {
        let a = green_closed_form(t, x, q()).unwrap();
        let b = green_closed_form(t, x.neg(), q()).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn raw_closed_form_is_periodic() {
    for t in [tau(0.0, 1.0), tau(0.4, 0.8), tau(-0.3, 2.2)] {
        for x in sample_points(20, 11) {
            let (x1, x2) = (x.x1(), x.x2());
            let base = green_closed_form_raw(t, x1, x2, q()).unwrap();
            let s1 = green_closed_form_raw(t, x1 + 1.0, x2, q()).unwrap();
            let s2 = green_closed_form_raw(t, x1, x2 + 1.0, q()).unwrap();
            let s3 = green_closed_form_raw(t, x1 - 1.0, x2 - 1.0, q()).unwrap();
            for v in [s1, s2, s3] {
                assert!((v - base).abs() < 1e-10, "{t:?} {x:?}");
            }
        }
    }
}

#[test]
fn eigen_series_agrees_with_closed_form() {
    let t = tau(0.0, 1.0);
    let x = TorusPoint::new(0.3, 0.4);
    let closed = green_closed_form(t, x, q()).unwrap();
    let eig = green_eigen_series(t, x, 400).unwrap();
    assert!((closed - eig.value).abs() < 5e-3, "{closed} vs {:?}", eig);
    assert!(eig.error_estimate < 5e-3);
    let cfg = GreenEvalConfig::eigen_series(400, 1e-12);
    assert!(matches!(green(t, x, &cfg), Err(Error::NonConvergence { .. })));
}

#[test]
fn appendix_series_agrees_with_closed_form() {
    for t in [tau(0.0, 1.0), tau(0.5, 0.866), tau(-0.2, 3.0), tau(0.3, 0.2)] {
        for x in sample_points(30, 5).into_iter().chain([TorusPoint::new(0.0, 0.3), TorusPoint::new(0.01, 0.0)]) {
            let a = green_closed_form(t, x, q()).unwrap();
            let b = green_appendix_series(t, x, 1e-15).unwrap();
            assert!((a - b).abs() < 1e-10, "{t:?} {x:?}: {a} vs {b}");
        }
    }
}

#[test]
fn singular_point_is_reported() {
    let t = tau(0.0, 1.0);
    for cfg in [GreenEvalConfig::closed_form(), GreenEvalConfig::appendix_series(), GreenEvalConfig::eigen_series(10, 1.0)] {
        assert_eq!(green(t, TorusPoint::origin(), &cfg), Err(Error::SingularPoint));
    }
}

#[test]
fn short_distance_constant_matches_extrapolation() {
    for t in [tau(0.0, 1.0), tau(0.35, 1.4)] {
        let c = short_distance_constant(t, q()).unwrap();
        assert!((c - variance_offset(t, q()).unwrap()).abs() < 1e-13);
        let f = |h: f64| {
            let x = TorusPoint::new(0.3 * h, 0.2 * h);
            green_closed_form(t, x, q()).unwrap() + p_tau(t, 0.3 * h, 0.2 * h).norm().ln()
        };
        // Remainder is O(h²): one Richardson step removes it.
        let h = 1e-2;
        let extrapolated = (4.0 * f(h / 2.0) - f(h)) / 3.0;
        assert!((extrapolated - c).abs() < 1e-8, "{extrapolated} vs {c}");
    }
}

#[test]
fn mean_zero_quadrature() {
    let cfg = GreenEvalConfig::closed_form();
    for t in [tau(0.0, 1.0), tau(0.5, 0.9)] {
        let m = green_mean_zero_check(t, 256, &cfg).unwrap();
        assert!(m.abs() < 1e-3, "{m}");
        let coarse = green_mean_zero_check(t, 128, &cfg).unwrap();
        let fine = green_mean_zero_check(t, 512, &cfg).unwrap();
        assert!(fine.abs() < coarse.abs(), "{coarse} {fine}");
    }
}

#[test]
fn regularized_variance_tends_to_theta() {
    let t = tau(0.0, 1.0);
    let theta = variance_offset(t, q()).unwrap();
    let eps = 1e-3;
    let v = green_regularized(t, TorusPoint::origin(), eps, 32, q()).unwrap();
    assert!((v + eps.ln() - theta).abs() < 1e-2);
    assert!((theta + 1.3106).abs() < 1e-4);
}

#[test]
fn regularized_green_is_continuous_off_diagonal() {
    let t = tau(0.2, 1.1);
    let x = TorusPoint::new(0.3, 0.45);
    let g = green_closed_form(t, x, q()).unwrap();
    let r = green_regularized(t, x, 1e-4, 32, q()).unwrap();
    assert!((g - r).abs() < 1e-6);
}

#[test]
fn regularized_split_matches_plain_quadrature_near_switch() {
    // Just above and below the 3ε switch both branches must agree with each other.
    let t = tau(0.0, 1.0);
    let eps = 0.01;
    let a = green_regularized(t, TorusPoint::new(0.0299, 0.0), eps, 64, q()).unwrap();
    let b = green_regularized(t, TorusPoint::new(0.0301, 0.0), eps, 64, q()).unwrap();
    let slope = (b - a) / 0.0002;
    assert!((slope + 1.0 / 0.03).abs() < 0.5, "{slope}");
}

#[test]
fn circle_covariance_is_translation_invariant() {
    let t = tau(0.3, 0.9);
    let eps = 1e-2;
    let base = circle_covariance(t, TorusPoint::origin(), TorusPoint::origin(), eps, 32, q()).unwrap();
    for x in [TorusPoint::new(0.999, 0.5), TorusPoint::new(0.4, 0.001), TorusPoint::new(0.9995, 0.9995)] {
        let v = circle_covariance(t, x, x, eps, 32, q()).unwrap();
        assert!((v - base).abs() < 1e-10);
    }
}

#[test]
fn fourier_coefficients_relabel_under_modular_maps() {
    let t = tau(0.27, 1.3);
    for psi in [ModularElement::translation(), ModularElement::inversion(), ModularElement::new(2, 1, 1, 1).unwrap()] {
        let image = psi.act_on_uhp(t);
        for n in -5i64..=5 {
            for m in -5i64..=5 {
                if n == 0 && m == 0 {
                    continue;
                }
                let (n2, m2) = psi.dual_index(n, m);
                let lhs = fourier_coefficient(image, n, m);
                let rhs = fourier_coefficient(t, n2, m2);
                assert!((lhs - rhs).abs() < 1e-12 * lhs.max(1.0));
            }
        }
    }
}

#[test]
fn modular_invariance() {
    let pts = sample_points(50, 1);
    for t in [tau(0.0, 1.0), tau(0.0, 2.0), tau(0.3, 1.1)] {
        for psi in [ModularElement::identity(), ModularElement::translation(), ModularElement::inversion()] {
            let r = modular_invariance_residual(t, &psi, &pts, q()).unwrap();
            assert!(r < 1e-9, "{t:?} {psi:?}: {r}");
        }
    }
}
