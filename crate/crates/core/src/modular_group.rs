//! `PSL₂(ℤ)` acting on the upper half-plane by `τ ↦ (aτ+b)/(cτ+d)` and on
//! the torus by the unimodular map `ψ̃(x) = (dx₁ + bx₂, cx₁ + ax₂)`.
//!
//! The torus action is contravariant, `(ψ∘φ)~ = φ̃∘ψ̃`, up to the sign
//! `x ↦ -x` that the projective identification `ψ ~ -ψ` leaves open; the
//! Green function is even, so nothing downstream sees that sign. It realizes the
//! conformal equivalence `p_τ(ψ̃(x)) = (cτ+d)·p_{ψ(τ)}(x)` mod the lattice.

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::special_fn::ComplexUH;
use crate::torus::TorusPoint;

/// A modular transformation, stored with the canonical sign
/// `c > 0`, or `c = 0` and `d > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModularElement {
    a: i64,
    b: i64,
    c: i64,
    d: i64,
}

impl ModularElement {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a.checked_mul(d).zip(b.checked_mul(c)).map(|(ad, bc)| ad - bc) != Some(1) {
            return Err(Error::NotUnimodular { a, b, c, d });
        }
        Ok(Self::canonical(a, b, c, d))
    }

    fn canonical(a: i64, b: i64, c: i64, d: i64) -> Self {
        if c < 0 || (c == 0 && d < 0) {
            Self { a: -a, b: -b, c: -c, d: -d }
        } else {
            Self { a, b, c, d }
        }
    }

    pub const fn identity() -> Self {
        Self { a: 1, b: 0, c: 0, d: 1 }
    }

    /// `τ ↦ τ + 1`.
    pub const fn translation() -> Self {
        Self { a: 1, b: 1, c: 0, d: 1 }
    }

    /// `τ ↦ -1/τ`.
    pub const fn inversion() -> Self {
        Self { a: 0, b: -1, c: 1, d: 0 }
    }

    /// `τ ↦ τ + k`.
    pub const fn shift(k: i64) -> Self {
        Self { a: 1, b: k, c: 0, d: 1 }
    }

    /// `[a, b, c, d]`.
    pub fn entries(&self) -> [i64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// `self ∘ other` as maps of the upper half-plane.
    pub fn compose(&self, other: &Self) -> Self {
        Self::canonical(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.d, -self.b, -self.c, self.a)
    }

    /// `ψᵗ(z) = (az + c)/(bz + d)`.
    pub fn transpose(&self) -> Self {
        Self::canonical(self.a, self.c, self.b, self.d)
    }

    /// `cτ + d`.
    pub fn automorphy_factor(&self, tau: ComplexUH) -> Complex64 {
        tau.to_complex() * self.c as f64 + self.d as f64
    }

    /// `ψ′(τ) = (cτ + d)^{-2}`.
    pub fn derivative(&self, tau: ComplexUH) -> Complex64 {
        self.automorphy_factor(tau).powi(-2)
    }

    pub fn act_on_uhp(&self, tau: ComplexUH) -> ComplexUH {
        let z = tau.to_complex();
        let num = z * self.a as f64 + self.b as f64;
        let den = self.automorphy_factor(tau);
        let w = num / den;
        // Exact imaginary part avoids cancellation in the complex division.
        let im = tau.im() / den.norm_sqr();
        ComplexUH::new(w.re, im).expect("modular action preserves the upper half-plane")
    }

    /// `ψ̃(x) = (dx₁ + bx₂, cx₁ + ax₂)` mod 1.
    pub fn act_on_torus(&self, x: TorusPoint) -> TorusPoint {
        let (x1, x2) = (x.x1(), x.x2());
        TorusPoint::new(self.d as f64 * x1 + self.b as f64 * x2, self.c as f64 * x1 + self.a as f64 * x2)
    }

    /// `ψ̃⁻¹(x) = (ax₁ - bx₂, -cx₁ + dx₂)` mod 1.
    pub fn act_on_torus_inverse(&self, x: TorusPoint) -> TorusPoint {
        let (x1, x2) = (x.x1(), x.x2());
        TorusPoint::new(self.a as f64 * x1 - self.b as f64 * x2, -(self.c as f64) * x1 + self.d as f64 * x2)
    }

    /// Exact integer form of `ψ̃` on grid indices `j/g`.
    pub fn act_on_grid(&self, j1: usize, j2: usize, g: usize) -> (usize, usize) {
        let gi = g as i64;
        let (j1, j2) = (j1 as i64, j2 as i64);
        (
            (self.d * j1 + self.b * j2).rem_euclid(gi) as usize,
            (self.c * j1 + self.a * j2).rem_euclid(gi) as usize,
        )
    }

    /// Exact integer form of `ψ̃⁻¹` on grid indices.
    pub fn act_on_grid_inverse(&self, j1: usize, j2: usize, g: usize) -> (usize, usize) {
        let gi = g as i64;
        let (j1, j2) = (j1 as i64, j2 as i64);
        (
            (self.a * j1 - self.b * j2).rem_euclid(gi) as usize,
            (-self.c * j1 + self.d * j2).rem_euclid(gi) as usize,
        )
    }

    /// `ψ̃ᵗ⁻¹(n, m) = (an - cm, dm - bn)`, the Fourier relabelling with
    /// `c_{n,m}(ψ(τ)) = c_{ψ̃ᵗ⁻¹(n,m)}(τ)`.
    pub fn dual_index(&self, n: i64, m: i64) -> (i64, i64) {
        (self.a * n - self.c * m, self.d * m - self.b * n)
    }

    /// `ψ̃ᵗ(n, m) = (dn + cm, bn + am)`, inverse of [`Self::dual_index`].
    pub fn dual_index_inverse(&self, n: i64, m: i64) -> (i64, i64) {
        (self.d * n + self.c * m, self.b * n + self.a * m)
    }
}

/// A reduced modulus together with the element mapping the input onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalDomainPoint {
    pub tau: ComplexUH,
    /// `witness.act_on_uhp(input) == tau`.
    pub witness: ModularElement,
}

const ARC_TOL: f64 = 1e-13;
const MAX_REDUCTION_STEPS: usize = 10_000;

/// Reduces `tau` into `{|Re τ| ≤ 1/2, |τ| ≥ 1}` by alternating translation and
/// inversion. Boundary points are canonicalized to `Re τ ≥ 0`.
pub fn reduce_to_fundamental(tau: ComplexUH) -> FundamentalDomainPoint {
    let mut witness = ModularElement::identity();
    let mut t = tau;
    for _ in 0..MAX_REDUCTION_STEPS {
        // Re τ - k ∈ (-1/2, 1/2].
        let k = (t.re() - 0.5).ceil() as i64;
        if k != 0 {
            let step = ModularElement::shift(-k);
            t = step.act_on_uhp(t);
            witness = step.compose(&witness);
        }
        if t.to_complex().norm_sqr() < 1.0 - ARC_TOL {
            let step = ModularElement::inversion();
            t = step.act_on_uhp(t);
            witness = step.compose(&witness);
        } else {
            break;
        }
    }
    if t.re() < 0.0 && (t.to_complex().norm_sqr() - 1.0).abs() <= ARC_TOL {
        let step = ModularElement::inversion();
        t = step.act_on_uhp(t);
        witness = step.compose(&witness);
    }
    FundamentalDomainPoint { tau: t, witness }
}

/// Whether `tau` lies in the closed fundamental domain, up to `tol`.
pub fn in_fundamental_domain(tau: ComplexUH, tol: f64) -> bool {
    tau.re().abs() <= 0.5 + tol && tau.to_complex().norm_sqr() >= 1.0 - tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::{dedekind_eta, QSeriesConfig};
    use proptest::prelude::*;

    extern crate std;
    use std::vec::Vec;

    fn tau(re: f64, im: f64) -> ComplexUH {
        ComplexUH::new(re, im).unwrap()
    }

    fn all_elements(bound: i64) -> Vec<ModularElement> {
        let mut out = Vec::new();
        for a in -bound..=bound {
            for b in -bound..=bound {
                for c in 0..=bound {
                    for d in -bound..=bound {
                        if a * d - b * c == 1 && (c > 0 || d > 0) {
                            out.push(ModularElement { a, b, c, d });
                        }
                    }
                }
            }
        }
        out
    }

    fn element() -> impl Strategy<Value = ModularElement> {
        proptest::collection::vec(0u8..3, 0..8).prop_map(|word| {
            word.into_iter().fold(ModularElement::identity(), |acc, g| {
                let gen = match g {
                    0 => ModularElement::translation(),
                    1 => ModularElement::inversion(),
                    _ => ModularElement::translation().inverse(),
                };
                acc.compose(&gen)
            })
        })
    }

    #[test]
    fn determinant_is_enforced() {
        assert!(ModularElement::new(1, 1, 1, 1).is_err());
        assert_eq!(ModularElement::new(-1, 0, 0, -1).unwrap(), ModularElement::identity());
        assert_eq!(ModularElement::new(0, 1, -1, 0).unwrap(), ModularElement::inversion());
    }

    #[test]
    fn generators_act_as_expected() {
        let t = tau(0.0, 2.0);
        let inv = ModularElement::inversion().act_on_uhp(t);
        assert!((inv.re()).abs() < 1e-15 && (inv.im() - 0.5).abs() < 1e-15);
        assert_eq!(ModularElement::identity().act_on_uhp(t), t);
        assert_eq!(ModularElement::new(1, 1, 0, 1).unwrap().transpose().entries(), [1, 0, 1, 1]);
        assert!(ModularElement::identity().transpose().is_identity());
    }

    #[test]
    fn reduction_examples() {
        let r = reduce_to_fundamental(tau(0.0, 1.0));
        assert!(r.witness.is_identity());
        assert_eq!(r.tau, tau(0.0, 1.0));

        let input = tau(2.3, 0.4);
        let r = reduce_to_fundamental(input);
        assert!(in_fundamental_domain(r.tau, 1e-12));
        let check = r.witness.act_on_uhp(input);
        assert!((check.to_complex() - r.tau.to_complex()).norm() < 1e-12);

        // Brute force: the reduced point maximizes Im over the orbit.
        for input in [tau(2.3, 0.4), tau(0.5, 0.1), tau(-0.31, 0.05)] {
            let r = reduce_to_fundamental(input);
            assert!(r.tau.im() >= input.im());
            for g in all_elements(20) {
                assert!(g.act_on_uhp(input).im() <= r.tau.im() + 1e-12);
            }
        }
    }

    #[test]
    fn boundary_is_canonicalized() {
        let r = reduce_to_fundamental(tau(-0.5, 1.3));
        assert!((r.tau.re() - 0.5).abs() < 1e-15);
        let theta = 2.0f64;
        let r = reduce_to_fundamental(tau(theta.cos(), theta.sin()));
        assert!(r.tau.re() > 0.0);
        assert!(in_fundamental_domain(r.tau, 1e-12));
    }

    #[test]
    fn torus_action_round_trips_on_grid() {
        let g = 12;
        for psi in all_elements(3) {
            let mut seen = std::vec![false; g * g];
            for j1 in 0..g {
                for j2 in 0..g {
                    let (k1, k2) = psi.act_on_grid(j1, j2, g);
                    assert!(!seen[k1 * g + k2], "grid map must be a bijection");
                    seen[k1 * g + k2] = true;
                    assert_eq!(psi.act_on_grid_inverse(k1, k2, g), (j1, j2));
                    let x = TorusPoint::new(j1 as f64 / g as f64, j2 as f64 / g as f64);
                    let y = psi.act_on_torus(x);
                    let dy = y.sub(&TorusPoint::new(k1 as f64 / g as f64, k2 as f64 / g as f64)).centered();
                    assert!(dy.0.abs() < 1e-12 && dy.1.abs() < 1e-12);
                    let back = psi.act_on_torus_inverse(y).sub(&x).centered();
                    assert!(back.0.abs() < 1e-12 && back.1.abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn composition_is_an_action(p in element(), q in element(), re in -2.0f64..2.0, im in 0.2f64..3.0) {
            let t = tau(re, im);
            let lhs = p.compose(&q).act_on_uhp(t);
            let rhs = p.act_on_uhp(q.act_on_uhp(t));
            prop_assert!((lhs.to_complex() - rhs.to_complex()).norm() < 1e-9 * (1.0 + rhs.to_complex().norm()));
        }

        #[test]
        fn torus_action_is_contravariant(p in element(), q in element(), x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
            let x = TorusPoint::new(x1, x2);
            let lhs = p.compose(&q).act_on_torus(x);
            let rhs = q.act_on_torus(p.act_on_torus(x));
            let d = lhs.sub(&rhs).centered();
            let e = lhs.add(&rhs).centered();
            prop_assert!((d.0.abs() < 1e-9 && d.1.abs() < 1e-9) || (e.0.abs() < 1e-9 && e.1.abs() < 1e-9));
        }

        #[test]
        fn transpose_is_involution(p in element()) {
            prop_assert_eq!(p.transpose().transpose(), p);
        }

        #[test]
        fn imaginary_part_and_eta_transform(p in element(), re in -0.5f64..0.5, im in 0.9f64..2.5) {
            let t = tau(re, im);
            let image = p.act_on_uhp(t);
            prop_assume!(image.im() > 0.05);
            let dpsi = p.derivative(t).norm();
            prop_assert!((image.im() - t.im() * dpsi).abs() < 1e-12 * (1.0 + t.im()));
            let cfg = QSeriesConfig::default();
            let lhs = dedekind_eta(image, cfg).unwrap().norm();
            let rhs = dpsi.powf(-0.25) * dedekind_eta(t, cfg).unwrap().norm();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn reduction_is_idempotent(re in -5.0f64..5.0, im in 0.02f64..3.0) {
            let r = reduce_to_fundamental(tau(re, im));
            prop_assert!(in_fundamental_domain(r.tau, 1e-12));
            let again = reduce_to_fundamental(r.tau);
            prop_assert!(again.witness.is_identity());
            let check = r.witness.act_on_uhp(tau(re, im));
            prop_assert!((check.to_complex() - r.tau.to_complex()).norm() < 1e-9);
        }

        #[test]
        fn dual_index_round_trips(p in element(), n in -50i64..50, m in -50i64..50) {
            let (a, b) = p.dual_index(n, m);
            prop_assert_eq!(p.dual_index_inverse(a, b), (n, m));
        }
    }
}
