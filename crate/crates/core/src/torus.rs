//! Points of `𝕋 = ℝ²/ℤ²` and the flat metric `ĝ_τ` pulled back from
//! `ℂ/(ℤ + τℤ)` through `p_τ(x) = x₁ + τx₂`.

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::special_fn::ComplexUH;

/// A point of `𝕋` with coordinates in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    x1: f64,
    x2: f64,
}

fn wrap(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn center(v: f64) -> f64 {
    let r = wrap(v + 0.5) - 0.5;
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

impl TorusPoint {
    /// Reduces both coordinates mod 1.
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1: wrap(x1), x2: wrap(x2) }
    }

    pub const fn origin() -> Self {
        Self { x1: 0.0, x2: 0.0 }
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    /// Representative in `[-1/2, 1/2)²`.
    pub fn centered(&self) -> (f64, f64) {
        (center(self.x1), center(self.x2))
    }

    pub fn add(&self, other: &TorusPoint) -> Self {
        Self::new(self.x1 + other.x1, self.x2 + other.x2)
    }

    pub fn sub(&self, other: &TorusPoint) -> Self {
        Self::new(self.x1 - other.x1, self.x2 - other.x2)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.x1, -self.x2)
    }

    pub fn is_origin(&self) -> bool {
        self.x1 == 0.0 && self.x2 == 0.0
    }
}

/// `p_τ(x) = x₁ + τ x₂` on raw (unreduced) coordinates.
pub fn p_tau(tau: ComplexUH, x1: f64, x2: f64) -> Complex64 {
    Complex64::new(x1 + tau.re() * x2, tau.im() * x2)
}

/// Inverse of [`p_tau`]: coordinates `(x₁, x₂)` of `z ∈ ℂ`.
pub fn c_tau(tau: ComplexUH, z: Complex64) -> (f64, f64) {
    let x2 = z.im / tau.im();
    (z.re - tau.re() * x2, x2)
}

/// Shortest lift of `x` to `ℂ` under `p_τ`, i.e. the displacement from the
/// nearest lattice point.
pub fn nearest_lift(tau: ComplexUH, x: TorusPoint) -> Complex64 {
    let (c1, c2) = x.centered();
    let mut best = p_tau(tau, c1, c2);
    for k1 in -1..=1 {
        for k2 in -1..=1 {
            let cand = p_tau(tau, c1 + k1 as f64, c2 + k2 as f64);
            if cand.norm_sqr() < best.norm_sqr() {
                best = cand;
            }
        }
    }
    best
}

/// Length of the shortest non-zero vector of `ℤ + τℤ`.
pub fn shortest_period(tau: ComplexUH) -> f64 {
    let mut best = f64::INFINITY;
    for m in -3i32..=3 {
        for n in -3i32..=3 {
            if m == 0 && n == 0 {
                continue;
            }
            best = best.min(p_tau(tau, m as f64, n as f64).norm());
        }
    }
    best
}
