//! Numerical kernels for Liouville quantum field theory on complex tori
//! `𝕋 = ℂ/(ℤ + τℤ)`: theta functions, the modular group, the torus Green
//! function, spectral Gaussian free fields, Gaussian multiplicative chaos,
//! partition functions with insertions, and the law of the Liouville modulus.
//!
//! The crate is `no_std` and needs only `alloc`. Parallel replica drivers,
//! file formats and the command-line front end live in `torus-lqg-cli`.

#![no_std]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Float math comes from `num_traits::Float` (libm-backed). Builds that also link std
// resolve the inherent methods instead, which is why those imports carry `allow(unused_imports)`.

extern crate alloc;

pub mod error;
pub mod fft;
pub mod gff;
pub mod gmc;
pub mod lqft;
pub mod moduli_lqg;
pub mod modular_group;
pub mod rng;
pub mod special_fn;
pub mod stats;
pub mod torus;
pub mod torus_green;

pub use error::{Error, Result};
pub use modular_group::{reduce_to_fundamental, FundamentalDomainPoint, ModularElement};
pub use special_fn::{ComplexUH, QSeriesConfig};
pub use torus::TorusPoint;
