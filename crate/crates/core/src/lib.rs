//! Numerical core for the time-domain inverse acoustic source problem in ℝ³.
//!
//! The wave field is driven by a separated source `F(x, t) = f(x) g(t)` with
//! `supp f ⊂ B_R` and homogeneous initial data. This crate provides
//!
//! * [`geometry`]: quadrature on the measurement sphere, the source ball and
//!   the time/frequency/wave-vector grids,
//! * [`source`]: Gaussian-mixture spatial sources and temporal profiles with
//!   closed-form transforms,
//! * [`forward`]: the retarded potential and its derivative channels on the
//!   measurement sphere,
//! * [`spectral`]: the one-sided temporal Fourier transform, the Helmholtz
//!   representation used as an oracle, and the Parseval energy balance,
//! * [`inversion`]: recovery of `f̂(ξ)` from boundary spectra and band-limited
//!   synthesis of `f` on voxels,
//! * [`stability`]: data discrepancy, time tails, the continuation exponent,
//!   the stability bound and the per-cell experiment protocol.
//!
//! # Conventions
//!
//! Every transform in the crate uses the same sign conventions:
//!
//! * temporal: `u(x, w) = ∫₀^∞ U(x, t) e^{-iwt} dt`,
//! * spatial: `f̂(ξ) = ∫ f(y) e^{-iξ·y} dy`, inverted by
//!   `f(y) = (2π)^{-3} ∫ f̂(ξ) e^{+iξ·y} dξ`,
//! * Parseval on the half line for real causal signals:
//!   `∫₀^∞ |h|² dt = (1/π) ∫₀^∞ |ĥ(w)|² dw`.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature pulls in
//! `std` and distributes the per-node and per-voxel loops over a rayon pool;
//! results are identical with and without it.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod forward;
pub mod geometry;
pub mod inversion;
pub mod source;
pub mod spectral;
pub mod stability;

mod par;
mod vec3;

pub use error::{Error, Result};
pub use num_complex::Complex64;
