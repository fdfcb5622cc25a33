//! Wasserstein-p normal-approximation certificates for sums of locally
//! dependent random variables.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece:
//!
//! * [`depgraph`] — dependency graphs and closed neighborhoods `N(J)`.
//! * [`combinat`] — compositions, restricted compositions, sign sequences
//!   and neighborhood index chains.
//! * [`cumulants`] — Bell polynomials, moment/cumulant conversion, Hankel
//!   determinants and Hamburger feasibility, generic over `f64` and exact
//!   rationals.
//! * [`matching`] — cumulant matching: choice of `q`, moment extension and
//!   realisation of a finite-atom law with prescribed moments.
//! * [`rsums`] — joint models, compositional expectations, S-/R-sums and the
//!   remainder terms `R_{k,ω}`.
//! * [`bounds`] — closed-form bounds, the Stein equation solver and the
//!   non-uniform tail bounds.
//! * [`sim`] — generators, empirical Wasserstein distances to the normal law
//!   and log–log rate fits.
//!
//! Everything that needs an operating system (files, threads, the command
//! line) lives in the companion `wpcert` crate.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]
// Validation is written as `!(x > 0.0)` throughout so that NaN is rejected
// together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![warn(missing_docs)]

extern crate alloc;

pub mod bounds;
pub mod combinat;
pub mod cumulants;
pub mod depgraph;
mod error;
pub mod linalg;
pub mod matching;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod rsums;
pub mod sim;

pub use error::{Error, Result};
