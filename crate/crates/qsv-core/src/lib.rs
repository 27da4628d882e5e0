//! Simulation and certification toolkit for quantum state verification
//! games over direct sums of matrix algebras.
//!
//! Systems are modeled as lists of matrix block dimensions (`[n1..nk]`),
//! which covers quantum registers (`[n]`), classical registers (lists of
//! ones), and hybrid tagged mixtures of both. States carry one positive
//! semidefinite block per dimension with unit total trace; channels are
//! trace-preserving linear maps held as dense superoperators on the
//! vectorized block space and are built from a closed set of completely
//! positive generators (preparations, measurements, traces, branching and
//! permutation combinators, and their compositions).
//!
//! On top of the channel layer the crate provides:
//!
//! * distance and distinguishability metrics (trace distance, fidelity,
//!   optimal binary measurements, multi-copy bounds, and a sampling lower
//!   estimator for the diamond distance),
//! * combs: hole-bearing protocol fragments that are filled with resource
//!   channels, nested, and concatenated,
//! * cut-and-choose state verification protocols, their ideal resource,
//!   and the explicit attack constructions used to certify that no such
//!   protocol can be simultaneously efficient and secure,
//! * a verifier that evaluates honest and dishonest distinguishing
//!   advantages against the closed-form bounds and reports margins.
//!
//! The crate is `no_std` (with `alloc`); all floating-point math goes
//! through `libm`. IO, configuration parsing, and the command line live in
//! the companion binary crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod algebra;
pub mod attacks;
pub mod channels;
pub mod combs;
mod error;
pub mod metrics;
pub mod protocols;
pub mod tol;
pub mod verifier;

pub use error::{Error, Result};
