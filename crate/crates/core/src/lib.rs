//! Numerical laboratory for smooth time changes of the cat-map suspension flow.
//!
//! The base flow `g_t` is the unit-speed vertical flow on the mapping torus of the
//! hyperbolic automorphism `A = [[2,1],[1,1]]` of the 2-torus. A positive smooth
//! function `tau` reparametrizes it into `g^tau_t(x) = g_{alpha(x,t)}(x)` where
//! `int_0^alpha tau(g_s x) ds = t`.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: phase points, the derivative cocycle, stable/unstable leg maps,
//!   the local quotient metric and Haar sampling.
//! * [`timechange`]: the family of time changes, the cocycles `v` and `alpha`,
//!   the time-changed flow and its derivative, and the invariant density.
//! * [`foliation`]: the graph construction of the new stable/unstable leaves and
//!   the transported splitting.
//! * [`supath`]: periodic cycle functionals, path transport, engulfing sweeps,
//!   Haar-averaging identities and coboundary detection.
//! * [`analysis`]: finite-time rate reports, center bunching, correlations and
//!   Birkhoff averages.
//!
//! [`quadrature`] and [`roots`] hold the two numerical kernels everything else
//! is built on; [`stats`] has the deterministic Monte-Carlo plumbing.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod foliation;
pub mod model;
pub mod quadrature;
pub mod roots;
pub mod stats;
pub mod supath;
pub mod timechange;

pub use error::{Error, Result};
pub use model::{CatSuspension, FlowModel, LegKind, PhasePoint, TangentVector};
pub use timechange::{Bump, CoboundaryTerm, CocycleValue, TimeChange, TimeChangeSpec};
