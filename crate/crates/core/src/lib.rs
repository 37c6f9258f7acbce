//! Numerical laboratory for continuous-time consensus `ẋ = −L(t)x` over
//! time-varying undirected and signed graphs.
//!
//! * [`graph`]: schedules, Laplacian/incidence factors, joint connectivity.
//! * [`dynamics`]: exact piecewise propagation, noise, the projected system.
//! * [`observability`]: Gramians, uniform bounds, reconstruction from edge signals.
//! * [`analysis`]: decay-rate fits, robustness and signed-network checks.
//! * [`cli`]: scenario files and the `consensus-lab` command.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod graph;
pub mod linalg;
pub mod observability;
pub mod quadrature;
