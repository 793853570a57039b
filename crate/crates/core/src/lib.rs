//! Impulse-response identification with frequency-domain side information.
//!
//! The estimate minimizes a kernel-regularized least-squares loss over the
//! RKHS of a stable TC kernel, subject to `|G(e^{jω})| <= 1` (after output
//! scaling) on a finite frequency partition. The sampled problem reduces to a
//! convex QCQP that is solved by a log-barrier Newton method, with the
//! constraint set grown by an activation loop.

pub mod cli;
pub mod error;
pub mod functionals;
pub mod identify;
pub mod kernels;
pub mod problem;
pub mod qcqp;
pub mod quad;
pub mod signals;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
