//! Numerical core for constructing periodic instantons (calorons) from based
//! holomorphic maps into loop-group orbits.
//!
//! The pipeline: a holomorphic map is encoded by its `eta` field, the
//! Hermitian-Yang-Mills heat flow is run on a discretised `S^2 x Sigma`, and the
//! resulting connection is assembled and measured. Everything here is
//! `no_std` + `alloc`; file formats and the CLI live in the `caloron` crate.

#![no_std]
// `!(x > 0.0)` guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod fixed;
pub mod geometry;
pub mod holomap;
pub mod hymflow;
pub mod instanton;
pub mod looporbit;
pub mod matrixcore;
pub mod quad;
pub mod rational;

pub use error::{Error, Result};

#[inline(always)]
pub(crate) fn sqr(x: f64) -> f64 {
    x * x
}
