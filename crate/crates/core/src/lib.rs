//! Sparse nonnegative unmixing of fluorescence spectra.
//!
//! A measured spectrum `s` is modelled as a nonnegative combination `B c` of
//! endmember spectra (the columns of `B`). This crate provides
//!
//! * domain types, projections, losses and evaluation metrics ([`spectra`]),
//! * endmember library I/O, resampling and a built-in 9-endmember library ([`library`]),
//! * the NNLS, SNNLS, ISTA and SNPR solvers ([`solvers`]),
//! * a labelled spectrum simulator with Poisson-like noise ([`simulate`]),
//! * noise isolation and distribution analysis ([`noise`]),
//! * a benchmark harness comparing solvers on simulated corpora ([`bench`]).

// `!(x > 0.0)` also rejects NaN; index loops mirror the maths
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod library;
pub mod noise;
pub mod simulate;
pub mod solvers;
pub mod spectra;

pub use error::{Error, Result};
pub use library::{EndmemberLibrary, SpectraBatch};
pub use solvers::{Algorithm, SolverConfig, UnmixResult};
pub use spectra::{AbundanceVector, Spectrum, WavelengthGrid, ZERO_TOL};
