//! Constant-overhead Bell-pair distillation with high-rate qLDPC codes.
//!
//! The pipeline: construct a code family ([`codes`]), fold two-sided Bell and
//! gate noise onto one node ([`distill`]), build noisy syndrome-extraction
//! circuits with coloration scheduling ([`circuit`]), compile them to detector
//! error models and sample ([`pauli_engine`]), decode with windowed BP and a
//! final BP+OSD round ([`decoder`]), and fit threshold / subthreshold ansatzes
//! ([`analysis`]). The [`runner`] module ties it together for the `qldpc` CLI.

pub mod analysis;
pub mod circuit;
pub mod codes;
pub mod config;
pub mod decoder;
pub mod distill;
pub mod gf2;
pub mod pauli_engine;
pub mod runner;
