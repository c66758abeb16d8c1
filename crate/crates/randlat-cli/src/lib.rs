//! Experiment runner behind the `randlat` binary.
//!
//! The binary is a thin argument-parsing shell; everything it does lives
//! here so integration tests can drive the same code paths directly:
//!
//! * [`config`] — JSON-configurable experiment descriptions with defaults,
//! * [`experiments`] — the verification suite, sharpness sweeps, spectra
//!   checks, sample dumps, and the standard CSV schema,
//! * [`svg`] — dependency-free line plots for sweep output.

pub mod config;
pub mod experiments;
pub mod svg;
