//! Desk-scale simulator of quantum frequency translation by four-wave-mixing
//! Bragg scattering in photonic crystal fiber.
//!
//! The crate models the full counting experiment around a fiber frequency
//! translator:
//!
//! * [`dispersion`] — Taylor dispersion model, modulation-instability
//!   sideband prediction, Bragg-scattering phase-matching residuals, and a
//!   least-squares fit of fiber coefficients to observed tuning curves;
//! * [`fock`] — truncated two-mode Fock states, the passive (beam-splitter
//!   -like) mode map of the translator, and heralded conditioning;
//! * [`translator`] — coupling parameters (delta, kappa), transfer
//!   functions, translation efficiency, and the finite acceptance bandwidth
//!   that narrows translated spectra;
//! * [`source`] — the heralded pair source feeding the translator;
//! * [`counting`] — the Monte Carlo pulse-train engine with threshold
//!   detectors, Poisson backgrounds, and the g2(0) / coincidence-to-
//!   accidental / depletion / creation estimators;
//! * [`config`] — TOML presets and scenarios driving the CLI.
//!
//! Monte Carlo work is block-parallel under the `parallel` feature
//! (enabled by default); disabling it yields a dependency-light sequential
//! build that produces bit-identical tallies.

pub mod config;
pub mod counting;
pub mod detector;
pub mod dispersion;
pub mod error;
pub mod fock;
pub mod sampling;
pub mod source;
pub mod translator;
pub mod units;

pub use detector::DetectorSpec;
pub use error::{Result, SimError};
