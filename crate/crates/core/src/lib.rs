//! Gaussian covariance-matrix toolkit for mechanically mediated two-mode
//! squeezing in a three-mode cavity optomechanical system.
//!
//! Two photon modes `a`, `b` couple to a shared mechanical mode `m`. In the
//! large-detuning regime the mechanics can be eliminated, leaving an effective
//! two-photon squeezing coupling `g_eff (ab + a†b†)`. The crate builds both the
//! full 6×6 and the effective 4×4 linear dynamics, propagates covariance
//! matrices exactly, checks the effective coupling against the spectrum of the
//! full transition matrix, and evaluates squeezing levels.
//!
//! Units: every frequency, rate and coupling is expressed in units of the
//! mechanical frequency `ω_m` (so `ω_m = 1`), and time in units of `1/ω_m`.
//! Only [`model::PhysicalParams`] carries SI units.
//!
//! Quadrature ordering is fixed to `(X_a, Y_a, X_b, Y_b, X_m, Y_m)`; see
//! [`matrices::Quadrature`].

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod matrices;
pub mod model;
pub mod spectral;
pub mod squeezing;

pub use error::{Error, Result};
