//! Solver for the translation-invariant BCS model with a radial pair
//! interaction: critical temperatures per angular-momentum sector, gap
//! functions, BCS free energies, and the spectral machinery behind them.
//!
//! The momentum-space convention is the symmetric Fourier transform
//! `V^(p) = (2*pi)^(-d/2) * int V(x) exp(-i p.x) dx`, and every radial
//! integral carries the d-dimensional surface measure (`2*pi*p` in 2D,
//! `4*pi*p^2` in 3D). Both conventions are fixed once here and everything
//! downstream (kernels, gap map, free energy) is normalized against them.

pub mod analysis;
pub mod config;
pub mod error;
pub mod gap;
pub mod grid;
pub mod output;
pub mod potentials;
pub mod quadrature;
pub mod spectral;

pub use error::{BcsError, Result};
