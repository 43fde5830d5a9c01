//! Thermo-quantum diffusion toolkit.
//!
//! Classical Brownian motion of a quantum particle: diffusion driven by the
//! Bohm quantum potential, its Gaussian moment dynamics and closed-form
//! dispersion laws, mean-field Langevin ensembles and their spectral
//! diagnostics.
//!
//! | module | contents |
//! |---|---|
//! | [`phys`] | parameters and derived constants |
//! | [`analytic`] | closed forms, quadrature, Bloch oracle |
//! | [`moments`] | dispersion ODEs |
//! | [`pde`] | finite-difference Smoluchowski solver |
//! | [`langevin`] | stochastic ensembles |
//! | [`spectral`] | autocorrelation and spectral density estimates |
//! | [`verify`] | the cross-check matrix behind `tqdiff verify` |

pub mod analytic;
pub mod cli;
pub mod config;
pub mod error;
pub mod langevin;
pub mod moments;
pub mod output;
pub mod pde;
pub mod phys;
mod reduce;
pub mod spectral;
pub mod verify;

pub use error::{Error, ParamError, Result};
pub use phys::{BathParams, DerivedConstants, Extent, OscillatorParams};
pub use reduce::SampleStats;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
