//! Numerical laboratory for localized energy-balance diagnostics of
//! incompressible MHD fields in symmetrized (cross-advection) variables.
//!
//! The crate provides, bottom to top:
//!
//! - periodic space-time grids, sampled fields, and pseudo-spectral
//!   differential/nonlocal operators ([`grid`], [`spectral`], [`cylinder`]);
//! - conversions between physical and symmetrized variables plus the
//!   spectral pressure solve ([`elsasser`]);
//! - smooth cut-off ladders, harmonic corrections and their companion
//!   system ([`cutoff`], [`localization`]);
//! - parabolic Morrey / Hoelder / mixed-Lebesgue norms by cylinder scanning
//!   ([`norms`]);
//! - mollifier ladders, regularized energy balances, dissipation defects and
//!   the dissipativity verdict ([`mollify`], [`dissipation`]);
//! - the small-gradient criterion scanner and box counting ([`scan`]);
//! - manufactured solutions and a mini pseudo-spectral time stepper
//!   ([`sim`]).

pub mod cutoff;
pub mod cylinder;
pub mod dissipation;
pub mod elsasser;
pub mod error;
pub mod grid;
pub mod io;
pub mod localization;
pub mod mollify;
pub mod norms;
pub mod par;
pub mod scan;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{FieldSnapshot, Grid};
