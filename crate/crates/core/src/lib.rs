//! Numerical study of cohomogeneity-one ("warped Berger") Ricci flow on the
//! twisted sphere bundle over the two-sphere.
//!
//! The crate provides:
//! - metric profiles (f, g) on a fixed grid with pole-regular derivatives,
//!   curvatures and diagnostics ([`profile`], [`curvature`], [`diagnostics`]);
//! - the seed family of initial metrics and its admissibility checks
//!   ([`initial`]);
//! - the explicit flow engine with singular-time estimation ([`flow`]);
//! - the blowdown-soliton profile and its verification identities
//!   ([`soliton`]);
//! - parabolic blow-up frames and soliton alignment ([`blowup`]);
//! - the scalar Kahler reduction and its cross-checks ([`calabi`]);
//! - config, CSV/JSON output, checkpointing and the CLI ([`io`]).

pub mod blowup;
pub mod calabi;
pub mod curvature;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod grid;
pub mod initial;
pub mod interp;
pub mod io;
pub mod profile;
pub mod quad;
pub mod soliton;
pub mod stencil;

pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use profile::MetricProfile;
