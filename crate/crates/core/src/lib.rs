//! Physics core for a thermal energy harvester that snaps a magnet-tipped
//! piezoelectric bimorph between two Curie-threshold ferromagnetic sheets.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; file formats, configuration and parallel
//! drivers live in the `snapharvest` companion crate.
//!
//! Module map:
//!
//! * [`materials`]: temperature-dependent relative permeability of the sheets.
//! * [`magnetics`]: image-dipole force model and the [`magnetics::ForceTable`] cache.
//! * [`moment`]: magnetostatic moment-method solver for the sheet magnetization.
//! * [`harvester`]: lumped bimorph model, coupled ODE right-hand side and contact rules.
//! * [`thermal`]: ambient temperature profiles.
//! * [`engine`]: fixed-step hybrid integrator with contact event localization.
//! * [`explorer`]: static thresholds, energy per cycle, sweeps and simplex optimization.

#![cfg_attr(not(test), no_std)]
// `!(a > b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod explorer;
pub mod harvester;
pub mod linalg;
pub mod magnetics;
pub mod materials;
pub mod moment;
pub mod thermal;
pub mod vec3;

pub use error::{Error, Result};

/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 4.0e-7 * core::f64::consts::PI;
