//! Configuration, file formats, parallel drivers and the command-line tool
//! around [`snapharvest_core`].
//!
//! * [`config`]: the JSON [`config::RunConfig`] and its conversion to a core scenario.
//! * [`formats`]: CSV, JSON and SVG artifacts.
//! * [`parallel`]: rayon versions of table builds, sweeps and optimizer restarts.
//! * [`commands`] and [`cli`]: the `snapharvest` subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use snapharvest_core as core;

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod report;

pub use error::{Error, Result};
