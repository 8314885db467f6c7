//! Library side of the `pdvol` command: configuration, the subcommands and
//! SVG plotting. The binary is a thin argument parser over this crate.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

pub use commands::{cmd_augment, cmd_ingest, cmd_plot, cmd_run, cmd_synth, PlotKind, PlotRequest};
pub use config::{KeyValues, RunConfig};
