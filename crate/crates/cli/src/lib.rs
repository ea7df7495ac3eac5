//! Command-line front end of `cavfb-core`: TOML configs in, CSV spectra,
//! key-value reports and SVG plots out.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod model;
pub mod plot;
pub mod spectrum_file;

pub use commands::{run, run_plot, Command, Options};
pub use config::{parse_config, parse_str, RunConfig};
pub use error::{CliError, CliResult, Kind};
pub use spectrum_file::{Metadata, Report, SpectrumFile, Table};
