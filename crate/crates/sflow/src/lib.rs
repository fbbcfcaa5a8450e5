//! File formats, parallel scan drivers, SVG output and the subcommands of
//! the `sflow` tool, on top of `sflow-core`.

pub mod cli;
pub mod demos;
pub mod driver;
pub mod error;
pub mod formats;
pub mod output;
pub mod svg;

pub use error::{CliError, Result};
