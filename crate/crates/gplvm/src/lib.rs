//! File formats, configuration, parallel execution and the `gplvm` command
//! line on top of [`gplvm_core`].

pub mod commands;
pub mod config;
pub mod dataset;
pub mod document;
pub mod error;
pub mod matrix_io;
pub mod parallel;

pub use gplvm_core;

pub use config::ProblemConfig;
pub use document::ResultDocument;
pub use error::{CliError, Result};

/// Version stamped into every document this crate writes.
pub const FORMAT_VERSION: u32 = 1;
