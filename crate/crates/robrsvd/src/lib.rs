//! Files, command-line interface and parallel benchmark runner around
//! [`robrsvd_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;
pub mod runner;

pub use error::{Error, Result};
pub use robrsvd_core as core;
