//! File formats, process backends and the command line for `mrkl`.

pub mod backend;
pub mod cli;
pub mod config;
pub mod files;
pub mod report;
