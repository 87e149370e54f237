//! Subcommand machinery behind the `gradnap` binary: configuration,
//! run manifests, exit-code mapping and the stage implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
