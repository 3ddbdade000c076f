//! Library surface of the command-line tool, exposed so integration tests
//! can drive subcommands in-process. The binary in `main.rs` is a thin
//! wrapper around [`commands::execute`].

pub mod args;
pub mod commands;
pub mod report;
