//! Command-line and HTTP front end for the log-analysis engine.

pub mod config;
pub mod server;
pub mod state;
