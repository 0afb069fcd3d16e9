//! `ei`: a terminal client for the tool gateway.

pub mod api;
pub mod cli;

pub use api::{Client, ClientError};
pub use cli::run;
