//! Core of the ei tool gateway: the app registry, argv construction, the
//! execution engine and the ei output language.

pub mod command;
pub mod config;
pub mod eiout;
pub mod engine;
pub mod protocol;
mod execid;

pub use execid::{ExecId, InvalidExecId};
