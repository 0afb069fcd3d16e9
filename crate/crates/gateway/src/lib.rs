//! HTTP gateway: one JSON command endpoint in front of the app registry and
//! the execution engine, plus a plain GET route for downloads.

pub mod classify;
pub mod config;
pub mod handler;
pub mod server;
pub mod session;

pub use classify::classify_output;
pub use config::ServerConfig;
pub use handler::{Body, Gateway, Reply, StartError};
pub use server::{router, serve, BackgroundServer, ENDPOINT};
