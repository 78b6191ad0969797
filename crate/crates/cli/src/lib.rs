//! Configuration, tables and the verification pipeline behind the `ambit`
//! command.

pub mod app;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod tables;
pub mod verify;

pub use config::{ConfigErrors, Plan, RunConfig};
