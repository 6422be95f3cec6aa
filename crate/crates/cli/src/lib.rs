//! Command-line interface and local JSON service for `mideu` models.

pub mod api;
pub mod cli;
pub mod service;

pub use cli::{load_model, run, Cli};
