//! Command-line pipeline and HTTP annotation service.

pub mod cli;
pub mod config;
pub mod service;
