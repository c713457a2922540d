//! Command-line and HTTP front ends for the damage forecasting pipeline.

pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod jobs;
pub mod pipeline;
