//! FaaS benchmarking harness and deterministic platform simulator.

pub mod cli;
pub mod config;
pub mod cost;
pub mod experiments;
pub mod model;
pub mod platform;
pub mod sim;
pub mod stats;
