//! Achievable rates of quantize-map-and-forward relaying with group successive
//! relaying over layered multihop backhaul networks.

pub mod asymptotic;
pub mod error;
pub mod linalg;
pub mod network;
pub mod rate_core;
pub mod receivers;
pub mod routing;
pub mod schedule;

pub use error::{Error, Result};
