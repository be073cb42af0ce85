//! Reliability-aware hierarchical multi-agent RL for joint AP clustering and
//! power control in cell-free networks serving UAV users.

pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod hierarchy;
pub mod metrics;
pub mod reliability;
pub mod rl;

pub use error::{Error, Result};
