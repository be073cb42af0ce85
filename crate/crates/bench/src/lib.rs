//! Scenarios shared by the benchmarks.

use aerolink_core::env::EnvConfig;

/// Default radio setup with `aps` APs and `users` UAVs.
pub fn scenario(aps: usize, users: usize) -> EnvConfig {
    EnvConfig {
        num_aps: aps,
        num_users: users,
        ..EnvConfig::default()
    }
}
