//! Networks, action heads and the PPO machinery.

pub mod adam;
pub mod agent;
pub mod buffer;
pub mod checkpoint;
pub mod gae;
pub mod heads;
pub mod mlp;
pub mod ppo;
pub mod trainer;

pub use adam::Adam;
pub use agent::{Agent, Decision, LossGrad, Policy, Sampled, TrainerConfig, UpdateStats};
pub use buffer::{RolloutBuffer, Step};
pub use checkpoint::Checkpoint;
pub use gae::{discounted_returns, gae};
pub use heads::HeadKind;
pub use mlp::Mlp;
pub use ppo::{normalize_advantages, ppo_loss, PpoDiagnostics};
pub use trainer::{collect_and_update, Environment, EnvPool, IterationStats};
