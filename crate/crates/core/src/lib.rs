//! Model-based reinforcement learning where language goals become decaying
//! intrinsic rewards inside world-model imagination.
//!
//! The crate is organised bottom-up:
//!
//! - [`diffmath`]: tape-based reverse-mode autodiff, dense/GRU layers, Adam, checkpoints
//! - [`textembed`]: deterministic hashing sentence embeddings and cosine similarity
//! - [`env`]: the achievement gridworld with observation and transition captioners
//! - [`goalsource`]: scripted, random and remote goal providers with a query cache
//! - [`reward_engine`]: goal matching, first-exceed gating and RND novelty magnitudes
//! - [`worldmodel`]: RSSM world model, two-hot regression and the world-model loss
//! - [`agent`]: imagination rollouts, lambda-returns, actor and critic losses
//! - [`evalmetrics`]: goal-quality metrics against the environment rule table
//! - [`trainer`]: replay buffer, acting/training loops, config and run orchestration

pub mod agent;
pub mod diffmath;
pub mod env;
pub mod error;
pub mod evalmetrics;
pub mod goalsource;
pub mod reward_engine;
pub mod textembed;
pub mod trainer;
pub mod worldmodel;

pub use error::{Error, Result};
