//! Differentiable decision trees for reinforcement learning.
//!
//! * [`tree`]: soft decision trees and rule lists with exact gradients.
//! * [`crisp`]: discretization into ordinary decision trees, pruning, export.
//! * [`envs`]: chain MDP, cart-pole and a two-drone wildfire tracker.
//! * [`train`]: rollouts, returns, policy-gradient, Q-learning and PPO updates.
//! * [`analysis`]: critical points of the threshold updates on the chain MDP.
//! * [`baselines`]: MLP policy and CART fit on logged state-action pairs.

pub mod analysis;
pub mod baselines;
pub mod crisp;
pub mod envs;
pub mod error;
pub mod rng;
pub mod train;
pub mod tree;

pub use error::{CrispError, DataError, EnvError, ModelError, TrainError};
pub use tree::{Interpretation, SoftTree, Topology};
