//! Online reinforcement learning for soft trees and baseline models.

mod driver;
mod optim;
mod policy;
mod q;
mod updates;

pub use driver::{evaluate, moving_average, train, write_curve_csv, EpisodeRecord, EvalSummary, TrainOutcome};
pub use optim::{Direction, RmsProp};
pub use policy::{
    sample_index, ActionSelection, Actor, Arch, Policy, PolicyActor, PolicyModel, RandomActor, DEFAULT_MLP_WIDTH,
};
pub use q::{greedy_action, q_delta, q_step, train_q, QTrainConfig, QTransition};
pub use updates::{pg_gradient, pg_step, ppo_gradient, ppo_step};

use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::TrainError;

/// How discounted returns are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnConvention {
    /// `A_t = sum_{t' >= t} gamma^(t' - t) r_t'`.
    Conventional,
    /// `A_t = sum_{t' >= t} gamma^(T - 1 - t') r_t'`: the exponent counts
    /// steps from the end of the episode, so the last reward is undiscounted.
    FromEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub epochs: usize,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            epochs: 4,
            entropy_coef: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    pub max_steps: usize,
    /// Episodes collected per update.
    pub batch_episodes: usize,
    pub ppo: PpoConfig,
    pub returns: ReturnConvention,
    /// Subtract the batch-mean return from every return.
    pub baseline: bool,
    /// Also divide by the batch standard deviation.
    #[serde(default)]
    pub normalize_advantages: bool,
    pub rmsprop_rho: f64,
    pub rmsprop_eps: f64,
    pub freeze_alpha: bool,
    /// Stop once the trailing 50-episode average reaches this value.
    #[serde(default)]
    pub stop_at_average: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 1e-2,
            episodes: 1500,
            max_steps: 500,
            batch_episodes: 4,
            ppo: PpoConfig::default(),
            returns: ReturnConvention::Conventional,
            baseline: true,
            normalize_advantages: false,
            rmsprop_rho: 0.99,
            rmsprop_eps: 1e-8,
            freeze_alpha: false,
            stop_at_average: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.ppo.clip > 0.0 && self.ppo.clip < 1.0) {
            return bad(format!("PPO clip must lie in (0, 1), got {}", self.ppo.clip));
        }
        if self.batch_episodes == 0 {
            return bad("batch_episodes must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.rmsprop_rho) || !(self.rmsprop_eps > 0.0) {
            return bad("RMSProp needs rho in [0, 1) and eps > 0".into());
        }
        Ok(())
    }
}

/// What one agent saw and did at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub state: Vec<f64>,
    pub action: usize,
    /// Log-probability of `action` under the sampling-time policy.
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// One entry per agent; single-agent environments have exactly one.
    pub agents: Vec<AgentStep>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// Per-step returns, filled by [`compute_returns`].
    pub returns: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// Fills `traj.returns` in one backward pass.
pub fn compute_returns(traj: &mut Trajectory, gamma: f64, convention: ReturnConvention) {
    let n = traj.steps.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    // Weight of the current step under the from-end convention.
    let mut weight = 1.0;
    for t in (0..n).rev() {
        let r = traj.steps[t].reward;
        match convention {
            ReturnConvention::Conventional => acc = r + gamma * acc,
            ReturnConvention::FromEnd => {
                acc += weight * r;
                weight *= gamma;
            }
        }
        out[t] = acc;
    }
    traj.returns = out;
}

/// Plays one episode from `initial_obs`, sampling each agent's action from
/// the policy. Stops at a terminal state or after `max_steps` steps.
pub fn rollout(
    policy: &dyn Policy,
    env: &mut dyn Environment,
    initial_obs: Vec<Vec<f64>>,
    max_steps: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<Trajectory, TrainError> {
    let mut obs = initial_obs;
    let mut traj = Trajectory::default();
    for step in 0..max_steps {
        let mut agents = Vec::with_capacity(obs.len());
        for state in obs.iter() {
            let probs = policy.action_probs(state)?;
            let action = sample_index(&probs, rng);
            agents.push(AgentStep {
                state: state.clone(),
                action,
                log_prob: probs[action].ln(),
            });
        }
        let actions: Vec<usize> = agents.iter().map(|a| a.action).collect();
        let tr = env.step(&actions).map_err(|source| TrainError::Env { step, source })?;
        traj.steps.push(Step {
            agents,
            reward: tr.reward,
        });
        obs = tr.obs;
        if tr.done {
            break;
        }
    }
    Ok(traj)
}
