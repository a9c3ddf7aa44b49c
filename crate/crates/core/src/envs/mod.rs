//! Simulated environments.
//!
//! All environments share the [`Environment`] trait. Environments with several
//! agents (the wildfire tracker) take one action per agent and hand each agent
//! its own observation; the reward is shared.

pub mod cartpole;
pub mod chain;
pub mod wildfire;

use serde::{Deserialize, Serialize};

pub use cartpole::{cartpole_step, CartPole, CartPoleConfig, CartPoleState};
pub use chain::{chain_step, optimal_policy, ChainEnv, ChainMdpConfig, StartState, TerminalReward};
pub use wildfire::{wildfire_reward, FireSpec, Wildfire, WildfireScenario};

use crate::error::EnvError;

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// One observation per agent.
    pub obs: Vec<Vec<f64>>,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn n_agents(&self) -> usize {
        1
    }
    /// Starts a new episode. All randomness of the episode derives from `seed`.
    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>>;
    fn step(&mut self, actions: &[usize]) -> Result<Transition, EnvError>;
    fn feature_names(&self) -> Vec<String>;
    fn action_names(&self) -> Vec<String>;
}

pub(crate) fn check_actions(actions: &[usize], n_agents: usize, n_actions: usize) -> Result<(), EnvError> {
    if actions.len() != n_agents {
        return Err(EnvError::AgentCount {
            expected: n_agents,
            actual: actions.len(),
        });
    }
    if let Some(&action) = actions.iter().find(|&&a| a >= n_actions) {
        return Err(EnvError::InvalidAction { action, n_actions });
    }
    Ok(())
}

/// Environment selection plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum EnvConfig {
    Chain(ChainMdpConfig),
    #[serde(rename = "cartpole")]
    CartPole(CartPoleConfig),
    Wildfire(WildfireScenario),
}

impl EnvConfig {
    /// Default configuration for a registered environment name.
    pub fn by_name(name: &str) -> Result<Self, EnvError> {
        match name {
            "chain" => Ok(EnvConfig::Chain(ChainMdpConfig::default())),
            "cartpole" => Ok(EnvConfig::CartPole(CartPoleConfig::default())),
            "wildfire" => Ok(EnvConfig::Wildfire(WildfireScenario::default())),
            other => Err(EnvError::UnknownEnv(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Chain(_) => "chain",
            EnvConfig::CartPole(_) => "cartpole",
            EnvConfig::Wildfire(_) => "wildfire",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>, EnvError> {
        Ok(match self {
            EnvConfig::Chain(c) => Box::new(ChainEnv::new(c.clone())?),
            EnvConfig::CartPole(c) => Box::new(CartPole::new(c.clone())),
            EnvConfig::Wildfire(s) => Box::new(Wildfire::new(s.clone())?),
        })
    }
}

/// Builds an environment from its registry name with default parameters.
pub fn make_env(name: &str) -> Result<Box<dyn Environment>, EnvError> {
    EnvConfig::by_name(name)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_three_envs() {
        for name in ["chain", "cartpole", "wildfire"] {
            let env = make_env(name).unwrap();
            assert_eq!(env.name(), name);
            assert_eq!(env.feature_names().len(), env.obs_dim());
            assert_eq!(env.action_names().len(), env.n_actions());
        }
        assert!(matches!(make_env("lander"), Err(EnvError::UnknownEnv(_))));
    }

    #[test]
    fn config_json_is_tagged_by_name() {
        let cfg = EnvConfig::by_name("cartpole").unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"name\":\"cartpole\""));
        assert_eq!(serde_json::from_str::<EnvConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn reset_with_same_seed_gives_same_trajectory() {
        for name in ["chain", "cartpole", "wildfire"] {
            let mut a = make_env(name).unwrap();
            let mut b = make_env(name).unwrap();
            assert_eq!(a.reset(99), b.reset(99));
            let n = a.n_agents();
            let k = a.n_actions();
            for t in 0..40 {
                let acts: Vec<usize> = (0..n).map(|i| (t * 7 + i * 3) % k).collect();
                let (ra, rb) = (a.step(&acts), b.step(&acts));
                match (ra, rb) {
                    (Ok(x), Ok(y)) => {
                        assert_eq!(x, y);
                        if x.done {
                            break;
                        }
                    }
                    (Err(_), Err(_)) => break,
                    _ => panic!("diverged"),
                }
            }
        }
    }
}
