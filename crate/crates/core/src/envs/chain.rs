//! The n-state chain MDP.
//!
//! States are numbered `1..=n`; `1` and `n` are terminal. Action `0` (a1)
//! moves toward higher indices, action `1` (a2) toward lower ones. The two
//! states `i*` and `i*+1` pay `r_plus`, every other non-terminal state pays 0.
//! Rewards belong to the state the agent is in when it acts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_actions, Environment, Transition};
use crate::error::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartState {
    Fixed(usize),
    /// Uniform over the two reward states `i*` and `i*+1`.
    Uniform,
}

/// How terminal states are rewarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReward {
    /// The episode ends on entering a terminal state, which pays nothing.
    Zero,
    /// The terminal state is visited for one final step that pays `r_minus`.
    Penalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMdpConfig {
    pub n: usize,
    pub i_star: usize,
    /// Probability of moving in the intended direction.
    pub p: f64,
    pub gamma: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub start: StartState,
    pub terminal: TerminalReward,
}

impl Default for ChainMdpConfig {
    fn default() -> Self {
        Self {
            n: 4,
            i_star: 2,
            p: 1.0,
            gamma: 0.95,
            r_plus: 1.0,
            r_minus: -1.0,
            start: StartState::Uniform,
            terminal: TerminalReward::Penalty,
        }
    }
}

impl ChainMdpConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if self.n < 4 {
            return bad(format!("chain needs n >= 4, got {}", self.n));
        }
        if !(1 < self.i_star && self.i_star + 1 < self.n) {
            return bad(format!(
                "i* must satisfy 1 < i* < n-1, got i*={} n={}",
                self.i_star, self.n
            ));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if let StartState::Fixed(s) = self.start {
            if s <= 1 || s >= self.n {
                return bad(format!("start state {s} is not an interior state"));
            }
        }
        Ok(())
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        s <= 1 || s >= self.n
    }

    /// Reward of a non-terminal state.
    pub fn state_reward(&self, s: usize) -> f64 {
        if s == self.i_star || s == self.i_star + 1 {
            self.r_plus
        } else {
            0.0
        }
    }
}

/// One transition from the non-terminal state `s`. Returns `(s', r, terminal)`.
///
/// With probability `p` the move goes in the intended direction; otherwise the
/// next state is uniform over the `n - 1` states other than the intended one.
pub fn chain_step<R: Rng + ?Sized>(
    config: &ChainMdpConfig,
    s: usize,
    a: usize,
    rng: &mut R,
) -> Result<(usize, f64, bool), EnvError> {
    if config.is_terminal(s) {
        return Err(EnvError::StepFromTerminal { state: format!("s{s}") });
    }
    if a > 1 {
        return Err(EnvError::InvalidAction {
            action: a,
            n_actions: 2,
        });
    }
    let intended = if a == 0 { s + 1 } else { s - 1 };
    let next = if config.p >= 1.0 || rng.random::<f64>() < config.p {
        intended
    } else {
        let k = rng.random_range(1..config.n);
        if k >= intended {
            k + 1
        } else {
            k
        }
    };
    Ok((next, config.state_reward(s), config.is_terminal(next)))
}

/// The optimal deterministic-transition policy as per-state action
/// probabilities `[P(a1), P(a2)]`, indexed by `s - 1`. Terminal states are
/// uniform.
pub fn optimal_policy(config: &ChainMdpConfig) -> Vec<[f64; 2]> {
    (1..=config.n)
        .map(|s| {
            if config.is_terminal(s) {
                [0.5, 0.5]
            } else if s <= config.i_star {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        })
        .collect()
}

pub struct ChainEnv {
    config: ChainMdpConfig,
    state: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl ChainEnv {
    pub fn new(config: ChainMdpConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self {
            state: config.i_star,
            config,
            done: true,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn config(&self) -> &ChainMdpConfig {
        &self.config
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Starts an episode in a chosen state.
    pub fn reset_to(&mut self, s: usize, seed: u64) -> Vec<Vec<f64>> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = s;
        self.done = false;
        vec![vec![s as f64]]
    }
}

impl Environment for ChainEnv {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = match self.config.start {
            StartState::Fixed(s) => s,
            StartState::Uniform => self.config.i_star + self.rng.random_range(0..2),
        };
        self.done = false;
        vec![vec![self.state as f64]]
    }

    fn step(&mut self, actions: &[usize]) -> Result<Transition, EnvError> {
        check_actions(actions, 1, 2)?;
        if self.done {
            return Err(EnvError::StepFromTerminal {
                state: format!("s{}", self.state),
            });
        }
        let (reward, done) = if self.config.is_terminal(self.state) {
            // Only reachable under the penalty convention.
            (self.config.r_minus, true)
        } else {
            let (next, r, terminal) = chain_step(&self.config, self.state, actions[0], &mut self.rng)?;
            self.state = next;
            (r, terminal && self.config.terminal == TerminalReward::Zero)
        };
        self.done = done;
        Ok(Transition {
            obs: vec![vec![self.state as f64]],
            reward,
            done,
        })
    }

    fn feature_names(&self) -> Vec<String> {
        vec!["state".into()]
    }

    fn action_names(&self) -> Vec<String> {
        vec!["a1".into(), "a2".into()]
    }
}
