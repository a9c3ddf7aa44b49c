//! Classic cart-pole balancing with the usual Gym constants and explicit
//! Euler integration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_actions, Environment, Transition};
use crate::error::EnvError;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn is_terminal(&self) -> bool {
        self.x.abs() > X_THRESHOLD || self.theta.abs() > THETA_THRESHOLD
    }

    pub fn mirrored(self) -> Self {
        Self {
            x: -self.x,
            x_dot: -self.x_dot,
            theta: -self.theta,
            theta_dot: -self.theta_dot,
        }
    }
}

/// One Euler step. Action 0 pushes left, 1 pushes right. Returns
/// `(next state, reward, terminal)`.
pub fn cartpole_step(state: CartPoleState, action: usize) -> Result<(CartPoleState, f64, bool), EnvError> {
    if action > 1 {
        return Err(EnvError::InvalidAction { action, n_actions: 2 });
    }
    if state.is_terminal() {
        return Err(EnvError::StepFromTerminal {
            state: format!("{state:?}"),
        });
    }
    let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
    let (sin, cos) = state.theta.sin_cos();
    let temp = (force + POLE_MASS_LENGTH * state.theta_dot * state.theta_dot * sin) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
    let next = CartPoleState {
        x: state.x + TAU * state.x_dot,
        x_dot: state.x_dot + TAU * x_acc,
        theta: state.theta + TAU * state.theta_dot,
        theta_dot: state.theta_dot + TAU * theta_acc,
    };
    Ok((next, 1.0, next.is_terminal()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartPoleConfig {
    /// Episodes are cut off after this many steps.
    pub max_steps: usize,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        Self { max_steps: 500 }
    }
}

pub struct CartPole {
    config: CartPoleConfig,
    state: CartPoleState,
    steps: usize,
    done: bool,
}

impl CartPole {
    pub fn new(config: CartPoleConfig) -> Self {
        Self {
            config,
            state: CartPoleState {
                x: 0.0,
                x_dot: 0.0,
                theta: 0.0,
                theta_dot: 0.0,
            },
            steps: 0,
            done: true,
        }
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    pub fn reset_to(&mut self, state: CartPoleState) -> Vec<Vec<f64>> {
        self.state = state;
        self.steps = 0;
        self.done = false;
        vec![state.to_vec()]
    }
}

impl Environment for CartPole {
    fn name(&self) -> &'static str {
        "cartpole"
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.random_range(-0.05..0.05);
        let state = CartPoleState {
            x: draw(),
            x_dot: draw(),
            theta: draw(),
            theta_dot: draw(),
        };
        self.reset_to(state)
    }

    fn step(&mut self, actions: &[usize]) -> Result<Transition, EnvError> {
        check_actions(actions, 1, 2)?;
        if self.done {
            return Err(EnvError::StepFromTerminal {
                state: format!("{:?}", self.state),
            });
        }
        let (next, reward, terminal) = cartpole_step(self.state, actions[0])?;
        self.state = next;
        self.steps += 1;
        self.done = terminal || self.steps >= self.config.max_steps;
        Ok(Transition {
            obs: vec![next.to_vec()],
            reward,
            done: self.done,
        })
    }

    fn feature_names(&self) -> Vec<String> {
        ["x", "x_dot", "theta", "theta_dot"].map(String::from).to_vec()
    }

    fn action_names(&self) -> Vec<String> {
        vec!["left".into(), "right".into()]
    }
}
