//! Online Q-learning on Q-interpretation trees.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{moving_average, Direction, EpisodeRecord, Policy, RmsProp};
use crate::envs::EnvConfig;
use crate::error::{ModelError, TrainError};
use crate::rng::{stream, Stream};
use crate::tree::{argmax, Interpretation, SoftTree};

/// One observed transition. `next_state` is `None` when the episode ended
/// on this step, which drops the bootstrap term.
#[derive(Debug, Clone, PartialEq)]
pub struct QTransition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Option<Vec<f64>>,
}

fn require_q(tree: &SoftTree) -> Result<(), ModelError> {
    if tree.interpretation() == Interpretation::Q {
        Ok(())
    } else {
        Err(ModelError::InvalidInterpretation {
            expected: Interpretation::Q,
            actual: tree.interpretation(),
        })
    }
}

/// The action with the largest Q-value; ties go to the lowest index.
pub fn greedy_action(tree: &SoftTree, x: &[f64]) -> Result<usize, ModelError> {
    require_q(tree)?;
    let q = tree.eval_soft(x)?;
    Ok(argmax(&q).unwrap_or(0))
}

/// TD error and `td * grad Q(s, a)` as a flat vector in parameter order.
pub fn q_delta(tree: &SoftTree, tr: &QTransition, gamma: f64) -> Result<(f64, Vec<f64>), TrainError> {
    require_q(tree)?;
    let q = tree.eval_soft(&tr.state)?;
    if tr.action >= q.len() {
        return Err(TrainError::InvalidConfig(format!(
            "action {} out of range for {} actions",
            tr.action,
            q.len()
        )));
    }
    let mut target = tr.reward;
    if let Some(next) = &tr.next_state {
        let q_next = tree.eval_soft(next)?;
        target += gamma * q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let td = target - q[tr.action];
    let mut upstream = vec![0.0; q.len()];
    upstream[tr.action] = td;
    Ok((td, tree.backward(&tr.state, &upstream)?.flatten()))
}

/// One Q-learning step. Returns the TD error before the update.
pub fn q_step(tree: &mut SoftTree, tr: &QTransition, gamma: f64, opt: &mut RmsProp) -> Result<f64, TrainError> {
    let (td, g) = q_delta(tree, tr, gamma)?;
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(TrainError::NonFinite(format!("gradient entry {i}")));
    }
    let mut params = tree.params();
    let frozen = Policy::frozen_mask(tree);
    // The update follows td * grad Q, which is ascent along that vector.
    opt.apply(&mut params, &g, &frozen, Direction::Ascent)?;
    tree.set_params(&params)?;
    Ok(td)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTrainConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    pub max_steps: usize,
    /// Exploration rate at the first episode, annealed linearly to `epsilon_end`.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub rmsprop_rho: f64,
    pub rmsprop_eps: f64,
    pub seed: u64,
}

impl Default for QTrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 1e-2,
            episodes: 500,
            max_steps: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            rmsprop_rho: 0.99,
            rmsprop_eps: 1e-8,
            seed: 0,
        }
    }
}

impl QTrainConfig {
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_end;
        }
        let frac = (episode as f64 / (self.episodes - 1) as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

fn epsilon_greedy(tree: &SoftTree, x: &[f64], eps: f64, rng: &mut dyn RngCore) -> Result<usize, ModelError> {
    if rng.random::<f64>() < eps {
        Ok(rng.random_range(0..tree.n_actions()))
    } else {
        greedy_action(tree, x)
    }
}

/// Epsilon-greedy online Q-learning with one update per agent per step.
pub fn train_q(tree: &mut SoftTree, env_cfg: &EnvConfig, cfg: &QTrainConfig) -> Result<Vec<EpisodeRecord>, TrainError> {
    require_q(tree)?;
    if !(0.0..=1.0).contains(&cfg.gamma) || !(cfg.learning_rate > 0.0) {
        return Err(TrainError::InvalidConfig(
            "gamma must lie in [0, 1] and the learning rate must be positive".into(),
        ));
    }
    let mut env = env_cfg.build()?;
    let mut env_rng = stream(cfg.seed, Stream::Env);
    let mut rng = stream(cfg.seed, Stream::Sampling);
    let mut opt = RmsProp::new(cfg.learning_rate, cfg.rmsprop_rho, cfg.rmsprop_eps);
    let mut totals = Vec::with_capacity(cfg.episodes);
    for ep in 0..cfg.episodes {
        let eps = cfg.epsilon(ep);
        let mut obs = env.reset(env_rng.next_u64());
        let mut total = 0.0;
        for step in 0..cfg.max_steps {
            let actions = obs
                .iter()
                .map(|x| epsilon_greedy(tree, x, eps, &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            let tr = env.step(&actions).map_err(|source| TrainError::Env { step, source })?;
            total += tr.reward;
            for (i, x) in obs.iter().enumerate() {
                let t = QTransition {
                    state: x.clone(),
                    action: actions[i],
                    reward: tr.reward,
                    next_state: (!tr.done).then(|| tr.obs[i].clone()),
                };
                q_step(tree, &t, cfg.gamma, &mut opt)?;
            }
            obs = tr.obs;
            if tr.done {
                break;
            }
        }
        totals.push(total);
    }
    let avg = moving_average(&totals, 50);
    Ok(totals
        .iter()
        .zip(avg)
        .enumerate()
        .map(|(episode, (&cumulative_reward, moving_avg_50))| EpisodeRecord {
            episode,
            cumulative_reward,
            moving_avg_50,
        })
        .collect())
}
