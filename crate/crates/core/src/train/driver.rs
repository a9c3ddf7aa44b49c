//! Episode loop, evaluation and learning-curve output.

use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{compute_returns, ppo_step, rollout, Actor, PolicyModel, RmsProp, TrainConfig, Trajectory};
use crate::envs::{EnvConfig, Environment};
use crate::error::TrainError;
use crate::rng::{stream, Stream};

/// One row of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub moving_avg_50: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub records: Vec<EpisodeRecord>,
    /// Set when `stop_at_average` ended the run before the episode budget.
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// Best trailing 50-episode average over full windows, or over every
    /// record when the run is shorter than one window.
    pub fn best_moving_average(&self) -> f64 {
        let skip = if self.records.len() >= 50 { 49 } else { 0 };
        self.records[skip..]
            .iter()
            .map(|r| r.moving_avg_50)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Trailing mean over the last `window` values (fewer at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Trains `model` with PPO on batches of `cfg.batch_episodes` episodes.
/// Episode seeds come from the run's environment stream and action sampling
/// from its sampling stream, so identical configs give identical runs.
pub fn train(model: &mut PolicyModel, env_cfg: &EnvConfig, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mut env = env_cfg.build()?;
    let policy_dim = model.as_policy().obs_dim();
    if policy_dim != env.obs_dim() || model.as_policy().n_actions() != env.n_actions() {
        return Err(TrainError::InvalidConfig(format!(
            "model expects {} features and {} actions; {} has {} and {}",
            policy_dim,
            model.as_policy().n_actions(),
            env.name(),
            env.obs_dim(),
            env.n_actions()
        )));
    }
    if let PolicyModel::Tree(t) = model {
        t.set_alpha_trainable(!cfg.freeze_alpha);
    }
    let mut env_rng = stream(cfg.seed, Stream::Env);
    let mut rng = stream(cfg.seed, Stream::Sampling);
    let mut opt = RmsProp::new(cfg.learning_rate, cfg.rmsprop_rho, cfg.rmsprop_eps);
    let mut totals: Vec<f64> = Vec::with_capacity(cfg.episodes);
    let mut stopped_early = false;

    'outer: while totals.len() < cfg.episodes {
        let batch_size = cfg.batch_episodes.min(cfg.episodes - totals.len());
        let mut batch: Vec<Trajectory> = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let obs = env.reset(env_rng.next_u64());
            let mut traj = rollout(model.as_policy(), env.as_mut(), obs, cfg.max_steps, &mut rng)?;
            compute_returns(&mut traj, cfg.gamma, cfg.returns);
            totals.push(traj.total_reward());
            batch.push(traj);
            if let Some(target) = cfg.stop_at_average {
                if totals.len() >= 50 && trailing_mean(&totals, 50) >= target {
                    stopped_early = true;
                    break 'outer;
                }
            }
        }
        ppo_step(model.as_policy_mut(), &batch, cfg, &mut opt)?;
    }

    let avg = moving_average(&totals, 50);
    let records = totals
        .iter()
        .zip(avg)
        .enumerate()
        .map(|(episode, (&cumulative_reward, moving_avg_50))| EpisodeRecord {
            episode,
            cumulative_reward,
            moving_avg_50,
        })
        .collect();
    Ok(TrainOutcome { records, stopped_early })
}

fn trailing_mean(v: &[f64], window: usize) -> f64 {
    let tail = &v[v.len().saturating_sub(window)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

/// Undiscounted episode returns of `actor` over `episodes` seeded episodes.
/// Multi-agent environments use the same actor for every agent.
pub fn evaluate(
    actor: &dyn Actor,
    env: &mut dyn Environment,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<EvalSummary, TrainError> {
    let mut seeds = stream(seed, Stream::Eval);
    let mut rng = stream(seed, Stream::Sampling);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(seeds.next_u64());
        let mut total = 0.0;
        for step in 0..max_steps {
            let actions = obs
                .iter()
                .map(|x| actor.act(x, &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            let tr = env.step(&actions).map_err(|source| TrainError::Env { step, source })?;
            total += tr.reward;
            obs = tr.obs;
            if tr.done {
                break;
            }
        }
        returns.push(total);
    }
    let n = returns.len().max(1) as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let std = (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
    Ok(EvalSummary { mean, std, returns })
}

/// Writes `episode,cumulative_reward,moving_avg_50` rows.
pub fn write_curve_csv(path: &Path, records: &[EpisodeRecord]) -> Result<(), TrainError> {
    // Explicit header so an empty run still gets one.
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["episode", "cumulative_reward", "moving_avg_50"])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{Arch, RandomActor};

    #[test]
    fn moving_average_window() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(moving_average(&v, 2), vec![1.0, 1.5, 2.5, 3.5]);
        assert_eq!(moving_average(&v, 10), vec![1.0, 1.5, 2.0, 2.5]);
        assert!(moving_average(&[], 3).is_empty());
    }

    #[test]
    fn short_training_run_is_deterministic() {
        let cfg = TrainConfig {
            episodes: 12,
            max_steps: 100,
            ..TrainConfig::default()
        };
        let env = EnvConfig::by_name("cartpole").unwrap();
        let run = || {
            let mut rng = stream(cfg.seed, Stream::PolicyInit);
            let mut m = Arch::Tree { leaves: 2 }.build(4, 2, &mut rng);
            let out = train(&mut m, &env, &cfg).unwrap();
            (m, out)
        };
        let (m1, o1) = run();
        let (m2, o2) = run();
        assert_eq!(m1, m2);
        assert_eq!(o1, o2);
        assert_eq!(o1.records.len(), 12);
        assert!(o1.records.iter().all(|r| r.cumulative_reward >= 1.0));
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let mut rng = stream(0, Stream::PolicyInit);
        let mut m = Arch::Tree { leaves: 2 }.build(3, 2, &mut rng);
        let env = EnvConfig::by_name("cartpole").unwrap();
        assert!(matches!(
            train(&mut m, &env, &TrainConfig::default()),
            Err(TrainError::InvalidConfig(_))
        ));
    }

    #[test]
    fn curve_csv_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let recs = vec![EpisodeRecord {
            episode: 0,
            cumulative_reward: 12.0,
            moving_avg_50: 12.0,
        }];
        write_curve_csv(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "episode,cumulative_reward,moving_avg_50\n0,12.0,12.0\n");
    }

    #[test]
    fn random_cartpole_is_short() {
        let mut env = crate::envs::make_env("cartpole").unwrap();
        let s = evaluate(&RandomActor { n_actions: 2 }, env.as_mut(), 50, 500, 3).unwrap();
        assert!(s.mean > 10.0 && s.mean < 40.0, "{}", s.mean);
        assert_eq!(s.returns.len(), 50);
    }
}
