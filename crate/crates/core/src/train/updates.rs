//! Policy-gradient and PPO updates.

use super::{Direction, Policy, PpoConfig, RmsProp, TrainConfig, Trajectory};
use crate::error::TrainError;

/// Per-step advantages for every trajectory: the stored returns, optionally
/// minus the batch mean and divided by the batch standard deviation.
fn advantages(trajs: &[Trajectory], baseline: bool, normalize: bool) -> Result<Vec<Vec<f64>>, TrainError> {
    for (i, t) in trajs.iter().enumerate() {
        if t.returns.len() != t.steps.len() {
            return Err(TrainError::InvalidConfig(format!(
                "trajectory {i} has no returns; call compute_returns first"
            )));
        }
    }
    let mut adv: Vec<Vec<f64>> = trajs.iter().map(|t| t.returns.clone()).collect();
    let n: usize = adv.iter().map(Vec::len).sum();
    if n == 0 {
        return Ok(adv);
    }
    if baseline {
        let mean = adv.iter().flatten().sum::<f64>() / n as f64;
        adv.iter_mut().flatten().for_each(|a| *a -= mean);
    }
    if normalize {
        let mean = adv.iter().flatten().sum::<f64>() / n as f64;
        let var = adv.iter().flatten().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std > 1e-12 {
            adv.iter_mut().flatten().for_each(|a| *a /= std);
        }
    }
    Ok(adv)
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, v) in acc.iter_mut().zip(g) {
        *a += v;
    }
}

/// `sum_t A_t grad log pi(a_t | s_t)` over all trajectories and agents,
/// using the policy's current parameters. Each trajectory's contribution is
/// summed separately and then added to the total.
pub fn pg_gradient(policy: &dyn Policy, trajs: &[Trajectory], baseline: bool) -> Result<Vec<f64>, TrainError> {
    let adv = advantages(trajs, baseline, false)?;
    let n_params = policy.params().len();
    let k = policy.n_actions();
    let mut total = vec![0.0; n_params];
    for (traj, adv) in trajs.iter().zip(&adv) {
        let mut local = vec![0.0; n_params];
        for (step, &a_t) in traj.steps.iter().zip(adv) {
            if a_t == 0.0 {
                continue;
            }
            for agent in &step.agents {
                let probs = policy.action_probs(&agent.state)?;
                let mut upstream = vec![0.0; k];
                // grad log pi = grad pi / pi
                upstream[agent.action] = a_t / probs[agent.action];
                add_into(&mut local, &policy.grad_probs(&agent.state, &upstream)?);
            }
        }
        add_into(&mut total, &local);
    }
    Ok(total)
}

fn apply(policy: &mut dyn Policy, grad: &[f64], opt: &mut RmsProp, direction: Direction) -> Result<(), TrainError> {
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFinite(format!("gradient entry {i}")));
    }
    let mut params = policy.params();
    let frozen = policy.frozen_mask();
    opt.apply(&mut params, grad, &frozen, direction)?;
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(TrainError::NonFinite(format!("parameter {i} after update")));
    }
    policy.set_params(&params)?;
    Ok(())
}

/// One vanilla policy-gradient ascent step. Empty batches change nothing.
pub fn pg_step(
    policy: &mut dyn Policy,
    trajs: &[Trajectory],
    baseline: bool,
    opt: &mut RmsProp,
) -> Result<(), TrainError> {
    if trajs.iter().all(Trajectory::is_empty) {
        return Ok(());
    }
    let g = pg_gradient(policy, trajs, baseline)?;
    apply(policy, &g, opt, Direction::Ascent)
}

/// Gradient of the clipped surrogate plus entropy bonus, averaged over all
/// samples, at the policy's current parameters.
pub fn ppo_gradient(
    policy: &dyn Policy,
    trajs: &[Trajectory],
    adv: &[Vec<f64>],
    ppo: &PpoConfig,
) -> Result<Vec<f64>, TrainError> {
    let n_params = policy.params().len();
    let k = policy.n_actions();
    let mut total = vec![0.0; n_params];
    let mut count = 0usize;
    for (traj, adv) in trajs.iter().zip(adv) {
        for (step, &a_t) in traj.steps.iter().zip(adv) {
            for agent in &step.agents {
                count += 1;
                let probs = policy.action_probs(&agent.state)?;
                let old = agent.log_prob.exp();
                let ratio = probs[agent.action] / old;
                let clipped = (a_t > 0.0 && ratio > 1.0 + ppo.clip) || (a_t < 0.0 && ratio < 1.0 - ppo.clip);
                let mut upstream = vec![0.0; k];
                if ppo.entropy_coef != 0.0 {
                    for (u, p) in upstream.iter_mut().zip(&probs) {
                        *u = -ppo.entropy_coef * (p.max(f64::MIN_POSITIVE).ln() + 1.0);
                    }
                }
                if !clipped && a_t != 0.0 {
                    upstream[agent.action] += a_t / old;
                }
                if upstream.iter().all(|u| *u == 0.0) {
                    continue;
                }
                add_into(&mut total, &policy.grad_probs(&agent.state, &upstream)?);
            }
        }
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        total.iter_mut().for_each(|g| *g *= inv);
    }
    Ok(total)
}

/// PPO-clip update: `cfg.ppo.epochs` ascent steps on the clipped surrogate
/// with ratios against the sampling-time log-probabilities.
pub fn ppo_step(
    policy: &mut dyn Policy,
    trajs: &[Trajectory],
    cfg: &TrainConfig,
    opt: &mut RmsProp,
) -> Result<(), TrainError> {
    if trajs.iter().all(Trajectory::is_empty) {
        return Ok(());
    }
    let adv = advantages(trajs, cfg.baseline, cfg.normalize_advantages)?;
    for _ in 0..cfg.ppo.epochs {
        let g = ppo_gradient(policy, trajs, &adv, &cfg.ppo)?;
        apply(policy, &g, opt, Direction::Ascent)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{compute_returns, rollout, AgentStep, ReturnConvention, Step};
    use crate::tree::{Interpretation, SoftTree};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_batch(seed: u64, tree: &SoftTree, episodes: usize) -> Vec<Trajectory> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = crate::envs::make_env("cartpole").unwrap();
        (0..episodes)
            .map(|_| {
                let obs = env.reset(rng.random());
                let mut t = rollout(tree, env.as_mut(), obs, 60, &mut rng).unwrap();
                compute_returns(&mut t, 0.99, ReturnConvention::Conventional);
                t
            })
            .collect()
    }

    fn tree(seed: u64) -> SoftTree {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SoftTree::balanced(2, 4, 2, Interpretation::Policy, &mut rng)
    }

    #[test]
    fn zero_returns_leave_parameters_unchanged() {
        let mut t = tree(1);
        let mut batch = sample_batch(1, &t, 2);
        for traj in &mut batch {
            traj.returns.iter_mut().for_each(|r| *r = 0.0);
        }
        let before = t.params();
        let mut opt = RmsProp::new(0.1, 0.99, 1e-8);
        pg_step(&mut t, &batch, false, &mut opt).unwrap();
        assert_eq!(t.params(), before);
    }

    #[test]
    fn duplicate_trajectories_double_the_gradient() {
        let t = tree(2);
        let batch = sample_batch(2, &t, 1);
        let once = pg_gradient(&t, &batch, false).unwrap();
        let twice = pg_gradient(&t, &[batch[0].clone(), batch[0].clone()], false).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn empty_batch_is_a_no_op() {
        let mut t = tree(3);
        let before = t.params();
        let mut opt = RmsProp::new(0.1, 0.99, 1e-8);
        pg_step(&mut t, &[], true, &mut opt).unwrap();
        ppo_step(&mut t, &[Trajectory::default()], &TrainConfig::default(), &mut opt).unwrap();
        assert_eq!(t.params(), before);
    }

    #[test]
    fn ppo_without_clipping_points_like_pg() {
        let t = tree(4);
        let batch = sample_batch(4, &t, 3);
        let ppo = PpoConfig {
            clip: f64::INFINITY,
            epochs: 1,
            entropy_coef: 0.0,
        };
        let adv = advantages(&batch, true, false).unwrap();
        let g_ppo = ppo_gradient(&t, &batch, &adv, &ppo).unwrap();
        let g_pg = pg_gradient(&t, &batch, true).unwrap();
        let dot: f64 = g_ppo.iter().zip(&g_pg).map(|(a, b)| a * b).sum();
        let na = g_ppo.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb = g_pg.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((dot / (na * nb) - 1.0).abs() < 1e-12);
        let n: usize = batch.iter().map(Trajectory::len).sum();
        for (a, b) in g_ppo.iter().zip(&g_pg) {
            assert!((a * n as f64 - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn clipped_sample_contributes_nothing() {
        let t = SoftTree::single_node(1.0, 1.0, 0.0, vec![0.0, 0.0], vec![0.0, 0.0], Interpretation::Policy).unwrap();
        // Current probability 0.5, sampling-time probability 0.25: ratio 2.
        let traj = Trajectory {
            steps: vec![Step {
                agents: vec![AgentStep {
                    state: vec![0.3],
                    action: 0,
                    log_prob: 0.25f64.ln(),
                }],
                reward: 1.0,
            }],
            returns: vec![1.0],
        };
        let ppo = PpoConfig {
            clip: 0.2,
            epochs: 1,
            entropy_coef: 0.0,
        };
        let g = ppo_gradient(&t, &[traj.clone()], &[vec![1.0]], &ppo).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        // The same sample with a negative advantage is not clipped.
        let g = ppo_gradient(&t, &[traj], &[vec![-1.0]], &ppo).unwrap();
        assert!(g.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn log_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut worst: f64 = 0.0;
        for case in 0..200 {
            let depth = 1 + case % 3;
            let t = SoftTree::balanced(depth, 3, 3, Interpretation::Policy, &mut rng);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = rng.random_range(0..3);
            let probs = t.eval_soft(&x).unwrap();
            let mut u = vec![0.0; 3];
            u[a] = 1.0 / probs[a];
            let g = Policy::grad_probs(&t, &x, &u).unwrap();
            let base = t.params();
            let mut tt = t.clone();
            let h = 1e-5;
            for i in 0..base.len() {
                let mut p = base.clone();
                p[i] += h;
                tt.set_params(&p).unwrap();
                let fp = tt.eval_soft(&x).unwrap()[a].ln();
                p[i] = base[i] - h;
                tt.set_params(&p).unwrap();
                let fm = tt.eval_soft(&x).unwrap()[a].ln();
                let num = (fp - fm) / (2.0 * h);
                let err = (g[i] - num).abs() / g[i].abs().max(num.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn pg_moves_threshold_toward_the_middle() {
        use crate::envs::{ChainEnv, ChainMdpConfig, Environment};
        let mut hits = 0;
        for seed in 0..5u64 {
            let logits = |p: [f64; 2]| p.iter().map(|v| v.ln()).collect::<Vec<f64>>();
            let mut t = SoftTree::single_node(
                10.0,
                1.0,
                2.2,
                logits([0.01, 0.99]),
                logits([0.99, 0.01]),
                Interpretation::Policy,
            )
            .unwrap();
            t.set_alpha_trainable(false);
            let cfg = ChainMdpConfig::default();
            let mut env = ChainEnv::new(cfg.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut opt = RmsProp::new(1e-2, 0.99, 1e-8);
            for _ in 0..200 {
                let batch: Vec<Trajectory> = (0..16)
                    .map(|_| {
                        let obs = env.reset(rng.random());
                        let mut tr = rollout(&t, &mut env, obs, 4, &mut rng).unwrap();
                        compute_returns(&mut tr, cfg.gamma, ReturnConvention::Conventional);
                        tr
                    })
                    .collect();
                pg_step(&mut t, &batch, true, &mut opt).unwrap();
            }
            let phi = t.nodes()[0].phi / t.nodes()[0].beta[0];
            if (2.3..=2.7).contains(&phi) {
                hits += 1;
            }
        }
        assert!(hits >= 4, "{hits}/5 seeds ended in [2.3, 2.7]");
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut t = tree(5);
        let mut batch = sample_batch(5, &t, 1);
        batch[0].returns[0] = f64::NAN;
        let before = t.params();
        let mut opt = RmsProp::new(0.1, 0.99, 1e-8);
        assert!(matches!(
            pg_step(&mut t, &batch, false, &mut opt),
            Err(TrainError::NonFinite(_))
        ));
        assert_eq!(t.params(), before);
    }
}
