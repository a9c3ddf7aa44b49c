//! Stochastic policies with flat parameter vectors.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::MlpPolicy;
use crate::crisp::CrispPolicy;
use crate::error::ModelError;
use crate::tree::{Interpretation, SoftTree};

/// A differentiable policy: action probabilities and their gradients with
/// respect to a flat parameter vector.
pub trait Policy: Send + Sync {
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn action_probs(&self, x: &[f64]) -> Result<Vec<f64>, ModelError>;
    /// Gradient of `<upstream, action_probs(x)>` over [`Policy::params`].
    fn grad_probs(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>, ModelError>;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]) -> Result<(), ModelError>;
    /// Parameters that updates must leave alone.
    fn frozen_mask(&self) -> Vec<bool> {
        vec![false; self.params().len()]
    }
}

fn require_policy(tree: &SoftTree) -> Result<(), ModelError> {
    if tree.interpretation() == Interpretation::Policy {
        Ok(())
    } else {
        Err(ModelError::InvalidInterpretation {
            expected: Interpretation::Policy,
            actual: tree.interpretation(),
        })
    }
}

impl Policy for SoftTree {
    fn obs_dim(&self) -> usize {
        self.d()
    }

    fn n_actions(&self) -> usize {
        SoftTree::n_actions(self)
    }

    fn action_probs(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        require_policy(self)?;
        self.eval_soft(x)
    }

    fn grad_probs(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>, ModelError> {
        require_policy(self)?;
        Ok(self.backward(x, upstream)?.flatten())
    }

    fn params(&self) -> Vec<f64> {
        SoftTree::params(self)
    }

    fn set_params(&mut self, p: &[f64]) -> Result<(), ModelError> {
        SoftTree::set_params(self, p)
    }

    fn frozen_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.param_count()];
        if !self.alpha_trainable() {
            for i in self.alpha_indices() {
                mask[i] = true;
            }
        }
        mask
    }
}

/// Model architectures selectable from the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Arch {
    /// Balanced tree with this many leaves (a power of two).
    Tree { leaves: usize },
    /// Rule list with this many rules.
    List { rules: usize },
    /// MLP with `hidden` hidden layers of `width` units.
    Mlp { hidden: usize, width: usize },
}

pub const DEFAULT_MLP_WIDTH: usize = 16;

impl FromStr for Arch {
    type Err = String;

    /// `tree:L`, `list:R`, `mlp:H` or `mlp:HxW`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, size) = s
            .split_once(':')
            .ok_or_else(|| format!("architecture {s:?} must look like tree:L, list:R or mlp:H"))?;
        let num = |v: &str| v.parse::<usize>().map_err(|_| format!("bad size {v:?} in {s:?}"));
        match kind {
            "tree" => {
                let leaves = num(size)?;
                if leaves < 2 || !leaves.is_power_of_two() {
                    return Err(format!("tree leaf count must be a power of two >= 2, got {leaves}"));
                }
                Ok(Arch::Tree { leaves })
            }
            "list" => {
                let rules = num(size)?;
                if rules == 0 {
                    return Err("a rule list needs at least one rule".into());
                }
                Ok(Arch::List { rules })
            }
            "mlp" => {
                let (h, w) = match size.split_once('x') {
                    Some((h, w)) => (num(h)?, num(w)?),
                    None => (num(size)?, DEFAULT_MLP_WIDTH),
                };
                if h > 2 || w == 0 {
                    return Err(format!("mlp supports 0-2 hidden layers of positive width, got {size}"));
                }
                Ok(Arch::Mlp { hidden: h, width: w })
            }
            other => Err(format!("unknown architecture kind {other:?}")),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arch::Tree { leaves } => write!(f, "tree:{leaves}"),
            Arch::List { rules } => write!(f, "list:{rules}"),
            Arch::Mlp { hidden, width } => write!(f, "mlp:{hidden}x{width}"),
        }
    }
}

impl Arch {
    pub fn build<R: Rng + ?Sized>(&self, d: usize, n_actions: usize, rng: &mut R) -> PolicyModel {
        match *self {
            Arch::Tree { leaves } => PolicyModel::Tree(SoftTree::balanced(
                leaves.trailing_zeros() as usize,
                d,
                n_actions,
                Interpretation::Policy,
                rng,
            )),
            Arch::List { rules } => {
                PolicyModel::Tree(SoftTree::rule_list(rules, d, n_actions, Interpretation::Policy, rng))
            }
            Arch::Mlp { hidden, width } => PolicyModel::Mlp(MlpPolicy::random(d, &vec![width; hidden], n_actions, rng)),
        }
    }
}

/// Any trainable policy the toolkit can save and load.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyModel {
    Tree(SoftTree),
    Mlp(MlpPolicy),
}

impl PolicyModel {
    pub fn as_policy(&self) -> &dyn Policy {
        match self {
            PolicyModel::Tree(t) => t,
            PolicyModel::Mlp(m) => m,
        }
    }

    pub fn as_policy_mut(&mut self) -> &mut dyn Policy {
        match self {
            PolicyModel::Tree(t) => t,
            PolicyModel::Mlp(m) => m,
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            PolicyModel::Tree(t) => t.to_json(),
            PolicyModel::Mlp(m) => m.to_json(),
        }
    }

    /// Reads either a tree document or an MLP document.
    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        if value.get("layers").is_some() {
            Ok(PolicyModel::Mlp(MlpPolicy::from_json(s)?))
        } else {
            Ok(PolicyModel::Tree(SoftTree::from_json(s)?))
        }
    }
}

/// How an evaluated policy picks actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSelection {
    Sample,
    Greedy,
}

/// Anything that maps an observation to an action.
pub trait Actor {
    fn act(&self, x: &[f64], rng: &mut dyn rand::RngCore) -> Result<usize, ModelError>;
}

/// A stochastic policy used either by sampling or by taking its most likely
/// action.
pub struct PolicyActor<'a> {
    pub policy: &'a dyn Policy,
    pub selection: ActionSelection,
}

impl Actor for PolicyActor<'_> {
    fn act(&self, x: &[f64], rng: &mut dyn rand::RngCore) -> Result<usize, ModelError> {
        let probs = self.policy.action_probs(x)?;
        Ok(match self.selection {
            ActionSelection::Sample => sample_index(&probs, rng),
            ActionSelection::Greedy => crate::tree::argmax(&probs).unwrap_or(0),
        })
    }
}

impl Actor for CrispPolicy {
    fn act(&self, x: &[f64], _rng: &mut dyn rand::RngCore) -> Result<usize, ModelError> {
        self.eval(x).map_err(|e| match e {
            crate::error::CrispError::DimensionMismatch { expected, actual } => {
                ModelError::DimensionMismatch { expected, actual }
            }
            other => ModelError::InvalidStructure(other.to_string()),
        })
    }
}

/// Uniformly random actions.
pub struct RandomActor {
    pub n_actions: usize,
}

impl Actor for RandomActor {
    fn act(&self, _x: &[f64], rng: &mut dyn rand::RngCore) -> Result<usize, ModelError> {
        Ok(rng.random_range(0..self.n_actions))
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index(probs: &[f64], rng: &mut dyn rand::RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave the total a hair below one.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn arch_parsing() {
        assert_eq!("tree:2".parse::<Arch>().unwrap(), Arch::Tree { leaves: 2 });
        assert_eq!("list:8".parse::<Arch>().unwrap(), Arch::List { rules: 8 });
        assert_eq!("mlp:0".parse::<Arch>().unwrap(), Arch::Mlp { hidden: 0, width: 16 });
        assert_eq!("mlp:2x8".parse::<Arch>().unwrap(), Arch::Mlp { hidden: 2, width: 8 });
        for bad in ["tree:3", "tree:1", "list:0", "mlp:3", "forest:2", "tree"] {
            assert!(bad.parse::<Arch>().is_err(), "{bad}");
        }
        for a in ["tree:4", "list:3", "mlp:1x16"] {
            assert_eq!(a.parse::<Arch>().unwrap().to_string(), a);
        }
    }

    #[test]
    fn arch_builds_expected_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let PolicyModel::Tree(t) = Arch::Tree { leaves: 8 }.build(4, 2, &mut rng) else {
            panic!()
        };
        assert_eq!(t.leaves().len(), 8);
        let PolicyModel::Tree(t) = Arch::List { rules: 3 }.build(4, 2, &mut rng) else {
            panic!()
        };
        assert_eq!(t.nodes().len(), 3);
    }

    #[test]
    fn model_json_dispatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for arch in [Arch::Tree { leaves: 4 }, Arch::Mlp { hidden: 1, width: 3 }] {
            let m = arch.build(3, 2, &mut rng);
            assert_eq!(PolicyModel::from_json(&m.to_json()).unwrap(), m);
        }
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let probs = [0.2, 0.5, 0.3];
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[sample_index(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            assert!((*c as f64 / 30_000.0 - p).abs() < 0.015);
        }
        assert_eq!(sample_index(&[0.0, 1.0], &mut rng), 1);
    }

    #[test]
    fn frozen_alpha_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = SoftTree::balanced(1, 2, 2, Interpretation::Policy, &mut rng);
        assert!(Policy::frozen_mask(&t).iter().all(|m| !m));
        t.set_alpha_trainable(false);
        assert_eq!(
            Policy::frozen_mask(&t),
            vec![true, false, false, false, false, false, false, false]
        );
    }
}
