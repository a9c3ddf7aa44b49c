//! CART (Gini) trees fit on logged state-action pairs.

use std::path::Path;

use rand::RngCore;

use crate::crisp::{CrispNode, CrispPolicy, PolicyKind};
use crate::envs::Environment;
use crate::error::{DataError, TrainError};
use crate::rng::{stream, Stream};
use crate::train::Actor;

pub const DEFAULT_CART_DEPTH: usize = 6;
pub const DEFAULT_CART_SAMPLES: usize = 10_000;

/// Labelled states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CartDataset {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
}

impl CartDataset {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>, action: usize) {
        self.states.push(state);
        self.actions.push(action);
    }

    pub fn dim(&self) -> Option<usize> {
        self.states.first().map(Vec::len)
    }

    pub fn validate(&self, n_actions: usize) -> Result<usize, DataError> {
        let d = self.dim().ok_or(DataError::Empty)?;
        for (row, (s, &a)) in self.states.iter().zip(&self.actions).enumerate() {
            if s.len() != d {
                return Err(DataError::RowLength {
                    row,
                    expected: d,
                    actual: s.len(),
                });
            }
            if a >= n_actions {
                return Err(DataError::ActionRange {
                    row,
                    action: a,
                    n_actions,
                });
            }
        }
        Ok(d)
    }

    /// Writes `f0,...,f{d-1},action` rows.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let d = self.dim().ok_or(DataError::Empty)?;
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        header.push("action".into());
        w.write_record(&header)?;
        for (s, a) in self.states.iter().zip(&self.actions) {
            let mut rec: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            rec.push(a.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, DataError> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let d = header.len().saturating_sub(1);
        let expected: Vec<String> = (0..d).map(|j| format!("f{j}")).chain(["action".to_string()]).collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(DataError::Header(format!("expected {}", expected.join(","))));
        }
        let mut data = Self::default();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse_err = |field: &str| DataError::Header(format!("row {row}: cannot parse {field:?}"));
            let state = rec
                .iter()
                .take(d)
                .map(|v| v.parse::<f64>().map_err(|_| parse_err(v)))
                .collect::<Result<Vec<_>, _>>()?;
            let a = &rec[d];
            data.push(state, a.parse().map_err(|_| parse_err(a))?);
        }
        Ok(data)
    }
}

/// Logs `samples` state-action pairs from `actor` playing in `env`.
pub fn collect_dataset(
    actor: &dyn Actor,
    env: &mut dyn Environment,
    samples: usize,
    max_steps: usize,
    seed: u64,
) -> Result<CartDataset, TrainError> {
    let mut seeds = stream(seed, Stream::Data);
    let mut rng = stream(seed, Stream::Sampling);
    let mut data = CartDataset::default();
    while data.len() < samples {
        let mut obs = env.reset(seeds.next_u64());
        for step in 0..max_steps {
            let actions = obs
                .iter()
                .map(|x| actor.act(x, &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            for (x, &a) in obs.iter().zip(&actions) {
                if data.len() < samples {
                    data.push(x.clone(), a);
                }
            }
            let tr = env.step(&actions).map_err(|source| TrainError::Env { step, source })?;
            obs = tr.obs;
            if tr.done || data.len() >= samples {
                break;
            }
        }
    }
    Ok(data)
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct Fitter<'a> {
    data: &'a CartDataset,
    d: usize,
    n_actions: usize,
    max_depth: usize,
}

impl Fitter<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_actions];
        for &i in idx {
            c[self.data.actions[i]] += 1;
        }
        c
    }

    /// Best (weighted impurity, feature, threshold) over all features.
    fn best_split(&self, idx: &[usize], counts: &[usize]) -> Option<(f64, usize, f64)> {
        let n = idx.len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for j in 0..self.d {
            order.sort_by(|&a, &b| self.data.states[a][j].total_cmp(&self.data.states[b][j]));
            let mut left = vec![0usize; self.n_actions];
            let mut right = counts.to_vec();
            for k in 0..n - 1 {
                let a = self.data.actions[order[k]];
                left[a] += 1;
                right[a] -= 1;
                let v = self.data.states[order[k]][j];
                let next = self.data.states[order[k + 1]][j];
                if v == next {
                    continue;
                }
                let nl = k + 1;
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                // Strict comparison keeps the lowest feature and threshold on ties.
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, j, 0.5 * (v + next)));
                }
            }
        }
        best
    }

    fn grow(&self, idx: &[usize], depth: usize) -> CrispNode {
        let counts = self.counts(idx);
        let leaf = CrispNode::Leaf(majority(&counts));
        let impurity = gini(&counts, idx.len());
        if depth >= self.max_depth || impurity == 0.0 || idx.len() < 2 {
            return leaf;
        }
        let Some((score, feature, threshold)) = self.best_split(idx, &counts) else {
            return leaf;
        };
        if score >= impurity {
            return leaf;
        }
        let (t, f): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.data.states[i][feature] > threshold);
        CrispNode::split(feature, threshold, self.grow(&t, depth + 1), self.grow(&f, depth + 1))
    }
}

/// Greedy CART induction with Gini impurity and midpoint thresholds. Nodes
/// stop splitting at `max_depth`, when pure, or when no split lowers the
/// impurity. Leaves take the majority action (lowest index on ties).
pub fn cart_fit(data: &CartDataset, n_actions: usize, max_depth: usize) -> Result<CrispPolicy, DataError> {
    let d = data.validate(n_actions)?;
    let fitter = Fitter {
        data,
        d,
        n_actions,
        max_depth,
    };
    let idx: Vec<usize> = (0..data.len()).collect();
    let root = fitter.grow(&idx, 0);
    Ok(CrispPolicy::new(d, n_actions, PolicyKind::Tree, root).expect("CART output is a valid tree"))
}

/// Fraction of rows whose label the policy reproduces.
pub fn training_accuracy(policy: &CrispPolicy, data: &CartDataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .states
        .iter()
        .zip(&data.actions)
        .filter(|(s, a)| policy.eval(s).ok() == Some(**a))
        .count();
    hits as f64 / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data_from(rows: &[(&[f64], usize)]) -> CartDataset {
        let mut d = CartDataset::default();
        for (s, a) in rows {
            d.push(s.to_vec(), *a);
        }
        d
    }

    #[test]
    fn pure_data_is_a_single_leaf() {
        let d = data_from(&[(&[1.0], 1), (&[2.0], 1), (&[-3.0], 1)]);
        let p = cart_fit(&d, 2, 6).unwrap();
        assert_eq!(p.root, CrispNode::Leaf(1));
    }

    #[test]
    fn one_dimensional_sign_split() {
        let d = data_from(&[(&[-1.0], 0), (&[1.0], 1)]);
        let p = cart_fit(&d, 2, 6).unwrap();
        assert_eq!(p.root, CrispNode::split(0, 0.0, CrispNode::Leaf(1), CrispNode::Leaf(0)));
        assert_eq!(training_accuracy(&p, &d), 1.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(cart_fit(&CartDataset::default(), 2, 3), Err(DataError::Empty)));
    }

    fn depth_two_target() -> CrispPolicy {
        let root = CrispNode::split(
            1,
            0.3,
            CrispNode::split(0, -0.5, CrispNode::Leaf(2), CrispNode::Leaf(0)),
            CrispNode::split(2, 0.8, CrispNode::Leaf(1), CrispNode::Leaf(0)),
        );
        CrispPolicy::new(3, 3, PolicyKind::Tree, root).unwrap()
    }

    fn labelled(target: &CrispPolicy, n: usize, seed: u64) -> CartDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = CartDataset::default();
        for _ in 0..n {
            let s: Vec<f64> = (0..target.d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = target.eval(&s).unwrap();
            d.push(s, a);
        }
        d
    }

    #[test]
    fn realizable_depth_two_tree_is_recovered() {
        let target = depth_two_target();
        let d = labelled(&target, 2000, 1);
        let p = cart_fit(&d, 3, 2).unwrap();
        assert_eq!(training_accuracy(&p, &d), 1.0);
        assert!(p.root.depth() <= 2);
    }

    #[test]
    fn accuracy_is_monotone_in_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut d = CartDataset::default();
        for _ in 0..500 {
            let s: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            d.push(s, rng.random_range(0..3));
        }
        let mut prev = 0.0;
        for depth in 0..8 {
            let acc = training_accuracy(&cart_fit(&d, 3, depth).unwrap(), &d);
            assert!(acc >= prev, "depth {depth}: {acc} < {prev}");
            prev = acc;
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = labelled(&depth_two_target(), 20, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        d.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("f0,f1,f2,action\n"));
        assert_eq!(CartDataset::read_csv(&path).unwrap(), d);
    }

    #[test]
    fn collected_pairs_come_from_the_actor() {
        let mut env = crate::envs::make_env("cartpole").unwrap();
        let actor = crate::train::RandomActor { n_actions: 2 };
        let d = collect_dataset(&actor, env.as_mut(), 300, 500, 0).unwrap();
        assert_eq!(d.len(), 300);
        assert_eq!(d.validate(2).unwrap(), 4);
        let again = collect_dataset(&actor, env.as_mut(), 300, 500, 0).unwrap();
        assert_eq!(d, again);
    }
}
