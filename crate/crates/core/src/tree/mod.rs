//! Differentiable decision trees.
//!
//! A [`SoftTree`] replaces the crisp test `x_j > t` of an ordinary decision
//! tree with a sigmoid gate `mu(x) = 1 / (1 + exp(-alpha (beta . x - phi)))`
//! and evaluates to the mixture `mu * T_left + (1 - mu) * T_right`. The left
//! child is always the TRUE branch.
//!
//! Leaves hold unconstrained parameters `w`. Under [`Interpretation::Policy`]
//! a leaf reads as `softmax(w)`, so every tree output is a convex combination
//! of points on the simplex. Under [`Interpretation::Q`] the leaf values are
//! used directly as per-action value estimates.
//!
//! Two topologies are supported: perfectly balanced trees and rule lists,
//! where every TRUE branch ends in a leaf.

mod grad;
mod json;

pub use grad::{grad_single_node, GradientBuffer, NodeGrad};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ModelError};

/// Exponent arguments are clamped to this magnitude before `exp`.
pub const SIGMOID_CLAMP: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpretation {
    Policy,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Balanced { depth: usize },
    RuleList { length: usize },
}

impl Topology {
    pub fn leaf_count(&self) -> usize {
        match *self {
            Topology::Balanced { depth } => 1 << depth,
            Topology::RuleList { length } => length + 1,
        }
    }

    pub fn node_count(&self) -> usize {
        self.leaf_count() - 1
    }
}

/// Reference to either a decision node or a leaf, by index into the tree's
/// node / leaf arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Decision(usize),
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionNode {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub phi: f64,
    /// TRUE branch.
    pub left: NodeRef,
    /// FALSE branch.
    pub right: NodeRef,
}

impl DecisionNode {
    /// `beta . x - phi`
    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (b, xi) in self.beta.iter().zip(x) {
            acc += b * xi;
        }
        acc - self.phi
    }

    /// Returns `(mu, 1 - mu, margin)` with `1 - mu` computed as `sigmoid(-z)`
    /// so it keeps full relative precision when the gate saturates.
    fn gate(&self, x: &[f64]) -> (f64, f64, f64) {
        let margin = self.margin(x);
        let z = self.alpha * margin;
        (sigmoid(z), sigmoid(-z), margin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafNode {
    pub w: Vec<f64>,
}

/// Logistic function with the exponent clamped to `±SIGMOID_CLAMP`.
pub fn sigmoid(z: f64) -> f64 {
    let z = if z.is_nan() {
        z
    } else {
        z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP)
    };
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(w: &[f64]) -> Vec<f64> {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = w.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Soft split value of `node` at `x`.
pub fn split_activation(node: &DecisionNode, x: &[f64]) -> Result<f64, ModelError> {
    check_dim(node.beta.len(), x.len())?;
    Ok(node.gate(x).0)
}

/// Action distribution of a POLICY leaf.
pub fn leaf_distribution(leaf: &LeafNode, interpretation: Interpretation) -> Result<Vec<f64>, ModelError> {
    match interpretation {
        Interpretation::Policy => Ok(softmax(&leaf.w)),
        Interpretation::Q => Err(ModelError::InvalidInterpretation {
            expected: Interpretation::Policy,
            actual: Interpretation::Q,
        }),
    }
}

#[inline]
fn mix_into(out: &mut [f64], mu: f64, nu: f64, left: &[f64], right: &[f64]) {
    for ((o, l), r) in out.iter_mut().zip(left).zip(right) {
        *o = mu * l + nu * r;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftTree {
    d: usize,
    n_actions: usize,
    topology: Topology,
    interpretation: Interpretation,
    alpha_trainable: bool,
    nodes: Vec<DecisionNode>,
    leaves: Vec<LeafNode>,
    root: NodeRef,
}

impl SoftTree {
    /// Builds a tree from its parts and checks every structural invariant.
    pub fn from_parts(
        d: usize,
        n_actions: usize,
        topology: Topology,
        interpretation: Interpretation,
        nodes: Vec<DecisionNode>,
        leaves: Vec<LeafNode>,
        root: NodeRef,
    ) -> Result<Self, ModelError> {
        let tree = Self {
            d,
            n_actions,
            topology,
            interpretation,
            alpha_trainable: true,
            nodes,
            leaves,
            root,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Balanced tree of the given depth (`2^depth` leaves) with seeded
    /// initialization: `alpha = 1`, `beta, phi ~ U(-1, 1)`, `w ~ U(-0.1, 0.1)`.
    pub fn balanced<R: Rng + ?Sized>(
        depth: usize,
        d: usize,
        n_actions: usize,
        interpretation: Interpretation,
        rng: &mut R,
    ) -> Self {
        let topology = Topology::Balanced { depth };
        let n_nodes = topology.node_count();
        let child = |k: usize| {
            if k < n_nodes {
                NodeRef::Decision(k)
            } else {
                NodeRef::Leaf(k - n_nodes)
            }
        };
        let nodes = (0..n_nodes)
            .map(|i| random_node(d, child(2 * i + 1), child(2 * i + 2), rng))
            .collect();
        let leaves = random_leaves(topology.leaf_count(), n_actions, rng);
        Self {
            d,
            n_actions,
            topology,
            interpretation,
            alpha_trainable: true,
            nodes,
            leaves,
            root: child(0),
        }
    }

    /// Rule list with `length` rules and `length + 1` leaves. Rule `i` sends
    /// its TRUE branch to leaf `i`; the last FALSE branch is the default leaf.
    pub fn rule_list<R: Rng + ?Sized>(
        length: usize,
        d: usize,
        n_actions: usize,
        interpretation: Interpretation,
        rng: &mut R,
    ) -> Self {
        let nodes = (0..length)
            .map(|i| {
                let right = if i + 1 < length {
                    NodeRef::Decision(i + 1)
                } else {
                    NodeRef::Leaf(length)
                };
                random_node(d, NodeRef::Leaf(i), right, rng)
            })
            .collect();
        let leaves = random_leaves(length + 1, n_actions, rng);
        let root = if length == 0 {
            NodeRef::Leaf(0)
        } else {
            NodeRef::Decision(0)
        };
        Self {
            d,
            n_actions,
            topology: Topology::RuleList { length },
            interpretation,
            alpha_trainable: true,
            nodes,
            leaves,
            root,
        }
    }

    /// One decision node over a single feature with two leaves.
    pub fn single_node(
        alpha: f64,
        beta: f64,
        phi: f64,
        true_leaf: Vec<f64>,
        false_leaf: Vec<f64>,
        interpretation: Interpretation,
    ) -> Result<Self, ModelError> {
        let n_actions = true_leaf.len();
        Self::from_parts(
            1,
            n_actions,
            Topology::Balanced { depth: 1 },
            interpretation,
            vec![DecisionNode {
                alpha,
                beta: vec![beta],
                phi,
                left: NodeRef::Leaf(0),
                right: NodeRef::Leaf(1),
            }],
            vec![LeafNode { w: true_leaf }, LeafNode { w: false_leaf }],
            NodeRef::Decision(0),
        )
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn interpretation(&self) -> Interpretation {
        self.interpretation
    }

    pub fn root(&self) -> NodeRef {
        self.root
    }

    pub fn nodes(&self) -> &[DecisionNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[LeafNode] {
        &self.leaves
    }

    pub fn node_mut(&mut self, i: usize) -> &mut DecisionNode {
        &mut self.nodes[i]
    }

    pub fn leaf_mut(&mut self, i: usize) -> &mut LeafNode {
        &mut self.leaves[i]
    }

    pub fn alpha_trainable(&self) -> bool {
        self.alpha_trainable
    }

    pub fn set_alpha_trainable(&mut self, trainable: bool) {
        self.alpha_trainable = trainable;
    }

    /// Overwrites every node's steepness.
    pub fn set_all_alpha(&mut self, alpha: f64) {
        for node in &mut self.nodes {
            node.alpha = alpha;
        }
    }

    fn leaf_output(&self, leaf: &LeafNode) -> Vec<f64> {
        match self.interpretation {
            Interpretation::Policy => softmax(&leaf.w),
            Interpretation::Q => leaf.w.clone(),
        }
    }

    /// Evaluates the tree: an action distribution under POLICY, a vector of
    /// value estimates under Q.
    pub fn eval_soft(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.d, x.len())?;
        Ok(self.eval_at(self.root, x))
    }

    fn eval_at(&self, r: NodeRef, x: &[f64]) -> Vec<f64> {
        match r {
            NodeRef::Leaf(i) => self.leaf_output(&self.leaves[i]),
            NodeRef::Decision(i) => {
                let node = &self.nodes[i];
                let (mu, nu, _) = node.gate(x);
                let left = self.eval_at(node.left, x);
                let right = self.eval_at(node.right, x);
                let mut out = vec![0.0; self.n_actions];
                mix_into(&mut out, mu, nu, &left, &right);
                out
            }
        }
    }

    /// Rule-list evaluation as a right fold over the rules. Produces the same
    /// floating-point result as [`SoftTree::eval_soft`] on the same list.
    pub fn eval_rule_list_soft(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let Topology::RuleList { length } = self.topology else {
            return Err(ModelError::UnsupportedShape(
                "rule-list evaluation needs a rule-list topology".into(),
            ));
        };
        check_dim(self.d, x.len())?;
        // Walk the FALSE spine to collect the rules in order.
        let mut rules = Vec::with_capacity(length);
        let mut cur = self.root;
        while let NodeRef::Decision(i) = cur {
            rules.push(i);
            cur = self.nodes[i].right;
        }
        let NodeRef::Leaf(default) = cur else { unreachable!() };
        let mut acc = self.leaf_output(&self.leaves[default]);
        let mut next = vec![0.0; self.n_actions];
        for &i in rules.iter().rev() {
            let node = &self.nodes[i];
            let NodeRef::Leaf(l) = node.left else {
                unreachable!("validated rule list")
            };
            let (mu, nu, _) = node.gate(x);
            let leaf = self.leaf_output(&self.leaves[l]);
            mix_into(&mut next, mu, nu, &leaf, &acc);
            std::mem::swap(&mut acc, &mut next);
        }
        Ok(acc)
    }

    /// Number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.nodes.iter().map(|n| n.beta.len() + 2).sum::<usize>()
            + self.leaves.iter().map(|l| l.w.len()).sum::<usize>()
    }

    /// Flat parameter vector: per node `alpha, beta.., phi`, then every leaf's `w`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for n in &self.nodes {
            out.push(n.alpha);
            out.extend_from_slice(&n.beta);
            out.push(n.phi);
        }
        for l in &self.leaves {
            out.extend_from_slice(&l.w);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), ModelError> {
        let expected = self.param_count();
        if p.len() != expected {
            return Err(ModelError::ParamLength {
                expected,
                actual: p.len(),
            });
        }
        let mut it = p.iter().copied();
        for n in &mut self.nodes {
            n.alpha = it.next().unwrap();
            for b in &mut n.beta {
                *b = it.next().unwrap();
            }
            n.phi = it.next().unwrap();
        }
        for l in &mut self.leaves {
            for w in &mut l.w {
                *w = it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Flat indices of the `alpha` parameters.
    pub fn alpha_indices(&self) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.nodes.len());
        let mut off = 0;
        for n in &self.nodes {
            idx.push(off);
            off += n.beta.len() + 2;
        }
        idx
    }

    /// Checks dimensions, finiteness, reachability and topology shape.
    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |m: String| Err(ModelError::InvalidStructure(m));
        if self.n_actions == 0 {
            return invalid("tree must have at least one action".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            check_dim(self.d, n.beta.len())?;
            if !n.alpha.is_finite() || !n.phi.is_finite() || n.beta.iter().any(|b| !b.is_finite()) {
                return Err(ModelError::NonFinite(format!("decision node {i}")));
            }
        }
        for (i, l) in self.leaves.iter().enumerate() {
            check_dim(self.n_actions, l.w.len())?;
            if l.w.iter().any(|w| !w.is_finite()) {
                return Err(ModelError::NonFinite(format!("leaf {i}")));
            }
        }
        if self.nodes.len() != self.topology.node_count() || self.leaves.len() != self.topology.leaf_count() {
            return invalid(format!(
                "{:?} needs {} decision nodes and {} leaves, found {} and {}",
                self.topology,
                self.topology.node_count(),
                self.topology.leaf_count(),
                self.nodes.len(),
                self.leaves.len()
            ));
        }

        // Every node reachable exactly once from the root.
        let mut seen_nodes = vec![false; self.nodes.len()];
        let mut seen_leaves = vec![false; self.leaves.len()];
        let mut stack = vec![(self.root, 0usize)];
        let mut leaf_depths = Vec::new();
        while let Some((r, depth)) = stack.pop() {
            match r {
                NodeRef::Leaf(i) => {
                    if i >= self.leaves.len() || std::mem::replace(&mut seen_leaves[i], true) {
                        return invalid(format!("leaf {i} missing or has several parents"));
                    }
                    leaf_depths.push(depth);
                }
                NodeRef::Decision(i) => {
                    if i >= self.nodes.len() || std::mem::replace(&mut seen_nodes[i], true) {
                        return invalid(format!("decision node {i} missing, shared or cyclic"));
                    }
                    let n = &self.nodes[i];
                    stack.push((n.right, depth + 1));
                    stack.push((n.left, depth + 1));
                }
            }
        }
        if seen_nodes.iter().any(|s| !s) || seen_leaves.iter().any(|s| !s) {
            return invalid("unreachable nodes".into());
        }

        match self.topology {
            Topology::Balanced { depth } => {
                if leaf_depths.iter().any(|&d| d != depth) {
                    return invalid(format!("tree is not balanced at depth {depth}"));
                }
            }
            Topology::RuleList { .. } => {
                for (i, n) in self.nodes.iter().enumerate() {
                    if !matches!(n.left, NodeRef::Leaf(_)) {
                        return invalid(format!("rule {i}: TRUE branch must end in a leaf"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Gradient of `<upstream, eval_soft(x)>` with respect to every parameter,
    /// by recursive chain rule.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<GradientBuffer, ModelError> {
        check_dim(self.d, x.len())?;
        check_dim(self.n_actions, upstream.len())?;
        let mut grads = GradientBuffer::zeros_like(self);
        self.backward_at(self.root, x, 1.0, upstream, &mut grads);
        if !self.alpha_trainable {
            for g in &mut grads.nodes {
                g.alpha = 0.0;
            }
        }
        Ok(grads)
    }

    fn backward_at(&self, r: NodeRef, x: &[f64], coef: f64, upstream: &[f64], grads: &mut GradientBuffer) -> Vec<f64> {
        match r {
            NodeRef::Leaf(i) => {
                let leaf = &self.leaves[i];
                let out = self.leaf_output(leaf);
                let g = &mut grads.leaves[i];
                match self.interpretation {
                    Interpretation::Q => {
                        for (gk, u) in g.iter_mut().zip(upstream) {
                            *gk = coef * u;
                        }
                    }
                    Interpretation::Policy => {
                        let mean: f64 = out.iter().zip(upstream).map(|(p, u)| p * u).sum();
                        for ((gk, p), u) in g.iter_mut().zip(&out).zip(upstream) {
                            *gk = coef * p * (u - mean);
                        }
                    }
                }
                out
            }
            NodeRef::Decision(i) => {
                let node = &self.nodes[i];
                let (mu, nu, margin) = node.gate(x);
                let left = self.backward_at(node.left, x, coef * mu, upstream, grads);
                let right = self.backward_at(node.right, x, coef * nu, upstream, grads);
                let mut dot = 0.0;
                for ((u, l), r) in upstream.iter().zip(&left).zip(&right) {
                    dot += u * (l - r);
                }
                let g = coef * dot * mu * nu;
                let ng = &mut grads.nodes[i];
                ng.alpha = g * margin;
                for (gb, xi) in ng.beta.iter_mut().zip(x) {
                    *gb = g * node.alpha * xi;
                }
                ng.phi = -(g * node.alpha);
                let mut out = vec![0.0; self.n_actions];
                mix_into(&mut out, mu, nu, &left, &right);
                out
            }
        }
    }

    /// Ids of decision nodes whose largest raw weight is not positive.
    pub fn non_positive_dominant_nodes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| argmax(&n.beta).map(|j| n.beta[j] <= 0.0).unwrap_or(false))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        match best {
            Some(b) if v[b] >= x => {}
            _ => best = Some(i),
        }
    }
    best
}

fn random_node<R: Rng + ?Sized>(d: usize, left: NodeRef, right: NodeRef, rng: &mut R) -> DecisionNode {
    DecisionNode {
        alpha: 1.0,
        beta: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        phi: rng.random_range(-1.0..1.0),
        left,
        right,
    }
}

fn random_leaves<R: Rng + ?Sized>(count: usize, n_actions: usize, rng: &mut R) -> Vec<LeafNode> {
    (0..count)
        .map(|_| LeafNode {
            w: (0..n_actions).map(|_| rng.random_range(-0.1..0.1)).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn node(alpha: f64, beta: Vec<f64>, phi: f64) -> DecisionNode {
        DecisionNode {
            alpha,
            beta,
            phi,
            left: NodeRef::Leaf(0),
            right: NodeRef::Leaf(1),
        }
    }

    #[test]
    fn split_activation_examples() {
        assert_eq!(split_activation(&node(1.0, vec![1.0], 0.0), &[0.0]).unwrap(), 0.5);
        assert_eq!(split_activation(&node(0.0, vec![3.0], 7.0), &[-2.0]).unwrap(), 0.5);
        let mu = split_activation(&node(10.0, vec![1.0], 2.5), &[3.0]).unwrap();
        assert!((mu - 0.993_307_149_075_715_2).abs() < 1e-12);
    }

    #[test]
    fn split_activation_dimension_error() {
        let err = split_activation(&node(1.0, vec![1.0, 2.0], 0.0), &[0.0]).unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch { expected: 2, actual: 1 }));
    }

    #[test]
    fn sigmoid_is_finite_at_extremes() {
        assert!(sigmoid(1e308) == 1.0);
        assert!(sigmoid(-1e308) > 0.0);
        assert!(sigmoid(-1e308).is_finite());
    }

    #[test]
    fn leaf_distribution_examples() {
        let p = leaf_distribution(&LeafNode { w: vec![0.0, 0.0] }, Interpretation::Policy).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let p = leaf_distribution(&LeafNode { w: vec![3.7; 4] }, Interpretation::Policy).unwrap();
        assert_eq!(p, vec![0.25; 4]);
        let p = leaf_distribution(
            &LeafNode {
                w: vec![99f64.ln(), 0.0],
            },
            Interpretation::Policy,
        )
        .unwrap();
        assert!((p[0] - 0.99).abs() < 1e-12 && (p[1] - 0.01).abs() < 1e-12);
        assert!(leaf_distribution(&LeafNode { w: vec![0.0] }, Interpretation::Q).is_err());
    }

    #[test]
    fn single_node_zero_alpha_averages_leaves() {
        let t = SoftTree::single_node(0.0, 1.0, 0.0, vec![2.0, 4.0], vec![0.0, 1.0], Interpretation::Q).unwrap();
        assert_eq!(t.eval_soft(&[12.0]).unwrap(), vec![1.0, 2.5]);
    }

    #[test]
    fn single_node_mixture_example() {
        let t = SoftTree::single_node(
            10.0,
            1.0,
            2.5,
            vec![0.99f64.ln(), 0.01f64.ln()],
            vec![0.01f64.ln(), 0.99f64.ln()],
            Interpretation::Policy,
        )
        .unwrap();
        let out = t.eval_soft(&[3.0]).unwrap();
        assert!((out[0] - 0.983_441_006_094_201).abs() < 1e-12, "{out:?}");
        assert!((out[1] - 0.016_558_993_905_799).abs() < 1e-12, "{out:?}");
    }

    #[test]
    fn identical_leaves_give_leaf_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = SoftTree::balanced(3, 2, 3, Interpretation::Q, &mut rng);
        for i in 0..t.leaves().len() {
            t.leaf_mut(i).w = vec![1.0, -2.0, 0.5];
        }
        for x in [[0.0, 0.0], [5.0, -3.0], [-100.0, 1e3]] {
            let out = t.eval_soft(&x).unwrap();
            for (o, v) in out.iter().zip([1.0, -2.0, 0.5]) {
                assert!((o - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rule_list_with_zero_alpha_uses_halving_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let len = 4;
        let mut t = SoftTree::rule_list(len, 2, 1, Interpretation::Q, &mut rng);
        t.set_all_alpha(0.0);
        for i in 0..=len {
            t.leaf_mut(i).w = vec![(i + 1) as f64];
        }
        let got = t.eval_rule_list_soft(&[0.3, 0.7]).unwrap()[0];
        let mut expected = 0.0;
        for i in 0..len {
            expected += 0.5f64.powi(i as i32 + 1) * (i + 1) as f64;
        }
        expected += 0.5f64.powi(len as i32) * (len + 1) as f64;
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn rule_list_saturated_first_rule_returns_first_leaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = SoftTree::rule_list(3, 1, 2, Interpretation::Policy, &mut rng);
        *t.node_mut(0) = DecisionNode {
            alpha: 1e4,
            beta: vec![1.0],
            phi: 0.0,
            left: NodeRef::Leaf(0),
            right: NodeRef::Decision(1),
        };
        let first = softmax(&t.leaves()[0].w);
        let out = t.eval_rule_list_soft(&[1.0]).unwrap();
        for (a, b) in out.iter().zip(&first) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn length_one_rule_list_matches_single_node_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let list = SoftTree::rule_list(1, 3, 2, Interpretation::Policy, &mut rng);
        let n = &list.nodes()[0];
        let tree = SoftTree::from_parts(
            3,
            2,
            Topology::Balanced { depth: 1 },
            Interpretation::Policy,
            vec![n.clone()],
            list.leaves().to_vec(),
            NodeRef::Decision(0),
        )
        .unwrap();
        let x = [0.2, -0.4, 1.5];
        assert_eq!(list.eval_rule_list_soft(&x).unwrap(), tree.eval_soft(&x).unwrap());
    }

    #[test]
    fn rule_list_eval_requires_rule_list() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = SoftTree::balanced(2, 1, 2, Interpretation::Policy, &mut rng);
        assert!(matches!(
            t.eval_rule_list_soft(&[0.0]),
            Err(ModelError::UnsupportedShape(_))
        ));
    }

    #[test]
    fn validate_rejects_bad_structure() {
        let shared = SoftTree::from_parts(
            1,
            2,
            Topology::Balanced { depth: 1 },
            Interpretation::Q,
            vec![node(1.0, vec![1.0], 0.0)]
                .into_iter()
                .map(|mut n| {
                    n.right = NodeRef::Leaf(0);
                    n
                })
                .collect(),
            vec![LeafNode { w: vec![0.0, 0.0] }, LeafNode { w: vec![0.0, 0.0] }],
            NodeRef::Decision(0),
        );
        assert!(matches!(shared, Err(ModelError::InvalidStructure(_))));

        let wrong_beta = SoftTree::from_parts(
            2,
            2,
            Topology::Balanced { depth: 1 },
            Interpretation::Q,
            vec![node(1.0, vec![1.0], 0.0)],
            vec![LeafNode { w: vec![0.0, 0.0] }, LeafNode { w: vec![0.0, 0.0] }],
            NodeRef::Decision(0),
        );
        assert!(matches!(wrong_beta, Err(ModelError::DimensionMismatch { .. })));

        let nan = SoftTree::single_node(f64::NAN, 1.0, 0.0, vec![0.0], vec![0.0], Interpretation::Q);
        assert!(matches!(nan, Err(ModelError::NonFinite(_))));
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = SoftTree::balanced(2, 3, 2, Interpretation::Policy, &mut rng);
        let p: Vec<f64> = (0..t.param_count()).map(|i| i as f64 * 0.5).collect();
        t.set_params(&p).unwrap();
        assert_eq!(t.params(), p);
        assert!(t.set_params(&p[1..]).is_err());
        assert_eq!(t.alpha_indices(), vec![0, 5, 10]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(&[-1.0, -1.0]), Some(0));
        assert_eq!(argmax(&[]), None);
    }
}
