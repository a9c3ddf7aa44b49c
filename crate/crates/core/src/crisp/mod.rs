//! Crisp decision trees and rule lists extracted from soft trees.
//!
//! Every decision node tests a single feature, `x_j > t`, and sends the input
//! to its TRUE (left) child when the test holds. The boundary `x_j == t` goes
//! FALSE.

mod export;
mod prune;

pub use export::{parse_text, NameTable};
pub use prune::prune;

use serde::{Deserialize, Serialize};

use crate::error::CrispError;
use crate::tree::{argmax, DecisionNode, Interpretation, LeafNode, NodeRef, SoftTree, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrispNode {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        /// Taken when `x[feature] > threshold`.
        t: Box<CrispNode>,
        f: Box<CrispNode>,
    },
}

impl CrispNode {
    pub fn split(feature: usize, threshold: f64, t: CrispNode, f: CrispNode) -> Self {
        CrispNode::Split {
            feature,
            threshold,
            t: Box::new(t),
            f: Box::new(f),
        }
    }

    pub fn decision_count(&self) -> usize {
        match self {
            CrispNode::Leaf(_) => 0,
            CrispNode::Split { t, f, .. } => 1 + t.decision_count() + f.decision_count(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            CrispNode::Leaf(_) => 1,
            CrispNode::Split { t, f, .. } => t.leaf_count() + f.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            CrispNode::Leaf(_) => 0,
            CrispNode::Split { t, f, .. } => 1 + t.depth().max(f.depth()),
        }
    }

    /// True when every TRUE branch ends in a leaf.
    pub fn is_rule_list(&self) -> bool {
        match self {
            CrispNode::Leaf(_) => true,
            CrispNode::Split { t, f, .. } => matches!(**t, CrispNode::Leaf(_)) && f.is_rule_list(),
        }
    }

    fn max_feature_and_action(&self) -> (Option<usize>, usize) {
        match self {
            CrispNode::Leaf(a) => (None, *a),
            CrispNode::Split { feature, t, f, .. } => {
                let (ft, at) = t.max_feature_and_action();
                let (ff, af) = f.max_feature_and_action();
                (Some(*feature).max(ft).max(ff), at.max(af))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Tree,
    RuleList,
}

/// A discrete policy over `d` features and `n_actions` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrispPolicy {
    pub d: usize,
    pub n_actions: usize,
    pub kind: PolicyKind,
    pub root: CrispNode,
}

impl CrispPolicy {
    pub fn new(d: usize, n_actions: usize, kind: PolicyKind, root: CrispNode) -> Result<Self, CrispError> {
        let policy = Self {
            d,
            n_actions,
            kind,
            root,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), CrispError> {
        let (feat, act) = self.root.max_feature_and_action();
        if let Some(j) = feat {
            if j >= self.d {
                return Err(CrispError::DimensionMismatch {
                    expected: self.d,
                    actual: j + 1,
                });
            }
        }
        if act >= self.n_actions {
            return Err(CrispError::DimensionMismatch {
                expected: self.n_actions,
                actual: act + 1,
            });
        }
        if self.kind == PolicyKind::RuleList && !self.root.is_rule_list() {
            return Err(CrispError::UnsupportedShape(
                "rule list has a TRUE branch that is not a leaf".into(),
            ));
        }
        Ok(())
    }

    /// Action chosen at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<usize, CrispError> {
        if x.len() != self.d {
            return Err(CrispError::DimensionMismatch {
                expected: self.d,
                actual: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                CrispNode::Leaf(a) => return *a,
                CrispNode::Split {
                    feature,
                    threshold,
                    t,
                    f,
                } => node = if x[*feature] > *threshold { t } else { f },
            }
        }
    }

    /// Soft tree with one-hot weights, the crisp thresholds and the given
    /// steepness. Leaves put logit `leaf_logit` on their action. Only shapes
    /// representable as a balanced tree or rule list can be lifted.
    pub fn lift(&self, alpha: f64, leaf_logit: f64) -> Result<SoftTree, CrispError> {
        let topology = match self.kind {
            PolicyKind::RuleList => Topology::RuleList {
                length: self.root.decision_count(),
            },
            PolicyKind::Tree => {
                let depth = self.root.depth();
                if self.root.leaf_count() != 1 << depth {
                    return Err(CrispError::UnsupportedShape(
                        "only balanced trees can be lifted to a soft tree".into(),
                    ));
                }
                Topology::Balanced { depth }
            }
        };
        let mut nodes = Vec::new();
        let mut leaves = Vec::new();
        // Pre-order numbering of decision nodes and leaves.
        fn walk(
            n: &CrispNode,
            d: usize,
            k: usize,
            alpha: f64,
            logit: f64,
            nodes: &mut Vec<DecisionNode>,
            leaves: &mut Vec<LeafNode>,
        ) -> NodeRef {
            match n {
                CrispNode::Leaf(a) => {
                    let mut w = vec![0.0; k];
                    w[*a] = logit;
                    leaves.push(LeafNode { w });
                    NodeRef::Leaf(leaves.len() - 1)
                }
                CrispNode::Split {
                    feature,
                    threshold,
                    t,
                    f,
                } => {
                    let id = nodes.len();
                    let mut beta = vec![0.0; d];
                    beta[*feature] = 1.0;
                    nodes.push(DecisionNode {
                        alpha,
                        beta,
                        phi: *threshold,
                        left: NodeRef::Leaf(0),
                        right: NodeRef::Leaf(0),
                    });
                    let left = walk(t, d, k, alpha, logit, nodes, leaves);
                    let right = walk(f, d, k, alpha, logit, nodes, leaves);
                    nodes[id].left = left;
                    nodes[id].right = right;
                    NodeRef::Decision(id)
                }
            }
        }
        let root = walk(
            &self.root,
            self.d,
            self.n_actions,
            alpha,
            leaf_logit,
            &mut nodes,
            &mut leaves,
        );
        Ok(SoftTree::from_parts(
            self.d,
            self.n_actions,
            topology,
            Interpretation::Policy,
            nodes,
            leaves,
            root,
        )?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CrispError> {
        let p: CrispPolicy = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

fn discretize_at(tree: &SoftTree, r: NodeRef) -> Result<CrispNode, CrispError> {
    match r {
        NodeRef::Leaf(i) => Ok(CrispNode::Leaf(argmax(&tree.leaves()[i].w).expect("non-empty leaf"))),
        NodeRef::Decision(i) => {
            let node = &tree.nodes()[i];
            let j = argmax(&node.beta).ok_or(CrispError::DegenerateNode { node: i })?;
            let bj = node.beta[j];
            if bj == 0.0 {
                return Err(CrispError::DegenerateNode { node: i });
            }
            if bj < 0.0 {
                log::warn!(
                    "decision node {i}: dominant weight {bj} is negative; the crisp test x{j} > {} reverses the soft split's direction",
                    node.phi / bj
                );
            }
            Ok(CrispNode::split(
                j,
                node.phi / bj,
                discretize_at(tree, node.left)?,
                discretize_at(tree, node.right)?,
            ))
        }
    }
}

/// Discretizes a POLICY soft tree: each node tests its largest raw weight's
/// feature against `phi / beta_j`, each leaf picks its largest parameter.
pub fn discretize_tree(soft: &SoftTree) -> Result<CrispPolicy, CrispError> {
    if soft.interpretation() != Interpretation::Policy {
        return Err(CrispError::InvalidInterpretation(soft.interpretation()));
    }
    let kind = match soft.topology() {
        Topology::RuleList { .. } => PolicyKind::RuleList,
        Topology::Balanced { .. } => PolicyKind::Tree,
    };
    let root = discretize_at(soft, soft.root())?;
    CrispPolicy::new(soft.d(), soft.n_actions(), kind, root)
}

/// As [`discretize_tree`], but only accepts rule lists.
pub fn discretize_rule_list(soft: &SoftTree) -> Result<CrispPolicy, CrispError> {
    if !matches!(soft.topology(), Topology::RuleList { .. }) {
        return Err(CrispError::UnsupportedShape("expected a rule list".into()));
    }
    discretize_tree(soft)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::sigmoid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn soft_single(beta: Vec<f64>, phi: f64) -> SoftTree {
        let d = beta.len();
        SoftTree::from_parts(
            d,
            2,
            Topology::Balanced { depth: 1 },
            Interpretation::Policy,
            vec![DecisionNode {
                alpha: 1.0,
                beta,
                phi,
                left: NodeRef::Leaf(0),
                right: NodeRef::Leaf(1),
            }],
            vec![LeafNode { w: vec![0.0, 1.0] }, LeafNode { w: vec![1.0, 0.0] }],
            NodeRef::Decision(0),
        )
        .unwrap()
    }

    fn split_of(p: &CrispPolicy) -> (usize, f64) {
        match &p.root {
            CrispNode::Split { feature, threshold, .. } => (*feature, *threshold),
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn discretize_examples() {
        let p = discretize_tree(&soft_single(vec![0.2, 0.8], 0.4)).unwrap();
        assert_eq!(split_of(&p), (1, 0.5));
        let p = discretize_tree(&soft_single(vec![1.0, 0.0], 2.5)).unwrap();
        assert_eq!(split_of(&p), (0, 2.5));
        let p = discretize_tree(&soft_single(vec![-0.5, -2.0], 1.0)).unwrap();
        assert_eq!(split_of(&p), (0, -2.0));
        assert_eq!(
            p.root,
            CrispNode::split(0, -2.0, CrispNode::Leaf(1), CrispNode::Leaf(0))
        );
    }

    #[test]
    fn discretize_degenerate_and_wrong_interpretation() {
        let err = discretize_tree(&soft_single(vec![0.0, -1.0], 1.0)).unwrap_err();
        assert!(matches!(err, CrispError::DegenerateNode { node: 0 }));
        let q = SoftTree::single_node(1.0, 1.0, 0.0, vec![0.0], vec![0.0], Interpretation::Q).unwrap();
        assert!(matches!(discretize_tree(&q), Err(CrispError::InvalidInterpretation(_))));
    }

    #[test]
    fn rule_list_of_length_one_matches_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let list = SoftTree::rule_list(1, 3, 2, Interpretation::Policy, &mut rng);
        let tree = SoftTree::from_parts(
            3,
            2,
            Topology::Balanced { depth: 1 },
            Interpretation::Policy,
            list.nodes().to_vec(),
            list.leaves().to_vec(),
            NodeRef::Decision(0),
        )
        .unwrap();
        let a = discretize_rule_list(&list).unwrap();
        let b = discretize_tree(&tree).unwrap();
        assert_eq!(a.root, b.root);
        assert_eq!(a.kind, PolicyKind::RuleList);
        assert!(discretize_rule_list(&tree).is_err());
    }

    #[test]
    fn eval_examples() {
        let p = CrispPolicy::new(
            1,
            2,
            PolicyKind::Tree,
            CrispNode::split(0, 2.5, CrispNode::Leaf(1), CrispNode::Leaf(0)),
        )
        .unwrap();
        assert_eq!(p.eval(&[3.0]).unwrap(), 1);
        assert_eq!(p.eval(&[2.5]).unwrap(), 0);
        assert!(matches!(p.eval(&[1.0, 2.0]), Err(CrispError::DimensionMismatch { .. })));
        let same = CrispPolicy::new(
            1,
            2,
            PolicyKind::Tree,
            CrispNode::split(0, 2.5, CrispNode::Leaf(0), CrispNode::Leaf(0)),
        )
        .unwrap();
        for x in [-1e9, 0.0, 2.5, 7.0] {
            assert_eq!(same.eval(&[x]).unwrap(), 0);
        }
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let bad = CrispPolicy::new(
            1,
            2,
            PolicyKind::Tree,
            CrispNode::split(1, 0.0, CrispNode::Leaf(0), CrispNode::Leaf(1)),
        );
        assert!(bad.is_err());
        let bad = CrispPolicy::new(1, 2, PolicyKind::Tree, CrispNode::Leaf(2));
        assert!(bad.is_err());
        let bad = CrispPolicy::new(
            1,
            2,
            PolicyKind::RuleList,
            CrispNode::split(
                0,
                0.0,
                CrispNode::split(0, 1.0, CrispNode::Leaf(0), CrispNode::Leaf(1)),
                CrispNode::Leaf(1),
            ),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = discretize_tree(&SoftTree::balanced(3, 4, 3, Interpretation::Policy, &mut rng)).unwrap();
        assert_eq!(CrispPolicy::from_json(&p.to_json()).unwrap(), p);
    }

    /// Soft tree with one-hot dominant weights (ratio >= 100), positive
    /// dominant entries and large steepness.
    fn saturated_tree(rng: &mut ChaCha8Rng, depth: usize, d: usize) -> SoftTree {
        let mut t = SoftTree::balanced(depth, d, 3, Interpretation::Policy, rng);
        for i in 0..t.nodes().len() {
            let j = rng.random_range(0..d);
            let n = t.node_mut(i);
            n.alpha = 1e4 + rng.random_range(0.0..1e4);
            for (k, b) in n.beta.iter_mut().enumerate() {
                *b = if k == j {
                    rng.random_range(0.5..2.0)
                } else {
                    rng.random_range(-0.004..0.004)
                };
            }
        }
        for i in 0..t.leaves().len() {
            t.leaf_mut(i).w = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        }
        t
    }

    proptest! {
        #[test]
        fn saturated_soft_tree_agrees_with_crisp(seed in any::<u64>(), depth in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 3;
            let soft = saturated_tree(&mut rng, depth, d);
            let crisp = discretize_tree(&soft).unwrap();
            for _ in 0..50 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let margins_ok = soft.nodes().iter().all(|n| n.margin(&x).abs() >= 1e-2);
                if !margins_ok { continue; }
                let out = soft.eval_soft(&x).unwrap();
                prop_assert_eq!(argmax(&out).unwrap(), crisp.eval(&x).unwrap());
            }
        }

        #[test]
        fn saturated_soft_matches_crisp_distribution(seed in any::<u64>(), depth in 1usize..4) {
            // With exact one-hot weights the soft output equals the reached
            // leaf's distribution within 1e-6 when every margin is >= 1e-2.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut soft = SoftTree::balanced(depth, 2, 2, Interpretation::Policy, &mut rng);
            for i in 0..soft.nodes().len() {
                let j = rng.random_range(0..2);
                let n = soft.node_mut(i);
                n.alpha = 1e4;
                n.beta = vec![0.0; 2];
                n.beta[j] = 1.0;
            }
            let crisp = discretize_tree(&soft).unwrap();
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            prop_assume!(soft.nodes().iter().all(|n| n.margin(&x).abs() >= 1e-2));
            // Walk the crisp structure to find the reached leaf index.
            let mut r = soft.root();
            while let NodeRef::Decision(i) = r {
                let n = &soft.nodes()[i];
                r = if n.margin(&x) > 0.0 { n.left } else { n.right };
            }
            let NodeRef::Leaf(l) = r else { unreachable!() };
            let leaf = crate::tree::softmax(&soft.leaves()[l].w);
            let out = soft.eval_soft(&x).unwrap();
            for (a, b) in out.iter().zip(&leaf) {
                prop_assert!((a - b).abs() < 1e-6);
            }
            prop_assert_eq!(crisp.eval(&x).unwrap(), argmax(&soft.leaves()[l].w).unwrap());
            prop_assert!(sigmoid(1e4 * 1e-2) > 1.0 - 1e-6);
        }

        #[test]
        fn discretize_lift_discretize_is_identity(seed in any::<u64>(), depth in 1usize..4, list in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let soft = if list {
                SoftTree::rule_list(depth + 1, 3, 3, Interpretation::Policy, &mut rng)
            } else {
                SoftTree::balanced(depth, 3, 3, Interpretation::Policy, &mut rng)
            };
            let once = match discretize_tree(&soft) { Ok(p) => p, Err(_) => return Ok(()) };
            let lifted = once.lift(1e6, 10.0).unwrap();
            let twice = discretize_tree(&lifted).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
