//! JSON form of a [`SoftTree`].
//!
//! Decision nodes and leaves share one id space: decision node `i` has id `i`,
//! leaf `k` has id `nodes.len() + k`. `left` / `right` hold child ids. The root
//! is the only id no node refers to.

use serde::{Deserialize, Serialize};

use super::{DecisionNode, Interpretation, LeafNode, NodeRef, SoftTree, Topology};
use crate::error::ModelError;

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TreeDoc {
    version: u32,
    topology: Topology,
    d: usize,
    n_actions: usize,
    interpretation: Interpretation,
    #[serde(default = "default_true")]
    alpha_trainable: bool,
    nodes: Vec<NodeDoc>,
    leaves: Vec<LeafDoc>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    alpha: f64,
    beta: Vec<f64>,
    phi: f64,
    left: usize,
    right: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct LeafDoc {
    id: usize,
    w: Vec<f64>,
}

impl SoftTree {
    pub fn to_json(&self) -> String {
        let n = self.nodes.len();
        let id = |r: NodeRef| match r {
            NodeRef::Decision(i) => i,
            NodeRef::Leaf(k) => n + k,
        };
        let doc = TreeDoc {
            version: TREE_FORMAT_VERSION,
            topology: self.topology,
            d: self.d,
            n_actions: self.n_actions,
            interpretation: self.interpretation,
            alpha_trainable: self.alpha_trainable,
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, node)| NodeDoc {
                    id: i,
                    alpha: node.alpha,
                    beta: node.beta.clone(),
                    phi: node.phi,
                    left: id(node.left),
                    right: id(node.right),
                })
                .collect(),
            leaves: self
                .leaves
                .iter()
                .enumerate()
                .map(|(k, l)| LeafDoc {
                    id: n + k,
                    w: l.w.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("tree serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let doc: TreeDoc = serde_json::from_str(s)?;
        if doc.version != TREE_FORMAT_VERSION {
            return Err(ModelError::InvalidStructure(format!(
                "unsupported tree format version {}",
                doc.version
            )));
        }
        let n = doc.nodes.len();
        let total = n + doc.leaves.len();
        let bad = |m: String| ModelError::InvalidStructure(m);
        let to_ref = |id: usize| -> Result<NodeRef, ModelError> {
            if id < n {
                Ok(NodeRef::Decision(id))
            } else if id < total {
                Ok(NodeRef::Leaf(id - n))
            } else {
                Err(bad(format!("child id {id} out of range")))
            }
        };

        let mut nodes: Vec<Option<DecisionNode>> = vec![None; n];
        let mut referenced = vec![false; total];
        for nd in doc.nodes {
            if nd.id >= n || nodes[nd.id].is_some() {
                return Err(bad(format!("decision node id {} invalid or repeated", nd.id)));
            }
            for c in [nd.left, nd.right] {
                if c < total {
                    referenced[c] = true;
                }
            }
            nodes[nd.id] = Some(DecisionNode {
                alpha: nd.alpha,
                beta: nd.beta,
                phi: nd.phi,
                left: to_ref(nd.left)?,
                right: to_ref(nd.right)?,
            });
        }
        let mut leaves: Vec<Option<LeafNode>> = vec![None; doc.leaves.len()];
        for lf in doc.leaves {
            if lf.id < n || lf.id >= total || leaves[lf.id - n].is_some() {
                return Err(bad(format!("leaf id {} invalid or repeated", lf.id)));
            }
            leaves[lf.id - n] = Some(LeafNode { w: lf.w });
        }
        let roots: Vec<usize> = (0..total).filter(|&i| !referenced[i]).collect();
        let [root] = roots[..] else {
            return Err(bad(format!("expected exactly one root, found {}", roots.len())));
        };

        let mut tree = SoftTree::from_parts(
            doc.d,
            doc.n_actions,
            doc.topology,
            doc.interpretation,
            nodes.into_iter().map(Option::unwrap).collect(),
            leaves.into_iter().map(Option::unwrap).collect(),
            to_ref(root)?,
        )?;
        tree.alpha_trainable = doc.alpha_trainable;
        Ok(tree)
    }
}
