use super::{Interpretation, NodeRef, SoftTree};
use crate::error::{check_dim, ModelError};

/// Partials of one decision node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrad {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub phi: f64,
}

/// Gradients keyed like the tree's parameters: one [`NodeGrad`] per decision
/// node and one vector per leaf, in the same index order as the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub nodes: Vec<NodeGrad>,
    pub leaves: Vec<Vec<f64>>,
}

impl GradientBuffer {
    pub fn zeros_like(tree: &SoftTree) -> Self {
        Self {
            nodes: tree
                .nodes()
                .iter()
                .map(|n| NodeGrad {
                    alpha: 0.0,
                    beta: vec![0.0; n.beta.len()],
                    phi: 0.0,
                })
                .collect(),
            leaves: tree.leaves().iter().map(|l| vec![0.0; l.w.len()]).collect(),
        }
    }

    /// Flattened in the same order as [`SoftTree::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for n in &self.nodes {
            out.push(n.alpha);
            out.extend_from_slice(&n.beta);
            out.push(n.phi);
        }
        for l in &self.leaves {
            out.extend_from_slice(l);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|g| g.is_finite())
    }
}

/// Closed-form gradient of `f(s, a)` for a one-node, one-feature Q tree.
///
/// With `mu = mu(s)` and `c = (y_true[a] - y_false[a]) * mu * (1 - mu)`:
/// `df/dy_true[a] = mu`, `df/dy_false[a] = 1 - mu`, `df/dalpha = c (beta s - phi)`,
/// `df/dbeta = c alpha s`, `df/dphi = -c alpha`. Partials for other actions'
/// leaf entries are zero.
pub fn grad_single_node(tree: &SoftTree, s: f64, a: usize) -> Result<GradientBuffer, ModelError> {
    if tree.interpretation() != Interpretation::Q {
        return Err(ModelError::InvalidInterpretation {
            expected: Interpretation::Q,
            actual: tree.interpretation(),
        });
    }
    let (NodeRef::Decision(0), [node]) = (tree.root(), tree.nodes()) else {
        return Err(ModelError::UnsupportedShape(
            "closed-form gradients need exactly one decision node; use backward".into(),
        ));
    };
    check_dim(1, tree.d())?;
    if a >= tree.n_actions() {
        return Err(ModelError::DimensionMismatch {
            expected: tree.n_actions(),
            actual: a + 1,
        });
    }
    let (NodeRef::Leaf(lt), NodeRef::Leaf(lf)) = (node.left, node.right) else {
        unreachable!("validated single-node tree")
    };
    let x = [s];
    let (mu, nu, margin) = node.gate(&x);
    let y_true = tree.leaves()[lt].w[a];
    let y_false = tree.leaves()[lf].w[a];

    let mut g = GradientBuffer::zeros_like(tree);
    g.leaves[lt][a] = mu;
    g.leaves[lf][a] = nu;
    // Same operation order as the recursive pass so the two agree bit for bit.
    let c = 1.0 * (y_true - y_false) * mu * nu;
    let ng = &mut g.nodes[0];
    ng.alpha = if tree.alpha_trainable() { c * margin } else { 0.0 };
    ng.beta[0] = c * node.alpha * s;
    ng.phi = -(c * node.alpha);
    Ok(g)
}
