use super::{CrispNode, CrispPolicy};

/// Removes redundant decisions until nothing changes.
///
/// Two rewrites are applied: a test already decided by the ancestors' tests on
/// the same feature is replaced by the branch it always takes, and a test whose
/// two subtrees are identical is replaced by that subtree. Both preserve the
/// action chosen at every input.
pub fn prune(policy: &CrispPolicy) -> CrispPolicy {
    let mut root = policy.root.clone();
    loop {
        // Each feature is known to lie in the half-open interval (lo, hi].
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); policy.d];
        let next = prune_at(&root, &mut bounds);
        if next == root {
            break;
        }
        root = next;
    }
    CrispPolicy { root, ..policy.clone() }
}

fn prune_at(node: &CrispNode, bounds: &mut [(f64, f64)]) -> CrispNode {
    match node {
        CrispNode::Leaf(a) => CrispNode::Leaf(*a),
        CrispNode::Split {
            feature,
            threshold,
            t,
            f,
        } => {
            let (lo, hi) = bounds[*feature];
            if lo >= *threshold {
                return prune_at(t, bounds);
            }
            if hi <= *threshold {
                return prune_at(f, bounds);
            }
            bounds[*feature] = (threshold.max(lo), hi);
            let t = prune_at(t, bounds);
            bounds[*feature] = (lo, threshold.min(hi));
            let f = prune_at(f, bounds);
            bounds[*feature] = (lo, hi);
            if t == f {
                t
            } else {
                CrispNode::split(*feature, *threshold, t, f)
            }
        }
    }
}
