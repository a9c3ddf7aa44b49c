//! Threshold-update analysis of a single-node tree on the chain MDP.
//!
//! The tree tests `s > phi` with steepness `alpha` (so `mu = sigmoid(alpha (s - phi))`
//! weights the TRUE leaf). For a given `phi` we sum the `phi` component of the
//! per-step Q-learning or policy-gradient update over whole episodes, exactly:
//! Q episodes are deterministic, and policy-gradient episodes are enumerated
//! with their probabilities up to the horizon. Zeros of these curves are the
//! points where gradient descent on `phi` stalls.

mod report;
mod roots;

pub use report::{emit_report, AnalysisConfig, AnalysisReport, AnalysisStart, Curve, Summary, SUMMARY_VERSION};
pub use roots::{find_critical_points, interior_extrema, optimality_curve, CriticalPoints, Extremum, ExtremumKind};

use serde::{Deserialize, Serialize};

use crate::envs::{ChainMdpConfig, TerminalReward};
use crate::tree::{sigmoid, Interpretation, SoftTree};

/// Index of the action moving toward higher states.
const A1: usize = 0;
/// Index of the action moving toward lower states.
const A2: usize = 1;

/// Per-action values held by the two leaves of a Q tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QLeaves {
    pub true_a1: f64,
    pub true_a2: f64,
    pub false_a1: f64,
    pub false_a2: f64,
}

impl QLeaves {
    pub fn true_leaf(&self) -> [f64; 2] {
        [self.true_a1, self.true_a2]
    }

    pub fn false_leaf(&self) -> [f64; 2] {
        [self.false_a1, self.false_a2]
    }
}

/// How the value of the optimal actions is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QLeafForm {
    /// `r+ (1 + gamma + ... + gamma^(terms-1))`.
    Finite { terms: usize },
    /// `r+ / (1 - gamma)`.
    Infinite,
}

/// Leaf values for the optimal policy (a1 below the threshold, a2 above).
/// Suboptimal actions are worth `r+ + gamma r-`.
pub fn q_leaves(gamma: f64, r_plus: f64, r_minus: f64, form: QLeafForm) -> QLeaves {
    let good = match form {
        QLeafForm::Finite { terms } => {
            let mut acc = 0.0;
            let mut g = 1.0;
            for _ in 0..terms {
                acc += g;
                g *= gamma;
            }
            r_plus * acc
        }
        QLeafForm::Infinite => r_plus / (1.0 - gamma),
    };
    let bad = r_plus + gamma * r_minus;
    QLeaves {
        true_a1: bad,
        true_a2: good,
        false_a1: good,
        false_a2: bad,
    }
}

/// Leaf values for the four-state chain: the optimal actions are worth
/// `r+ (1 + gamma + gamma^2 + gamma^3)`.
pub fn optimal_q_leaves(gamma: f64, r_plus: f64, r_minus: f64) -> QLeaves {
    q_leaves(gamma, r_plus, r_minus, QLeafForm::Finite { terms: 4 })
}

/// Geometry shared by all the single-node computations.
#[derive(Debug, Clone, Copy)]
struct Split {
    alpha: f64,
    phi: f64,
}

impl Split {
    fn z(&self, s: usize) -> f64 {
        self.alpha * (s as f64 - self.phi)
    }

    fn mu(&self, s: usize) -> f64 {
        sigmoid(self.z(s))
    }

    /// `d mu / d phi = -alpha mu (1 - mu)`.
    fn dmu_dphi(&self, s: usize) -> f64 {
        let z = self.z(s);
        -self.alpha * sigmoid(z) * sigmoid(-z)
    }

    fn mix(&self, s: usize, t: [f64; 2], f: [f64; 2], a: usize) -> f64 {
        let m = self.mu(s);
        m * t[a] + (1.0 - m) * f[a]
    }
}

fn next_state(s: usize, a: usize) -> usize {
    if a == A1 {
        s + 1
    } else {
        s - 1
    }
}

fn state_reward(mdp: &ChainMdpConfig, s: usize) -> f64 {
    if mdp.is_terminal(s) {
        mdp.r_minus
    } else {
        mdp.state_reward(s)
    }
}

/// Whether a terminal state is visited for a final step.
fn terminal_step(mdp: &ChainMdpConfig) -> bool {
    mdp.terminal == TerminalReward::Penalty
}

/// Summed Q-learning update of `phi` over the greedy episode from `start`.
///
/// Each visited state-action pair contributes `(target - Q(s, a)) dQ(s, a)/dphi`
/// where the target bootstraps with `gamma max_a' Q(s', a')` except on the
/// terminal step. Greedy ties go to a1. The episode has at most `horizon`
/// steps, including the terminal step.
pub fn delta_phi_q(phi: f64, alpha: f64, leaves: &QLeaves, mdp: &ChainMdpConfig, start: usize, horizon: usize) -> f64 {
    let sp = Split { alpha, phi };
    let (t, f) = (leaves.true_leaf(), leaves.false_leaf());
    let q = |s: usize, a: usize| sp.mix(s, t, f, a);
    let greedy = |s: usize| if q(s, A1) >= q(s, A2) { A1 } else { A2 };
    let max_q = |s: usize| q(s, A1).max(q(s, A2));
    let mut total = 0.0;
    let mut s = start;
    for _ in 0..horizon {
        let a = greedy(s);
        let target = if mdp.is_terminal(s) {
            mdp.r_minus
        } else {
            let s2 = next_state(s, a);
            if mdp.is_terminal(s2) && !terminal_step(mdp) {
                mdp.state_reward(s)
            } else {
                mdp.state_reward(s) + mdp.gamma * max_q(s2)
            }
        };
        let dq = (t[a] - f[a]) * sp.dmu_dphi(s);
        total += (target - q(s, a)) * dq;
        if mdp.is_terminal(s) {
            break;
        }
        s = next_state(s, a);
        if mdp.is_terminal(s) && !terminal_step(mdp) {
            break;
        }
    }
    total
}

/// Expected policy-gradient update of `phi`, `E[sum_t A_t dlog pi(a_t|s_t)/dphi]`,
/// over all action sequences from `start` up to `horizon` steps. Returns are
/// discounted from each step onward and include the terminal penalty; the
/// terminal step's own action carries no gradient since its return does not
/// depend on it.
pub fn delta_phi_pg(
    phi: f64,
    alpha: f64,
    true_probs: [f64; 2],
    false_probs: [f64; 2],
    mdp: &ChainMdpConfig,
    start: usize,
    horizon: usize,
) -> f64 {
    let sp = Split { alpha, phi };
    let ctx = PgCtx {
        sp,
        t: true_probs,
        f: false_probs,
        mdp,
        horizon,
    };
    let mut path = Vec::with_capacity(horizon);
    ctx.enumerate(start, 1.0, &mut path)
}

struct PgCtx<'a> {
    sp: Split,
    t: [f64; 2],
    f: [f64; 2],
    mdp: &'a ChainMdpConfig,
    horizon: usize,
}

impl PgCtx<'_> {
    fn pi(&self, s: usize, a: usize) -> f64 {
        self.sp.mix(s, self.t, self.f, a)
    }

    fn dlog_pi(&self, s: usize, a: usize) -> f64 {
        (self.t[a] - self.f[a]) * self.sp.dmu_dphi(s) / self.pi(s, a)
    }

    /// `path` holds (state, action) pairs taken so far.
    fn enumerate(&self, s: usize, prob: f64, path: &mut Vec<(usize, usize)>) -> f64 {
        let ended = self.mdp.is_terminal(s) || path.len() == self.horizon;
        if ended {
            let mut rewards: Vec<f64> = path.iter().map(|&(s, _)| self.mdp.state_reward(s)).collect();
            if self.mdp.is_terminal(s) && terminal_step(self.mdp) && path.len() < self.horizon {
                rewards.push(self.mdp.r_minus);
            }
            let mut acc = 0.0;
            let mut returns = vec![0.0; rewards.len()];
            for k in (0..rewards.len()).rev() {
                acc = rewards[k] + self.mdp.gamma * acc;
                returns[k] = acc;
            }
            let g: f64 = path
                .iter()
                .zip(&returns)
                .map(|(&(s, a), ret)| ret * self.dlog_pi(s, a))
                .sum();
            return prob * g;
        }
        let mut total = 0.0;
        for a in [A1, A2] {
            let p = self.pi(s, a);
            if p == 0.0 {
                continue;
            }
            path.push((s, a));
            total += self.enumerate(next_state(s, a), prob * p, path);
            path.pop();
        }
        total
    }
}

/// Discounted return of the crisp threshold policy (a2 when `s > phi`,
/// otherwise a1) from `start`, over at most `horizon` steps.
pub fn policy_value(phi: f64, mdp: &ChainMdpConfig, start: usize, horizon: usize) -> f64 {
    let mut s = start;
    let mut value = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        if mdp.is_terminal(s) && !terminal_step(mdp) {
            break;
        }
        value += discount * state_reward(mdp, s);
        if mdp.is_terminal(s) {
            break;
        }
        discount *= mdp.gamma;
        s = next_state(s, if s as f64 > phi { A2 } else { A1 });
    }
    value
}

/// Average probability of the wrong action in the two reward states,
/// `(pi(i*, a2) + pi(i*+1, a1)) / 2`, for a single-node policy tree.
pub fn wrong_action_prob(phi: f64, alpha: f64, true_probs: [f64; 2], false_probs: [f64; 2], i_star: usize) -> f64 {
    let logits = |p: [f64; 2]| p.iter().map(|v| v.ln()).collect::<Vec<f64>>();
    let tree = SoftTree::single_node(
        alpha,
        1.0,
        phi,
        logits(true_probs),
        logits(false_probs),
        Interpretation::Policy,
    )
    .expect("single-node tree is well formed");
    let lo = tree.eval_soft(&[i_star as f64]).expect("one feature");
    let hi = tree.eval_soft(&[(i_star + 1) as f64]).expect("one feature");
    0.5 * (lo[A2] + hi[A1])
}

/// Optimal Q-values `[Q(s, a1), Q(s, a2)]` for every state by value iteration
/// under deterministic moves, indexed by `s - 1`.
pub fn value_iteration(mdp: &ChainMdpConfig, tol: f64, max_iter: usize) -> Vec<[f64; 2]> {
    let n = mdp.n;
    let mut q: Vec<[f64; 2]> = vec![[0.0; 2]; n];
    let terminal_value = if terminal_step(mdp) { mdp.r_minus } else { 0.0 };
    for _ in 0..max_iter {
        let mut next = q.clone();
        let mut change: f64 = 0.0;
        for s in 1..=n {
            for a in [A1, A2] {
                let v = if mdp.is_terminal(s) {
                    terminal_value
                } else {
                    let s2 = next_state(s, a);
                    let cont = if mdp.is_terminal(s2) {
                        terminal_value
                    } else {
                        q[s2 - 1][A1].max(q[s2 - 1][A2])
                    };
                    mdp.state_reward(s) + mdp.gamma * cont
                };
                change = change.max((v - q[s - 1][a]).abs());
                next[s - 1][a] = v;
            }
        }
        q = next;
        if change < tol {
            break;
        }
    }
    q
}
