//! Analysis configuration, sampled curves and their files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::roots::{find_critical_points, interior_extrema, optimality_curve, CriticalPoints, Extremum};
use super::{delta_phi_pg, delta_phi_q, policy_value, q_leaves, wrong_action_prob, QLeafForm, QLeaves};
use crate::envs::{ChainMdpConfig, StartState};
use crate::error::TrainError;

pub const SUMMARY_VERSION: u32 = 1;

/// Which start states the update curves average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisStart {
    Fixed(usize),
    /// Uniform over `i*` and `i*+1`.
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub mdp: ChainMdpConfig,
    pub alpha: f64,
    /// Policy leaves as action probabilities `[P(a1), P(a2)]`.
    pub pg_true: [f64; 2],
    pub pg_false: [f64; 2],
    pub q_leaf_form: QLeafForm,
    pub phi_min: f64,
    pub phi_max: f64,
    pub grid_points: usize,
    /// Episode cap in steps, including the terminal step; `n` when unset.
    #[serde(default)]
    pub horizon: Option<usize>,
    pub start: AnalysisStart,
    /// Start state of the crisp-policy value curve.
    pub value_start: usize,
    /// Range of the wrong-action probability curve.
    pub wrong_action_range: [f64; 2],
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            mdp: ChainMdpConfig {
                start: StartState::Uniform,
                ..ChainMdpConfig::default()
            },
            alpha: 10.0,
            pg_true: [0.01, 0.99],
            pg_false: [0.99, 0.01],
            q_leaf_form: QLeafForm::Finite { terms: 4 },
            phi_min: 0.0,
            phi_max: 4.0,
            grid_points: 2001,
            horizon: None,
            start: AnalysisStart::Averaged,
            value_start: 3,
            wrong_action_range: [0.0, 5.0],
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        self.mdp.validate()?;
        if self.mdp.p < 1.0 {
            return bad("the analysis assumes deterministic moves (p = 1)".into());
        }
        if self.grid_points < 2 {
            return bad("the phi grid needs at least 2 points".into());
        }
        if !(self.phi_min < self.phi_max) || !self.phi_min.is_finite() || !self.phi_max.is_finite() {
            return bad(format!("bad phi range [{}, {}]", self.phi_min, self.phi_max));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be finite and non-negative, got {}", self.alpha));
        }
        for p in [self.pg_true, self.pg_false] {
            if p.iter().any(|v| !(*v > 0.0 && *v < 1.0)) || (p[0] + p[1] - 1.0).abs() > 1e-9 {
                return bad(format!("policy leaf {p:?} is not a strictly positive distribution"));
            }
        }
        if let AnalysisStart::Fixed(s) = self.start {
            if self.mdp.is_terminal(s) || s > self.mdp.n {
                return bad(format!("start state {s} is not an interior state"));
            }
        }
        if self.mdp.is_terminal(self.value_start) || self.value_start > self.mdp.n {
            return bad(format!(
                "value start state {} is not an interior state",
                self.value_start
            ));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(self.mdp.n)
    }

    pub fn q_leaves(&self) -> QLeaves {
        q_leaves(self.mdp.gamma, self.mdp.r_plus, self.mdp.r_minus, self.q_leaf_form)
    }

    pub fn grid(&self) -> Vec<f64> {
        grid(self.phi_min, self.phi_max, self.grid_points)
    }

    fn starts(&self) -> Vec<usize> {
        match self.start {
            AnalysisStart::Fixed(s) => vec![s],
            AnalysisStart::Averaged => vec![self.mdp.i_star, self.mdp.i_star + 1],
        }
    }

    /// Q-learning update of `phi` averaged over the configured start states.
    pub fn delta_q(&self, phi: f64) -> f64 {
        let leaves = self.q_leaves();
        let starts = self.starts();
        starts
            .iter()
            .map(|&s| delta_phi_q(phi, self.alpha, &leaves, &self.mdp, s, self.horizon()))
            .sum::<f64>()
            / starts.len() as f64
    }

    /// Policy-gradient update of `phi` from one start state.
    pub fn delta_pg_from(&self, phi: f64, start: usize) -> f64 {
        delta_phi_pg(
            phi,
            self.alpha,
            self.pg_true,
            self.pg_false,
            &self.mdp,
            start,
            self.horizon(),
        )
    }

    /// Policy-gradient update averaged over the configured start states.
    pub fn delta_pg(&self, phi: f64) -> f64 {
        let starts = self.starts();
        starts.iter().map(|&s| self.delta_pg_from(phi, s)).sum::<f64>() / starts.len() as f64
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// A sampled curve over `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub phi: Vec<f64>,
    pub value: Vec<f64>,
}

impl Curve {
    fn sample(grid: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self {
            phi: grid.to_vec(),
            value: grid.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["phi", "value"])?;
        for (p, v) in self.phi.iter().zip(&self.value) {
            w.write_record([p.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    pub config: AnalysisConfig,
    pub horizon: usize,
    pub q_leaves: QLeaves,
    pub root_counts: BTreeMap<String, usize>,
    pub roots: BTreeMap<String, CriticalPoints>,
    /// Policy-gradient roots for each single start state, keyed by state.
    pub pg_roots_by_start: BTreeMap<String, Vec<f64>>,
    pub extrema_counts: BTreeMap<String, usize>,
    pub optimality_extrema: BTreeMap<String, Vec<Extremum>>,
    /// Smallest and largest grid `phi` attaining the best crisp-policy value.
    pub best_value_phi: [f64; 2],
    pub wrong_action_argmin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub delta_q: Curve,
    pub delta_pg: Curve,
    pub optimality_q: Curve,
    pub optimality_pg: Curve,
    pub policy_value: Curve,
    pub wrong_action: Curve,
    pub summary: Summary,
}

impl AnalysisReport {
    pub fn compute(cfg: &AnalysisConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let g = cfg.grid();
        let delta_q = Curve::sample(&g, |p| cfg.delta_q(p));
        let delta_pg = Curve::sample(&g, |p| cfg.delta_pg(p));
        let q_cp = find_critical_points(&g, &delta_q.value, &|p| cfg.delta_q(p));
        let pg_cp = find_critical_points(&g, &delta_pg.value, &|p| cfg.delta_pg(p));

        let mut pg_roots_by_start = BTreeMap::new();
        for s in [cfg.mdp.i_star, cfg.mdp.i_star + 1] {
            let c = Curve::sample(&g, |p| cfg.delta_pg_from(p, s));
            let cp = find_critical_points(&g, &c.value, &|p| cfg.delta_pg_from(p, s));
            pg_roots_by_start.insert(s.to_string(), cp.roots);
        }

        let optimality_q = Curve {
            phi: g.clone(),
            value: optimality_curve(&g, &delta_q.value),
        };
        let optimality_pg = Curve {
            phi: g.clone(),
            value: optimality_curve(&g, &delta_pg.value),
        };
        let ext_q = interior_extrema(&g, &optimality_q.value);
        let ext_pg = interior_extrema(&g, &optimality_pg.value);

        let policy_value = Curve::sample(&g, |p| policy_value(p, &cfg.mdp, cfg.value_start, cfg.horizon()));
        let best = policy_value.value.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best_idx: Vec<usize> = (0..g.len()).filter(|&i| policy_value.value[i] == best).collect();
        let best_value_phi = [g[best_idx[0]], g[*best_idx.last().unwrap()]];

        let wg = grid(cfg.wrong_action_range[0], cfg.wrong_action_range[1], cfg.grid_points);
        let wrong_action = Curve::sample(&wg, |p| {
            wrong_action_prob(p, cfg.alpha, cfg.pg_true, cfg.pg_false, cfg.mdp.i_star)
        });
        let mut argmin = 0;
        for (i, v) in wrong_action.value.iter().enumerate() {
            if *v < wrong_action.value[argmin] {
                argmin = i;
            }
        }

        let pair = |q: usize, pg: usize| BTreeMap::from([("q".to_string(), q), ("pg".to_string(), pg)]);
        let summary = Summary {
            version: SUMMARY_VERSION,
            config: cfg.clone(),
            horizon: cfg.horizon(),
            q_leaves: cfg.q_leaves(),
            root_counts: pair(q_cp.roots.len(), pg_cp.roots.len()),
            roots: BTreeMap::from([("q".to_string(), q_cp), ("pg".to_string(), pg_cp)]),
            pg_roots_by_start,
            extrema_counts: pair(ext_q.len(), ext_pg.len()),
            optimality_extrema: BTreeMap::from([("q".to_string(), ext_q), ("pg".to_string(), ext_pg)]),
            best_value_phi,
            wrong_action_argmin: wg[argmin],
        };
        Ok(Self {
            delta_q,
            delta_pg,
            optimality_q,
            optimality_pg,
            policy_value,
            wrong_action,
            summary,
        })
    }
}

/// Computes the report and writes `delta_phi_q.csv`, `delta_phi_pg.csv`,
/// `optimality_q.csv`, `optimality_pg.csv`, `policy_value.csv`,
/// `wrong_action.csv` and `summary.json` into `dir`. Returns the report and
/// the written paths.
pub fn emit_report(cfg: &AnalysisConfig, dir: &Path) -> Result<(AnalysisReport, Vec<PathBuf>), TrainError> {
    let report = AnalysisReport::compute(cfg)?;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, curve) in [
        ("delta_phi_q.csv", &report.delta_q),
        ("delta_phi_pg.csv", &report.delta_pg),
        ("optimality_q.csv", &report.optimality_q),
        ("optimality_pg.csv", &report.optimality_pg),
        ("policy_value.csv", &report.policy_value),
        ("wrong_action.csv", &report.wrong_action),
    ] {
        let path = dir.join(name);
        curve.write_csv(&path)?;
        paths.push(path);
    }
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    std::fs::write(&path, json + "\n")?;
    paths.push(path);
    Ok((report, paths))
}
