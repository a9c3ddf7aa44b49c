//! Two drones tracking two drifting fires on a square map.
//!
//! Positions are `(east, north)` in map units with the origin at the
//! south-west corner. Fires start near the south-east corner and drift toward
//! the north-west with a little Gaussian jitter. Each drone sees, for each
//! fire, how far north and how far west the fire is (negative when it is
//! south or east), scaled by `distance_scale`, plus a flag for whichever fire
//! is nearer to that drone. Both drones are driven by the same policy and
//! cannot communicate. The shared reward is the negative sum, over fires, of
//! the distance from the fire to its nearest drone, divided by `reward_scale`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_actions, Environment, Transition};
use crate::error::EnvError;

pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;
pub const STAY: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireSpec {
    /// Initial centroid `(east, north)`.
    pub start: [f64; 2],
    /// Drift per step `(east, north)`.
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WildfireScenario {
    pub map_size: f64,
    pub fires: [FireSpec; 2],
    /// Fixed drone start positions; uniform over the map when absent.
    #[serde(default)]
    pub drone_starts: Option<[[f64; 2]; 2]>,
    pub drone_speed: f64,
    pub jitter_sigma: f64,
    pub horizon: usize,
    pub reward_scale: f64,
    pub distance_scale: f64,
}

impl Default for WildfireScenario {
    fn default() -> Self {
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            map_size: 500.0,
            fires: [
                FireSpec {
                    start: [450.0, 150.0],
                    velocity: [-diag, diag],
                },
                FireSpec {
                    start: [350.0, 50.0],
                    velocity: [-diag, diag],
                },
            ],
            drone_starts: None,
            drone_speed: 5.0,
            jitter_sigma: 0.25,
            horizon: 300,
            reward_scale: 500.0,
            distance_scale: 100.0,
        }
    }
}

impl WildfireScenario {
    pub fn from_file(path: &std::path::Path) -> Result<Self, EnvError> {
        let s: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if !(self.map_size > 0.0) {
            return bad("map_size must be positive");
        }
        if !(self.reward_scale > 0.0 && self.distance_scale > 0.0) {
            return bad("reward_scale and distance_scale must be positive");
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return bad("jitter_sigma must be finite and non-negative");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        let inside = |p: &[f64; 2]| p.iter().all(|v| (0.0..=self.map_size).contains(v));
        if !self.fires.iter().all(|f| inside(&f.start)) {
            return bad("fire starts must lie on the map");
        }
        if let Some(d) = &self.drone_starts {
            if !d.iter().all(inside) {
                return bad("drone starts must lie on the map");
            }
        }
        Ok(())
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Shared reward for the given drone and fire positions.
pub fn wildfire_reward(drones: &[[f64; 2]; 2], fires: &[[f64; 2]; 2], reward_scale: f64) -> f64 {
    let mut total = 0.0;
    for f in fires {
        total += distance(drones[0], *f).min(distance(drones[1], *f));
    }
    -total / reward_scale
}

pub struct Wildfire {
    scenario: WildfireScenario,
    drones: [[f64; 2]; 2],
    fires: [[f64; 2]; 2],
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
    jitter: Normal<f64>,
}

impl Wildfire {
    pub fn new(scenario: WildfireScenario) -> Result<Self, EnvError> {
        scenario.validate()?;
        let jitter = Normal::new(0.0, scenario.jitter_sigma).map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            drones: [[0.0; 2]; 2],
            fires: [scenario.fires[0].start, scenario.fires[1].start],
            scenario,
            steps: 0,
            done: true,
            rng: ChaCha8Rng::seed_from_u64(0),
            jitter,
        })
    }

    pub fn drones(&self) -> [[f64; 2]; 2] {
        self.drones
    }

    pub fn fires(&self) -> [[f64; 2]; 2] {
        self.fires
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        let m = self.scenario.map_size;
        [p[0].clamp(0.0, m), p[1].clamp(0.0, m)]
    }

    fn observe(&self) -> Vec<Vec<f64>> {
        let scale = self.scenario.distance_scale;
        self.drones
            .iter()
            .map(|d| {
                let closer_to_first = distance(*d, self.fires[0]) <= distance(*d, self.fires[1]);
                let mut obs = Vec::with_capacity(6);
                for (k, f) in self.fires.iter().enumerate() {
                    obs.push((f[1] - d[1]) / scale);
                    obs.push((d[0] - f[0]) / scale);
                    obs.push(if closer_to_first == (k == 0) { 1.0 } else { 0.0 });
                }
                obs
            })
            .collect()
    }
}

impl Environment for Wildfire {
    fn name(&self) -> &'static str {
        "wildfire"
    }

    fn obs_dim(&self) -> usize {
        6
    }

    fn n_actions(&self) -> usize {
        5
    }

    fn n_agents(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.scenario.map_size;
        self.drones = match self.scenario.drone_starts {
            Some(d) => d,
            None => {
                let mut draw = || [self.rng.random_range(0.0..=m), self.rng.random_range(0.0..=m)];
                [draw(), draw()]
            }
        };
        self.fires = [self.scenario.fires[0].start, self.scenario.fires[1].start];
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, actions: &[usize]) -> Result<Transition, EnvError> {
        check_actions(actions, 2, 5)?;
        if self.done {
            return Err(EnvError::StepFromTerminal {
                state: format!("drones {:?}, fires {:?}", self.drones, self.fires),
            });
        }
        let v = self.scenario.drone_speed;
        for (d, &a) in actions.iter().enumerate() {
            let delta = match a {
                NORTH => [0.0, v],
                EAST => [v, 0.0],
                SOUTH => [0.0, -v],
                WEST => [-v, 0.0],
                _ => [0.0, 0.0],
            };
            let p = self.drones[d];
            self.drones[d] = self.clamp([p[0] + delta[0], p[1] + delta[1]]);
        }
        for k in 0..2 {
            let vel = self.scenario.fires[k].velocity;
            let jx = self.jitter.sample(&mut self.rng);
            let jy = self.jitter.sample(&mut self.rng);
            let f = self.fires[k];
            self.fires[k] = self.clamp([f[0] + vel[0] + jx, f[1] + vel[1] + jy]);
        }
        self.steps += 1;
        self.done = self.steps >= self.scenario.horizon;
        Ok(Transition {
            obs: self.observe(),
            reward: wildfire_reward(&self.drones, &self.fires, self.scenario.reward_scale),
            done: self.done,
        })
    }

    fn feature_names(&self) -> Vec<String> {
        [
            "fire1_north",
            "fire1_west",
            "closer_to_fire1",
            "fire2_north",
            "fire2_west",
            "closer_to_fire2",
        ]
        .map(String::from)
        .to_vec()
    }

    fn action_names(&self) -> Vec<String> {
        ["north", "east", "south", "west", "stay"].map(String::from).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reward_zero_when_drones_on_fires() {
        let fires = [[10.0, 20.0], [300.0, 40.0]];
        assert_eq!(wildfire_reward(&fires, &fires, 500.0), 0.0);
        assert_eq!(wildfire_reward(&[fires[1], fires[0]], &fires, 500.0), 0.0);
    }

    #[test]
    fn reward_negative_when_one_fire_uncovered() {
        let fires = [[10.0, 20.0], [310.0, 420.0]];
        let r = wildfire_reward(&[[10.0, 20.0], [0.0, 0.0]], &fires, 500.0);
        // First fire covered exactly; second is nearest to the drone on fire 1.
        assert!((r - -500.0 / 500.0).abs() < 1e-12);
    }

    #[test]
    fn observation_layout() {
        let mut env = Wildfire::new(WildfireScenario {
            drone_starts: Some([[100.0, 100.0], [400.0, 100.0]]),
            ..WildfireScenario::default()
        })
        .unwrap();
        let obs = env.reset(0);
        // Drone 0 at (100, 100): fire 1 at (450, 150) is 50 north, 350 east.
        assert_eq!(obs[0][0], 0.5);
        assert_eq!(obs[0][1], -3.5);
        // Fire 2 at (350, 50): 50 south, 250 east; it is the nearer one.
        assert_eq!(obs[0][3], -0.5);
        assert_eq!(obs[0][4], -2.5);
        assert_eq!((obs[0][2], obs[0][5]), (0.0, 1.0));
        // Drone 1 at (400, 100): distances are equal, ties go to fire 1.
        assert_eq!((obs[1][2], obs[1][5]), (1.0, 0.0));
    }

    #[test]
    fn drones_move_and_clamp() {
        let mut env = Wildfire::new(WildfireScenario {
            drone_starts: Some([[0.0, 498.0], [250.0, 250.0]]),
            ..WildfireScenario::default()
        })
        .unwrap();
        env.reset(0);
        env.step(&[NORTH, WEST]).unwrap();
        assert_eq!(env.drones(), [[0.0, 500.0], [245.0, 250.0]]);
        env.step(&[WEST, STAY]).unwrap();
        assert_eq!(env.drones(), [[0.0, 500.0], [245.0, 250.0]]);
        env.step(&[EAST, SOUTH]).unwrap();
        assert_eq!(env.drones(), [[5.0, 500.0], [245.0, 245.0]]);
        assert!(matches!(
            env.step(&[5, 0]),
            Err(EnvError::InvalidAction { action: 5, .. })
        ));
        assert!(matches!(env.step(&[0]), Err(EnvError::AgentCount { .. })));
    }

    #[test]
    fn horizon_ends_episode() {
        let mut env = Wildfire::new(WildfireScenario {
            horizon: 3,
            ..WildfireScenario::default()
        })
        .unwrap();
        env.reset(1);
        assert!(!env.step(&[STAY, STAY]).unwrap().done);
        assert!(!env.step(&[STAY, STAY]).unwrap().done);
        assert!(env.step(&[STAY, STAY]).unwrap().done);
        assert!(env.step(&[STAY, STAY]).is_err());
    }

    #[test]
    fn first_fire_step_is_drift_plus_seeded_jitter() {
        let scenario = WildfireScenario {
            drone_starts: Some([[0.0, 0.0], [0.0, 0.0]]),
            ..WildfireScenario::default()
        };
        let mut env = Wildfire::new(scenario.clone()).unwrap();
        env.reset(7);
        env.step(&[STAY, STAY]).unwrap();
        // Same stream, drawn independently: x then y jitter for fire 1, then fire 2.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 0.25).unwrap();
        let j: Vec<f64> = (0..4).map(|_| normal.sample(&mut rng)).collect();
        let d = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [
            [450.0 - d + j[0], 150.0 + d + j[1]],
            [350.0 - d + j[2], 50.0 + d + j[3]],
        ];
        assert_eq!(env.fires(), expected);
    }

    #[test]
    fn golden_fire_trace() {
        let mut env = Wildfire::new(WildfireScenario::default()).unwrap();
        env.reset(2024);
        let mut trace = Vec::new();
        for _ in 0..10 {
            env.step(&[STAY, STAY]).unwrap();
            trace.push(env.fires());
        }
        let golden: Vec<[[f64; 2]; 2]> =
            serde_json::from_str(include_str!("../../tests/fixtures/wildfire_fire_trace.json")).unwrap();
        assert_eq!(trace, golden);
    }

    #[test]
    fn scenario_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        let s = WildfireScenario {
            horizon: 50,
            ..WildfireScenario::default()
        };
        std::fs::write(&path, serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(WildfireScenario::from_file(&path).unwrap(), s);
        std::fs::write(&path, "{").unwrap();
        assert!(WildfireScenario::from_file(&path).is_err());
    }

    proptest! {
        #[test]
        fn reward_nonpositive_and_monotone(
            d0 in prop::array::uniform2(0.0f64..500.0), d1 in prop::array::uniform2(0.0f64..500.0),
            f0 in prop::array::uniform2(0.0f64..500.0), f1 in prop::array::uniform2(0.0f64..500.0),
            shrink in 0.0f64..1.0,
        ) {
            let fires = [f0, f1];
            let r = wildfire_reward(&[d0, d1], &fires, 500.0);
            prop_assert!(r <= 0.0);
            // Moving drone 0 toward fire 0 never lowers the reward.
            let moved = [d0[0] + shrink * (f0[0] - d0[0]), d0[1] + shrink * (f0[1] - d0[1])];
            let r2 = wildfire_reward(&[moved, d1], &fires, 500.0);
            prop_assert!(r2 >= r - 1e-12 || distance(moved, f1) > distance(d0, f1));
        }
    }
}
