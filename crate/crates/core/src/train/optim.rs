use serde::{Deserialize, Serialize};

use crate::error::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascent,
    Descent,
}

/// RMSProp: `v <- rho v + (1 - rho) g^2`, `theta <- theta +/- lr g / (sqrt(v) + eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub rho: f64,
    pub eps: f64,
    /// Squared-gradient moving average, created on first use.
    pub v: Vec<f64>,
}

impl RmsProp {
    pub fn new(learning_rate: f64, rho: f64, eps: f64) -> Self {
        Self {
            learning_rate,
            rho,
            eps,
            v: Vec::new(),
        }
    }

    /// Updates `params` in place. Entries flagged in `frozen` are left alone
    /// (their moving average still decays).
    pub fn apply(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        frozen: &[bool],
        direction: Direction,
    ) -> Result<(), TrainError> {
        if grads.len() != params.len() {
            return Err(TrainError::ParamMismatch {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(TrainError::NonFinite(format!("gradient entry {i}")));
        }
        if self.v.is_empty() {
            self.v = vec![0.0; params.len()];
        } else if self.v.len() != params.len() {
            return Err(TrainError::ParamMismatch {
                expected: self.v.len(),
                actual: params.len(),
            });
        }
        let sign = match direction {
            Direction::Ascent => 1.0,
            Direction::Descent => -1.0,
        };
        for i in 0..params.len() {
            let g = grads[i];
            self.v[i] = self.rho * self.v[i] + (1.0 - self.rho) * g * g;
            if frozen.get(i).copied().unwrap_or(false) {
                continue;
            }
            params[i] += sign * self.learning_rate * g / (self.v[i].sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_decays_average_only() {
        let mut opt = RmsProp::new(1e-2, 0.99, 1e-8);
        opt.v = vec![4.0, 1.0];
        let mut p = vec![1.0, -2.0];
        opt.apply(&mut p, &[0.0, 0.0], &[], Direction::Ascent).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(opt.v, vec![0.99 * 4.0, 0.99]);
    }

    #[test]
    fn first_step_magnitude() {
        let mut opt = RmsProp::new(1e-2, 0.99, 1e-8);
        let mut p = vec![0.0];
        opt.apply(&mut p, &[1.0], &[], Direction::Ascent).unwrap();
        let expected = 1e-2 / (0.01f64.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.1).abs() < 1e-6);
        let mut q = vec![0.0];
        RmsProp::new(1e-2, 0.99, 1e-8)
            .apply(&mut q, &[1.0], &[], Direction::Descent)
            .unwrap();
        assert_eq!(q[0], -p[0]);
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut opt = RmsProp::new(0.05, 0.9, 1e-8);
        let mut p = vec![0.3, 0.3];
        for _ in 0..5 {
            opt.apply(&mut p, &[0.7, 0.7], &[], Direction::Descent).unwrap();
        }
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn mismatch_and_non_finite_are_errors() {
        let mut opt = RmsProp::new(0.1, 0.9, 1e-8);
        let mut p = vec![0.0; 2];
        assert!(matches!(
            opt.apply(&mut p, &[1.0], &[], Direction::Ascent),
            Err(TrainError::ParamMismatch { .. })
        ));
        assert!(matches!(
            opt.apply(&mut p, &[1.0, f64::NAN], &[], Direction::Ascent),
            Err(TrainError::NonFinite(_))
        ));
        assert_eq!(p, vec![0.0; 2]);
    }

    #[test]
    fn frozen_entries_do_not_move() {
        let mut opt = RmsProp::new(0.1, 0.9, 1e-8);
        let mut p = vec![1.0, 1.0];
        opt.apply(&mut p, &[1.0, 1.0], &[true, false], Direction::Ascent)
            .unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] > 1.0);
    }
}
