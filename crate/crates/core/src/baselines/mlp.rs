use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ModelError};
use crate::train::Policy;
use crate::tree::softmax;

/// Fully connected layer, `y = W x + b` with `W` stored row-major (out x in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: vec![vec![0.0; inputs]; outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn outputs(&self) -> usize {
        self.bias.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Feedforward policy: ReLU hidden layers and a softmax head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPolicy {
    pub layers: Vec<DenseLayer>,
}

impl MlpPolicy {
    /// All-zero network; its output is the uniform distribution.
    pub fn zeros(d: usize, hidden: &[usize], n_actions: usize) -> Self {
        let mut dims = vec![d];
        dims.extend_from_slice(hidden);
        dims.push(n_actions);
        Self {
            layers: dims.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn random<R: Rng + ?Sized>(d: usize, hidden: &[usize], n_actions: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(d, hidden, n_actions);
        for layer in &mut m.layers {
            let bound = 1.0 / (layer.inputs().max(1) as f64).sqrt();
            for row in &mut layer.weights {
                for w in row.iter_mut() {
                    *w = rng.random_range(-bound..bound);
                }
            }
        }
        m
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers.is_empty() {
            return Err(ModelError::InvalidStructure("MLP has no layers".into()));
        }
        if self.layers.len() > 3 {
            return Err(ModelError::InvalidStructure(format!(
                "MLP has {} hidden layers, at most 2 are supported",
                self.layers.len() - 1
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.bias.len() || l.weights.iter().any(|r| r.len() != l.inputs()) {
                return Err(ModelError::InvalidStructure(format!("layer {i} has ragged weights")));
            }
            if i > 0 && self.layers[i - 1].outputs() != l.inputs() {
                return Err(ModelError::InvalidStructure(format!(
                    "layer {i} takes {} inputs but layer {} produces {}",
                    l.inputs(),
                    i - 1,
                    self.layers[i - 1].outputs()
                )));
            }
        }
        if self.n_actions_inner() < 1 {
            return Err(ModelError::InvalidStructure("MLP has no outputs".into()));
        }
        Ok(())
    }

    fn n_actions_inner(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::outputs)
    }

    /// Input of each layer, plus the output logits at the end.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(acts.last().unwrap());
            if i + 1 < self.layers.len() {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.layers[0].inputs(), x.len())?;
        Ok(softmax(self.activations(x).last().unwrap()))
    }

    /// Gradient of `<upstream, forward(x)>` over the flat parameters.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.layers[0].inputs(), x.len())?;
        check_dim(self.n_actions_inner(), upstream.len())?;
        let acts = self.activations(x);
        let p = softmax(acts.last().unwrap());
        let mean: f64 = upstream.iter().zip(&p).map(|(u, p)| u * p).sum();
        // Gradient with respect to the current layer's output.
        let mut delta: Vec<f64> = p.iter().zip(upstream).map(|(p, u)| p * (u - mean)).collect();
        let mut per_layer: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &acts[i];
            let mut g = Vec::with_capacity(layer.outputs() * (layer.inputs() + 1));
            for &dk in &delta {
                g.extend(input.iter().map(|v| dk * v));
            }
            g.extend_from_slice(&delta);
            per_layer[i] = g;
            if i > 0 {
                let mut prev = vec![0.0; layer.inputs()];
                for (row, &dk) in layer.weights.iter().zip(&delta) {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * dk;
                    }
                }
                // ReLU derivative, taken as zero at the kink.
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(per_layer.concat())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MLP serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

impl Policy for MlpPolicy {
    fn obs_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    fn n_actions(&self) -> usize {
        self.n_actions_inner()
    }

    fn action_probs(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.forward(x)
    }

    fn grad_probs(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.backward(x, upstream)
    }

    /// Layer by layer: weights row-major, then biases.
    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for row in &l.weights {
                p.extend_from_slice(row);
            }
            p.extend_from_slice(&l.bias);
        }
        p
    }

    fn set_params(&mut self, p: &[f64]) -> Result<(), ModelError> {
        if p.len() != self.param_count() {
            return Err(ModelError::ParamLength {
                expected: self.param_count(),
                actual: p.len(),
            });
        }
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for row in &mut l.weights {
                for w in row.iter_mut() {
                    *w = it.next().unwrap();
                }
            }
            for b in &mut l.bias {
                *b = it.next().unwrap();
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_uniform() {
        let m = MlpPolicy::zeros(4, &[8], 3);
        for p in m.forward(&[1.0, -2.0, 0.5, 3.0]).unwrap() {
            assert_eq!(p, 1.0 / 3.0);
        }
    }

    #[test]
    fn linear_softmax_gradient_closed_form() {
        // With no hidden layer, d p_k / d W_ij = p_k ([k = i] - p_i) x_j.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MlpPolicy::random(3, &[], 2, &mut rng);
        let x = [0.4, -1.2, 2.0];
        let p = m.forward(&x).unwrap();
        for k in 0..2 {
            let mut u = vec![0.0; 2];
            u[k] = 1.0;
            let g = m.backward(&x, &u).unwrap();
            let mut expected = Vec::new();
            for i in 0..2 {
                let c = p[k] * (if i == k { 1.0 } else { 0.0 } - p[i]);
                expected.extend(x.iter().map(|xj| c * xj));
            }
            for i in 0..2 {
                expected.push(p[k] * (if i == k { 1.0 } else { 0.0 } - p[i]));
            }
            assert_eq!(g.len(), expected.len());
            for (a, b) in g.iter().zip(&expected) {
                assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for case in 0..200 {
            let hidden: Vec<usize> = (0..case % 3).map(|_| rng.random_range(2..6)).collect();
            let d = rng.random_range(1..5);
            let k = rng.random_range(2..4);
            let mut m = MlpPolicy::zeros(d, &hidden, k);
            // Random biases keep hidden pre-activations off the ReLU kink at zero.
            let p: Vec<f64> = (0..m.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            m.set_params(&p).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let u: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = m.backward(&x, &u).unwrap();
            let base = m.params();
            let mut mm = m.clone();
            let f = |mm: &MlpPolicy| -> f64 { mm.forward(&x).unwrap().iter().zip(&u).map(|(p, u)| p * u).sum() };
            let h = 1e-6;
            for i in 0..base.len() {
                let mut p = base.clone();
                p[i] += h;
                mm.set_params(&p).unwrap();
                let fp = f(&mm);
                p[i] = base[i] - h;
                mm.set_params(&p).unwrap();
                let fm = f(&mm);
                let num = (fp - fm) / (2.0 * h);
                if (g[i] - num).abs() < 1e-7 {
                    continue;
                }
                worst = worst.max((g[i] - num).abs() / g[i].abs().max(num.abs()));
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn params_round_trip_and_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = MlpPolicy::random(4, &[5, 3], 2, &mut rng);
        let mut z = MlpPolicy::zeros(4, &[5, 3], 2);
        z.set_params(&m.params()).unwrap();
        assert_eq!(z, m);
        let back = MlpPolicy::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(z.set_params(&[0.0; 3]).is_err());
    }

    #[test]
    fn broken_layer_chain_is_rejected() {
        let mut m = MlpPolicy::zeros(2, &[3], 2);
        m.layers[1].weights = vec![vec![0.0; 4]; 2];
        assert!(m.validate().is_err());
        assert!(MlpPolicy::from_json(&m.to_json()).is_err());
    }

    #[test]
    fn wrong_input_length() {
        let m = MlpPolicy::zeros(2, &[], 2);
        assert!(matches!(m.forward(&[1.0]), Err(ModelError::DimensionMismatch { .. })));
    }
}
