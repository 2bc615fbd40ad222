//! Fully connected Q-network: ReLU hidden layers, linear output, one output
//! per discrete action. Gradients are computed by hand-written backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine layer with `weights` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Network parameters. Also used as the container for gradients and
/// optimizer accumulators, which share the parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub layers: Vec<Dense>,
}

/// One regression sample: input features, chosen action, target value.
pub type QSample<'a> = (&'a [f64], usize, f64);

impl QNetwork {
    /// Layer widths `sizes[0] -> sizes[1] -> ... -> sizes[last]`, all zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "a network needs an input and an output width");
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut a = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            a = layer.affine(&a);
            if k < last {
                relu_in_place(&mut a);
            }
        }
        Ok(a)
    }

    /// Activations of every layer, input first and output last.
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut a = layer.affine(trace.last().expect("trace starts with the input"));
            if k < last {
                relu_in_place(&mut a);
            }
            trace.push(a);
        }
        trace
    }

    /// Mean squared error `(1/B) sum (Q(s, a) - y)^2` over the batch and its
    /// gradient with respect to every parameter.
    pub fn mse_gradient(&self, batch: &[QSample<'_>]) -> Result<(QNetwork, f64)> {
        if batch.is_empty() {
            return Err(Error::InsufficientExperience { len: 0, requested: 1 });
        }
        let mut grad = self.zeros_like();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &(x, action, target) in batch {
            self.check_input(x)?;
            if action >= self.output_dim() {
                return Err(Error::ActionOutOfRange {
                    index: action,
                    size: self.output_dim(),
                });
            }
            let trace = self.forward_trace(x);
            let residual = trace[trace.len() - 1][action] - target;
            loss += residual * residual * scale;

            let mut delta = vec![0.0; self.output_dim()];
            delta[action] = 2.0 * residual * scale;
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let input = &trace[k];
                let g = &mut grad.layers[k];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
                if k == 0 {
                    break;
                }
                let mut back = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += d * w;
                    }
                }
                // ReLU derivative, read off the post-activation values.
                for (b, a) in back.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        Ok((grad, loss))
    }

    pub fn mse_loss(&self, batch: &[QSample<'_>]) -> Result<f64> {
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for &(x, action, target) in batch {
            let q = self.forward(x)?;
            let r = q[action] - target;
            loss += r * r * scale;
        }
        Ok(loss)
    }

    /// Scales every entry; used for gradient clipping.
    pub fn scale(&mut self, factor: f64) {
        for p in self.params_mut() {
            *p *= factor;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.params().map(|p| p * p).sum::<f64>().sqrt()
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::zeros(&[5, 100, 50, 24, 8]);
        let q = net.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap();
        assert_eq!(q, vec![0.0; 8]);
    }

    #[test]
    fn identity_passthrough() {
        let mut net = QNetwork::zeros(&[1, 1]);
        net.layers[0].weights[0] = 1.0;
        assert_eq!(net.forward(&[-3.5]).unwrap(), vec![-3.5]);
        assert_eq!(net.forward(&[2.25]).unwrap(), vec![2.25]);
    }

    #[test]
    fn output_bias_shifts_one_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = QNetwork::init(&[6, 100, 50, 24, 8], &mut rng);
        let x = [0.1, 0.2, -0.3, 0.4, 0.0, 1.0];
        let before = net.forward(&x).unwrap();
        net.layers[3].bias[5] += 0.75;
        let after = net.forward(&x).unwrap();
        for (k, (a, b)) in before.iter().zip(&after).enumerate() {
            if k == 5 {
                assert!((b - a - 0.75).abs() < 1e-12);
            } else {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = QNetwork::zeros(&[3, 4, 2]);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = QNetwork::init(&[4, 10, 6, 3], &mut rng);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let batch: Vec<QSample> = xs
            .iter()
            .enumerate()
            .map(|(k, x)| (x.as_slice(), k % 3, net.forward(x).unwrap()[k % 3]))
            .collect();
        let (grad, loss) = net.mse_gradient(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.params().all(|g| *g == 0.0));
    }

    #[test]
    fn gradient_is_linear_in_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = QNetwork::init(&[4, 10, 6, 3], &mut rng);
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let q: Vec<f64> = xs.iter().map(|x| net.forward(x).unwrap()[1]).collect();
        let offsets = [0.3, -1.2, 0.8, 2.0];
        let make = |mult: f64| -> Vec<QSample> {
            xs.iter()
                .zip(&q)
                .zip(&offsets)
                .map(|((x, q), o)| (x.as_slice(), 1, q - mult * o))
                .collect()
        };
        let (g1, _) = net.mse_gradient(&make(1.0)).unwrap();
        let (g2, _) = net.mse_gradient(&make(2.0)).unwrap();
        for (a, b) in g1.params().zip(g2.params()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn only_selected_output_unit_gets_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = QNetwork::init(&[3, 5, 4], &mut rng);
        let x = [0.5, -0.5, 1.0];
        let (grad, _) = net.mse_gradient(&[(&x, 2, 10.0)]).unwrap();
        let out = grad.layers.last().unwrap();
        for o in 0..4 {
            let row_nonzero = out.weights[o * 5..(o + 1) * 5].iter().any(|g| *g != 0.0)
                || out.bias[o] != 0.0;
            assert_eq!(row_nonzero, o == 2);
        }
    }
}
