use serde::{Deserialize, Serialize};

use super::network::QNetwork;

/// RMSProp with a per-parameter running mean of squared gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub eps: f64,
    pub square_avg: QNetwork,
}

impl RmsProp {
    pub fn new(params: &QNetwork, learning_rate: f64, decay: f64, eps: f64) -> Self {
        Self {
            learning_rate,
            decay,
            eps,
            square_avg: params.zeros_like(),
        }
    }

    /// `v <- decay v + (1 - decay) g^2`, `theta <- theta - lr g / (sqrt(v) + eps)`.
    pub fn step(&mut self, params: &mut QNetwork, grads: &QNetwork) {
        let (lr, decay, eps) = (self.learning_rate, self.decay, self.eps);
        for ((p, g), v) in params
            .params_mut()
            .zip(grads.params())
            .zip(self.square_avg.params_mut())
        {
            *v = decay * *v + (1.0 - decay) * g * g;
            *p -= lr * g / (v.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_decays_accumulator_only() {
        let mut params = QNetwork::zeros(&[2, 2]);
        params.layers[0].weights = vec![1.0, 2.0, 3.0, 4.0];
        let before = params.clone();
        let mut opt = RmsProp::new(&params, 0.001, 0.9, 1e-8);
        for v in opt.square_avg.params_mut() {
            *v = 1.0;
        }
        let zeros = params.zeros_like();
        opt.step(&mut params, &zeros);
        assert_eq!(params, before);
        assert!(opt.square_avg.params().all(|v| (*v - 0.9).abs() < 1e-15));
    }

    #[test]
    fn first_step_magnitude() {
        let mut params = QNetwork::zeros(&[1, 1]);
        let mut grads = params.zeros_like();
        grads.layers[0].weights[0] = 1.0;
        grads.layers[0].bias[0] = -1.0;
        let mut opt = RmsProp::new(&params, 0.001, 0.9, 1e-8);
        opt.step(&mut params, &grads);
        let expected = 0.001 / (0.1f64.sqrt() + 1e-8);
        assert!((params.layers[0].weights[0] + expected).abs() < 1e-15);
        assert!((params.layers[0].weights[0] + 3.1623e-3).abs() < 1e-7);
        assert!((params.layers[0].bias[0] - expected).abs() < 1e-15);
    }
}
