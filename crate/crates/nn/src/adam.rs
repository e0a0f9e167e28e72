//! Adam optimizer with bias correction and a linear learning-rate decay.

use crate::error::{NnError, Result};
use crate::tensor::ParamSet;

/// Adam state for one parameter set. Moment buffers are laid out in the
/// registration order of the `ParamSet` the optimizer was built from.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Adam {
        let shapes: Vec<usize> = params.entries().iter().map(|(_, t)| t.len()).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One bias-corrected update from the gradients currently stored on the
    /// parameters. Gradients are left untouched; call `zero_grad` before the
    /// next backward pass.
    pub fn step(&mut self, params: &ParamSet) -> Result<()> {
        if params.entries().len() != self.first_moment.len() {
            return Err(NnError::Contract(format!(
                "optimizer built for {} tensors, given {}",
                self.first_moment.len(),
                params.entries().len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (idx, (_, tensor)) in params.entries().iter().enumerate() {
            let grads = tensor.grad();
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            if grads.len() != m.len() {
                return Err(NnError::Contract(
                    "parameter shape changed since optimizer construction".into(),
                ));
            }
            let mut values = tensor.value();
            for i in 0..grads.len() {
                let g = grads[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            tensor.set_value(&values)?;
        }
        Ok(())
    }
}

/// Linearly decayed learning rate: `lr0` at progress 0, zero at progress 1.
pub fn linear_decay_lr(lr0: f64, progress: f64) -> f64 {
    lr0 * (1.0 - progress.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use approx::assert_relative_eq;

    #[test]
    fn adam_step_descends_quadratic() {
        // Objective theta^2, gradient 2*theta.
        let theta = Tensor::parameter(1, 1, vec![1.0]).unwrap();
        let mut params = ParamSet::new();
        params.register("theta", &theta);
        let mut opt = Adam::new(&params, 1e-2);
        let mut prev = theta.value()[0];
        for _ in 0..50 {
            params.zero_grad();
            let loss = theta.mul(&theta).unwrap();
            loss.backward().unwrap();
            opt.step(&params).unwrap();
            let cur = theta.value()[0];
            assert!(cur < prev, "theta did not decrease: {prev} -> {cur}");
            prev = cur;
        }
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        // With bias correction the very first Adam step moves by almost
        // exactly lr (v_hat = g^2, m_hat = g).
        let theta = Tensor::parameter(1, 1, vec![1.0]).unwrap();
        let mut params = ParamSet::new();
        params.register("theta", &theta);
        let mut opt = Adam::new(&params, 1e-3);
        params.zero_grad();
        theta.mul(&theta).unwrap().backward().unwrap();
        opt.step(&params).unwrap();
        assert_relative_eq!(theta.value()[0], 1.0 - 1e-3, max_relative = 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let theta = Tensor::parameter(1, 2, vec![0.25, -0.75]).unwrap();
        let mut params = ParamSet::new();
        params.register("theta", &theta);
        let mut opt = Adam::new(&params, 1e-2);
        params.zero_grad();
        opt.step(&params).unwrap();
        assert_eq!(theta.value(), vec![0.25, -0.75]);
    }

    #[test]
    fn half_schedule_halves_the_rate() {
        assert_eq!(linear_decay_lr(7e-4, 0.5), 3.5e-4);
        assert_eq!(linear_decay_lr(7e-4, 0.0), 7e-4);
        assert_eq!(linear_decay_lr(7e-4, 1.0), 0.0);
        assert_eq!(linear_decay_lr(7e-4, 1.5), 0.0);
    }
}
