//! Adam optimizer with bias-corrected first and second moments.

/// Per-parameter Adam moment state plus hyperparameters.
///
/// Update rule per step `t`:
/// `m <- b1*m + (1-b1)*g`, `v <- b2*v + (1-b2)*g^2`,
/// `theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)`.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zero-initialized moments for parameters of the given sizes.
    pub fn new(learning_rate: f64, param_sizes: &[usize]) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            t: 0,
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One optimizer step over every parameter. `params` and `grads` must
    /// line up with the sizes given at construction.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len(), "parameter count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (p, (g, (m, v))) in params
            .iter_mut()
            .zip(grads.iter().zip(self.m.iter_mut().zip(self.v.iter_mut())))
        {
            assert_eq!(p.len(), m.len(), "parameter size mismatch");
            assert_eq!(g.len(), m.len(), "gradient size mismatch");
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged_but_counts_the_step() {
        let mut state = AdamState::new(0.001, &[3]);
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.0; 3];
        state.step(&mut [&mut p], &[&g]);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_matches_hand_evaluated_update() {
        let mut state = AdamState::new(0.001, &[1]);
        let mut p = vec![0.0];
        state.step(&mut [&mut p], &[&[1.0]]);
        // m_hat = v_hat = 1 at t=1, so theta = -lr / (1 + eps).
        let expected = -0.001 / (1.0 + 1e-7);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + 0.0009999).abs() < 1e-7);
    }

    #[test]
    fn two_steps_with_unit_gradient_match_hand_computed_sequence() {
        let mut state = AdamState::new(0.001, &[1]);
        let mut p = vec![0.0];

        // Hand evaluation of the recurrence at g=1, defaults.
        let (b1, b2, lr, eps) = (0.9, 0.999, 0.001, 1e-7);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut theta = 0.0;
        let mut expected = Vec::new();
        for t in 1..=2u32 {
            m = b1 * m + (1.0 - b1) * 1.0;
            v = b2 * v + (1.0 - b2) * 1.0;
            let m_hat = m / (1.0 - b1_pow(b1, t));
            let v_hat = v / (1.0 - b1_pow(b2, t));
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
            expected.push(theta);
        }

        state.step(&mut [&mut p], &[&[1.0]]);
        assert!((p[0] - expected[0]).abs() < 1e-12);
        state.step(&mut [&mut p], &[&[1.0]]);
        assert!((p[0] - expected[1]).abs() < 1e-12);
    }

    fn b1_pow(b: f64, t: u32) -> f64 {
        b.powi(t as i32)
    }
}
