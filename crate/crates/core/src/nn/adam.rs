use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers follow the order of
/// [`Mlp::param_slices`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = net.param_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        let params = net.param_slices_mut();
        let gs = grads.slices();
        if params.len() != gs.len() || params.len() != self.m.len() {
            return Err(Error::shape("adam parameter groups", self.m.len(), gs.len()));
        }
        for ((p, g), m) in params.iter().zip(&gs).zip(&self.m) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::shape("adam parameter group size", m.len(), g.len()));
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params.into_iter().zip(gs).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Mlp {
        let mut n = Mlp::new(&[1, 1], 0, true).unwrap();
        n.param_slices_mut()[0][0] = v;
        n
    }

    fn grad(n: &Mlp, g: f64) -> Gradients {
        let mut gr = n.zero_gradients();
        gr.layers[0].w.as_mut_slice()[0] = g;
        gr
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut n = Mlp::two_hidden(3, 4, 2, 1, false).unwrap();
        let before = n.clone();
        let mut opt = Adam::new(&n, AdamConfig::with_lr(1e-3));
        let g = n.zero_gradients();
        for _ in 0..3 {
            opt.step(&mut n, &g).unwrap();
        }
        assert_eq!(n, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        for g in [3.7, -0.002, 250.0] {
            let mut n = scalar(1.0);
            let mut opt = Adam::new(&n, AdamConfig::with_lr(1e-3));
            let gr = grad(&n, g);
            opt.step(&mut n, &gr).unwrap();
            let delta = n.param_slices()[0][0] - 1.0;
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
            let want = -1e-3 * g / (g.abs() + 1e-8);
            assert!((delta - want).abs() < 1e-15);
            assert!((delta.abs() - 1e-3).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_runs_are_identical() {
        let run = || {
            let mut n = Mlp::two_hidden(3, 4, 2, 1, false).unwrap();
            let mut opt = Adam::new(&n, AdamConfig::with_lr(1e-2));
            for k in 0..5 {
                let mut g = n.zero_gradients();
                g.layers[1].w.as_mut_slice()[3] = k as f64 - 2.0;
                opt.step(&mut n, &g).unwrap();
            }
            n
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut n = scalar(0.4);
        let mut opt = Adam::new(&n, AdamConfig::with_lr(0.0));
        let gr = grad(&n, 1.0);
        opt.step(&mut n, &gr).unwrap();
        assert_eq!(n.param_slices()[0][0], 0.4);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn mismatched_gradients_rejected() {
        let mut n = scalar(0.4);
        let mut opt = Adam::new(&n, AdamConfig::with_lr(0.1));
        let other = Mlp::new(&[2, 1], 0, false).unwrap();
        assert!(opt.step(&mut n, &other.zero_gradients()).is_err());
    }
}
