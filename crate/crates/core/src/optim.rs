//! Adam with bias correction and a constant learning rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate {} must be positive", self.lr)));
        }
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::config("beta1 and beta2 must lie in [0, 1)"));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::config("eps must be non-negative"));
        }
        Ok(())
    }
}

/// Moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, tensor_lens: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            m: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One update of every tensor in `params` from the matching `grads`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Dimension {
                    expected: m.len(),
                    got: if p.len() != m.len() { p.len() } else { g.len() },
                });
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let s = self.step.min(i32::MAX as u64) as i32;
        let c1 = 1.0 - beta1.powi(s);
        let c2 = 1.0 - beta2.powi(s);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_step(config: AdamConfig, g: &[f64]) -> Vec<f64> {
        let mut st = AdamState::new(config, &[g.len()]).unwrap();
        let mut p = vec![0.0; g.len()];
        st.step(&mut [&mut p], &[g]).unwrap();
        p
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut st = AdamState::new(AdamConfig::default(), &[3]).unwrap();
        let mut p = vec![1.0, -2.0, 3.5];
        st.step(&mut [&mut p], &[&[0.0; 3]]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_hand_value() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        // m_hat = 2, v_hat = 4, update = -0.01 * 2 / (2 + 1e-8)
        let p = one_step(cfg, &[2.0]);
        assert!((p[0] + 0.01 * 2.0 / (2.0 + 1e-8)).abs() < 1e-15);
        assert!((p[0] + 0.01).abs() < 1e-8);
    }

    #[test]
    fn scale_invariant_at_first_step() {
        let a = one_step(AdamConfig::default(), &[0.3]);
        let b = one_step(AdamConfig::default(), &[3.0]);
        assert!((a[0] - b[0]).abs() < 1e-6);
    }

    #[test]
    fn zero_betas_give_sign_descent() {
        let cfg = AdamConfig {
            lr: 0.05,
            beta1: 0.0,
            beta2: 0.0,
            eps: 1e-8,
        };
        let mut st = AdamState::new(cfg, &[4]).unwrap();
        let mut p = vec![0.0; 4];
        for g in [[1.0, -2.0, 0.5, -0.01], [-3.0, 4.0, 0.2, 0.7]] {
            let before = p.clone();
            st.step(&mut [&mut p], &[&g]).unwrap();
            for i in 0..4 {
                let expect = before[i] - 0.05 * g[i].signum();
                assert!((p[i] - expect).abs() < 0.05 * 1e-6, "coord {i}");
            }
        }
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut st = AdamState::new(AdamConfig::default(), &[2]).unwrap();
        let mut p = vec![0.0; 3];
        assert!(st.step(&mut [&mut p], &[&[0.0; 3]]).is_err());
        assert!(AdamState::new(AdamConfig { beta1: 1.0, ..Default::default() }, &[1]).is_err());
    }

    proptest! {
        #[test]
        fn step_one_is_signed_lr(
            g in proptest::collection::vec(-100.0f64..100.0, 1..16),
            lr in 1e-6f64..1e-4,
        ) {
            let cfg = AdamConfig { lr, ..AdamConfig::default() };
            let p = one_step(cfg, &g);
            for (pi, gi) in p.iter().zip(&g) {
                if gi.abs() > 1e-4 {
                    prop_assert!((pi + cfg.lr * gi.signum()).abs() <= gi.abs() * 1e-6 + cfg.eps);
                }
            }
        }

        #[test]
        fn step_one_exact_shortfall(g in -100.0f64..100.0, lr in 1e-5f64..0.1) {
            // |update| = lr |g| / (|g| + eps) at step one, for any lr
            prop_assume!(g != 0.0);
            let cfg = AdamConfig { lr, ..AdamConfig::default() };
            let p = one_step(cfg, &[g]);
            let expect = -lr * g / (g.abs() + cfg.eps);
            prop_assert!((p[0] - expect).abs() <= 1e-14 * lr);
        }

        #[test]
        fn second_moment_non_negative(gs in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 1..20)) {
            let mut st = AdamState::new(AdamConfig::default(), &[3]).unwrap();
            let mut p = vec![0.0; 3];
            for g in &gs {
                st.step(&mut [&mut p], &[g]).unwrap();
                prop_assert!(st.second_moment()[0].iter().all(|&v| v >= 0.0));
            }
            prop_assert_eq!(st.step_count(), gs.len() as u64);
        }
    }
}
