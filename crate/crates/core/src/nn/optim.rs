use std::fmt;
use std::str::FromStr;

use super::MlpNetwork;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer hyper-parameters and moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn sgd(learning_rate: f64, n_params: usize) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate, n_params)
    }

    pub fn adam(learning_rate: f64, n_params: usize) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate, n_params)
    }

    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Self {
        let moments = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => n_params,
        };
        Self {
            kind,
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            step: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one descent step to `net` with gradient `grad`.
    pub fn step(&mut self, net: &mut MlpNetwork, grad: &[f64]) -> Result<()> {
        self.step_slice(net.params_mut(), grad)
    }

    /// Applies one descent step to a raw parameter slice.
    ///
    /// Non-finite gradients abort the step before anything is modified.
    pub fn step_slice(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if grad.len() != params.len() {
            return Err(Error::config(format!(
                "gradient length {} does not match {} parameters",
                grad.len(),
                params.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::training(format!("non-finite gradient entry {i}: {}", grad[i])));
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    return Err(Error::config(format!(
                        "optimizer holds moments for {} parameters, got {}",
                        self.m.len(),
                        params.len()
                    )));
                }
                let t = self.step as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut opt = OptimizerState::sgd(0.1, 1);
        let mut p = [1.0];
        opt.step_slice(&mut p, &[2.0]).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_against_gradient() {
        let grad = [3.0, -0.5, 1e-3, -20.0];
        let mut opt = OptimizerState::adam(1e-3, 4);
        let mut p = [0.0; 4];
        opt.step_slice(&mut p, &grad).unwrap();
        for (pi, g) in p.iter().zip(grad) {
            assert_eq!(pi.signum(), -g.signum());
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        for mut opt in [OptimizerState::sgd(0.1, 3), OptimizerState::adam(0.1, 3)] {
            let mut p = [1.0, -2.0, 3.5];
            opt.step_slice(&mut p, &[0.0; 3]).unwrap();
            assert_eq!(p, [1.0, -2.0, 3.5]);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut opt = OptimizerState::adam(0.1, 2);
        let mut p = [1.0, 2.0];
        let err = opt.step_slice(&mut p, &[0.5, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
        assert_eq!(p, [1.0, 2.0]);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut opt = OptimizerState::adam(1e-2, 3);
            let mut p = [0.1, 0.2, 0.3];
            for k in 0..5 {
                let g = [k as f64, -0.3, 0.01 * k as f64];
                opt.step_slice(&mut p, &g).unwrap();
            }
            (p, opt)
        };
        let (p1, o1) = run();
        let (p2, o2) = run();
        assert_eq!(p1.map(f64::to_bits), p2.map(f64::to_bits));
        assert_eq!(o1, o2);
    }

    #[test]
    fn length_mismatch() {
        let mut opt = OptimizerState::sgd(0.1, 2);
        assert!(opt.step_slice(&mut [0.0, 0.0], &[1.0]).is_err());
    }
}
