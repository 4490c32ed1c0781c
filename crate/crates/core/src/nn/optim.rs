//! Training configuration and first-order optimizers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matrix::Matrix;
use super::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("learning rate must be > 0 (got {0})")]
    LearningRate(f64),
    #[error("epochs must be >= 1")]
    Epochs,
    #[error("batch size must be >= 1")]
    BatchSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm clip, if any.
    #[serde(default)]
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, epochs: 10, batch_size: 8, seed: 0, optimizer: OptimizerKind::Adam, grad_clip: Some(5.0) }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.learning_rate > 0.0) {
            return Err(ConfigError::LearningRate(self.learning_rate));
        }
        if self.epochs == 0 {
            return Err(ConfigError::Epochs);
        }
        if self.batch_size == 0 {
            return Err(ConfigError::BatchSize);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    clip: Option<f64>,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer { kind, lr, clip: None, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn from_config(cfg: &TrainConfig) -> Self {
        let mut o = Self::new(cfg.optimizer, cfg.learning_rate);
        o.clip = cfg.grad_clip;
        o
    }

    pub fn with_clip(mut self, clip: Option<f64>) -> Self {
        self.clip = clip;
        self
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies the accumulated gradients and clears them.
    pub fn step(&mut self, store: &mut ParamStore) {
        if self.m.len() != store.len() {
            let zeros: Vec<Matrix> = store.iter().map(|(_, p)| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
            self.m = zeros.clone();
            self.v = zeros;
        }
        let scale = match self.clip {
            Some(c) => {
                let norm = store.iter().map(|(_, p)| p.grad.norm_sq()).sum::<f64>().sqrt();
                if norm > c { c / norm } else { 1.0 }
            }
            None => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let (bc1, bc2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        for (i, (_, p)) in store.iter_mut().enumerate() {
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *w -= self.lr * g * scale;
                    }
                }
                OptimizerKind::Adam => {
                    let m = self.m[i].data_mut();
                    let v = self.v[i].data_mut();
                    for (j, (w, g)) in p.value.data_mut().iter_mut().zip(p.grad.data()).enumerate() {
                        let g = g * scale;
                        m[j] = BETA1 * m[j] + (1.0 - BETA1) * g;
                        v[j] = BETA2 * v[j] + (1.0 - BETA2) * g * g;
                        *w -= self.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + ADAM_EPS);
                    }
                }
            }
            p.zero_grad();
        }
    }
}
