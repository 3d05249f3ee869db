use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd { momentum: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state over a flat f32 parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, n: usize) -> Self {
        let v = match cfg {
            OptimizerConfig::Adam { .. } => vec![0.0; n],
            OptimizerConfig::Sgd { .. } => Vec::new(),
        };
        Self {
            cfg,
            m: vec![0.0; n],
            v,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f32], lr: f64) {
        self.t += 1;
        match self.cfg {
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                let (b1, b2) = (beta1 as f32, beta2 as f32);
                let bc1 = 1.0 - beta1.powi(self.t);
                let bc2 = 1.0 - beta2.powi(self.t);
                let step = (lr * bc2.sqrt() / bc1) as f32;
                let eps = (eps * bc2.sqrt()) as f32;
                for ((p, &g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= step * *m / (v.sqrt() + eps);
                }
            }
            OptimizerConfig::Sgd { momentum } => {
                let mu = momentum as f32;
                let lr = lr as f32;
                for ((p, &g), m) in params.iter_mut().zip(grads).zip(self.m.iter_mut()) {
                    *m = mu * *m + g;
                    *p -= lr * *m;
                }
            }
        }
    }
}
