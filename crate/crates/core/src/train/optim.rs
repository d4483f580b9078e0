use super::TrainError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if let Optimizer::Adam { beta1, beta2, epsilon } = *self {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !unit(beta1) || !unit(beta2) || !(epsilon > 0.0) {
                return Err(TrainError::InvalidConfig(
                    "adam needs betas in [0, 1) and a positive epsilon".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Optimizer with its per-parameter state (moments kept in `f64`).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, learning_rate: f64) -> Self {
        Self {
            optimizer,
            learning_rate,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update; `grads` is aligned with `params`.
    pub fn step<T: Scalar>(&mut self, params: Vec<&mut [T]>, grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter tensor");
        self.step += 1;
        let lr = self.learning_rate;
        match self.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (x, d) in p.iter_mut().zip(g.iter()) {
                        *x = T::of(x.as_f64() - lr * d);
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.v = self.m.clone();
                }
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..p.len() {
                        let d = g[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * d;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * d * d;
                        let update = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                        p[i] = T::of(p[i].as_f64() - update);
                    }
                }
            }
        }
    }
}
