use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::params::ParamStore;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_ADAM_EPS: f64 = 1e-8;

/// How weight decay enters the update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DecayMode {
    /// `lambda * w` is added to the gradient before the moment updates.
    #[default]
    Coupled,
    /// `lr * lambda * w` is subtracted from the weight after the Adam step.
    Decoupled,
}

/// Bias-corrected Adam with per-parameter moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay: DecayMode,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    /// Zero moments shaped like `params`.
    pub fn new(params: &ParamStore, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {learning_rate} must be positive")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight decay {weight_decay} must be non-negative")));
        }
        let zeros = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect::<Result<Vec<_>>>()?;
        Ok(AdamState {
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_ADAM_EPS,
            weight_decay,
            decay: DecayMode::Coupled,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Every gradient is checked before anything is
    /// modified, so a non-finite gradient leaves params and state untouched.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() || self.first.len() != params.len() {
            return Err(Error::Contract(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for ((name, p), g) in params.names().iter().zip(params.tensors()).zip(grads) {
            if g.shape() != p.shape() {
                return Err(Error::dim("adam_step", g.shape(), p.shape()));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps, lambda) = (self.beta1, self.beta2, self.learning_rate, self.eps, self.weight_decay);
        let coupled = self.decay == DecayMode::Coupled;

        for (((p, g), m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let (m, v) = (m.data_mut(), v.data_mut());
            for (k, (w, &g)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let g = if coupled { g + lambda * *w } else { g };
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                let update = lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                if !coupled {
                    *w -= lr * lambda * *w;
                }
                *w -= update;
            }
        }
        Ok(())
    }
}
