//! End-to-end predictors (DCAP and the LR/FM baselines), the training
//! objective and checkpoints.

mod baselines;
mod checkpoint;
mod config;
mod dcap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use baselines::{FactorizationMachine, LogisticRegression};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{
    ModelConfig, ModelKind, CLICK_LOG_DROPOUT, DEFAULT_HIDDEN, DEFAULT_LAYERS, MOVIELENS_DROPOUT,
};
pub use dcap::{DcapLayout, DcapModel};

use crate::crossnet::LayerTrace;
use crate::error::{Error, Result};
use crate::featurestore::EncodedSample;
use crate::numerics::{Tape, Tensor, Var};
use crate::params::ParamStore;

/// Default weight decay (coefficient of the squared parameter norm).
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-6;

/// Forward-pass mode. Dropout is only active in `Train`.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Nodes produced by a forward pass over a batch.
#[derive(Clone, Debug)]
pub struct Forward {
    /// `[batch]`.
    pub logits: Var,
    /// `[batch]`, each strictly inside (0, 1) for finite parameters.
    pub probabilities: Var,
    /// Cross-layer traces; empty for the baselines.
    pub traces: Vec<LayerTrace>,
}

pub(crate) fn dense_layer(tape: &mut Tape, x: Var, weight: Var, bias: Var) -> Result<Var> {
    let h = tape.matmul(x, weight)?;
    tape.add_bias(h, bias)
}

/// Inverted dropout: in training, zero each entry with probability `rate`
/// and scale survivors by `1 / (1 - rate)`.
pub(crate) fn dropout(tape: &mut Tape, x: Var, rate: f64, mode: &mut Mode<'_>) -> Result<Var> {
    let Mode::Train(rng) = mode else {
        return Ok(x);
    };
    if rate == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - rate);
    let shape = tape.value(x).shape().to_vec();
    let n = tape.value(x).numel();
    let mask = (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mask = tape.constant(Tensor::new(shape, mask)?);
    tape.mul(x, mask)
}

/// Any of the supported predictors.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Dcap(DcapModel),
    Lr(LogisticRegression),
    Fm(FactorizationMachine),
}

impl Model {
    /// Builds and initializes the model named by `config.kind`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        Ok(match config.kind {
            ModelKind::Dcap => Model::Dcap(DcapModel::new(config)?),
            ModelKind::Lr => Model::Lr(LogisticRegression::new(config)?),
            ModelKind::Fm => Model::Fm(FactorizationMachine::new(config)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.config().kind
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Model::Dcap(m) => &m.config,
            Model::Lr(m) => &m.config,
            Model::Fm(m) => &m.config,
        }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            Model::Dcap(m) => &m.params,
            Model::Lr(m) => &m.params,
            Model::Fm(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Dcap(m) => &mut m.params,
            Model::Lr(m) => &mut m.params,
            Model::Fm(m) => &mut m.params,
        }
    }

    /// Forward pass with parameters already bound as `vars`
    /// (see [`ParamStore::bind`]).
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &[&EncodedSample],
        mode: &mut Mode<'_>,
    ) -> Result<Forward> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        if vars.len() != self.params().len() {
            return Err(Error::Contract(format!(
                "{} bound tensors for {} parameters",
                vars.len(),
                self.params().len()
            )));
        }
        match self {
            Model::Dcap(m) => m.forward(tape, vars, batch, mode),
            Model::Lr(m) => m.forward(tape, vars, batch),
            Model::Fm(m) => m.forward(tape, vars, batch),
        }
    }

    /// Eval-mode click probabilities, computed in chunks of `chunk` samples.
    pub fn predict(&self, samples: &[EncodedSample], chunk: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(samples.len());
        for block in samples.chunks(chunk.max(1)) {
            let refs: Vec<&EncodedSample> = block.iter().collect();
            let mut tape = Tape::new();
            let vars = bind_constants(self.params(), &mut tape);
            let f = self.forward(&mut tape, &vars, &refs, &mut Mode::Eval)?;
            out.extend_from_slice(tape.value(f.probabilities).data());
        }
        Ok(out)
    }
}

/// Binds parameters as constants (no gradients), for inference.
pub fn bind_constants(params: &ParamStore, tape: &mut Tape) -> Vec<Var> {
    params.tensors().iter().map(|t| tape.constant(t.clone())).collect()
}

/// `loss + lambda * ||theta||^2` over the bound parameters.
pub fn objective(tape: &mut Tape, loss: Var, params: &[Var], lambda: f64) -> Result<Var> {
    if lambda < 0.0 {
        return Err(Error::Config(format!("negative regularization {lambda}")));
    }
    if lambda == 0.0 || params.is_empty() {
        return Ok(loss);
    }
    let mut total = None;
    for &p in params {
        let sq = tape.mul(p, p)?;
        let s = tape.sum_all(sq);
        total = Some(match total {
            None => s,
            Some(acc) => tape.add(acc, s)?,
        });
    }
    let penalty = tape.scale(total.expect("params is non-empty"), lambda);
    tape.add(loss, penalty)
}

/// Scalar form of [`objective`].
pub fn objective_value(loss: f64, params: &ParamStore, lambda: f64) -> f64 {
    loss + lambda * params.squared_norm()
}
