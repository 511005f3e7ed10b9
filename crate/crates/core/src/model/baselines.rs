//! Logistic regression and factorization machine baselines.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{init_tables, EmbeddingTable};
use crate::error::{Error, Result};
use crate::featurestore::EncodedSample;
use crate::model::config::{ModelConfig, ModelKind};
use crate::model::Forward;
use crate::numerics::{Tape, Tensor, Var};
use crate::params::ParamStore;

/// Scalar weight per feature id plus a bias; slots are the per-field
/// `[vocab_i, 1]` tables followed by the bias.
fn push_linear(params: &mut ParamStore, vocab_sizes: &[usize]) -> Result<(Range<usize>, usize)> {
    let start = params.len();
    for (i, &v) in vocab_sizes.iter().enumerate() {
        params.push(format!("linear.{i}"), Tensor::zeros(&[v, 1])?);
    }
    let bias = params.push("linear.bias", Tensor::zeros(&[1])?);
    Ok((start..bias, bias))
}

/// `[batch]` logits of the linear part.
fn linear_logits(
    tape: &mut Tape,
    vars: &[Var],
    weights: &Range<usize>,
    bias: usize,
    batch: &[&EncodedSample],
) -> Result<Var> {
    let table = EmbeddingTable::new(tape, vars[weights.clone()].to_vec())?;
    let b = batch.len();
    let x = table.embed_batch(tape, batch)?; // [b, n, 1]
    let total = tape.sum(x, 1)?; // [b, 1]
    let with_bias = tape.add_bias(total, vars[bias])?;
    tape.reshape(with_bias, &[b])
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression {
    pub(crate) config: ModelConfig,
    pub(crate) params: ParamStore,
    weights: Range<usize>,
    bias: usize,
}

impl LogisticRegression {
    /// Starts from all-zero weights.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let (weights, bias) = push_linear(&mut params, &config.vocab_sizes)?;
        Ok(LogisticRegression {
            config,
            params,
            weights,
            bias,
        })
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], batch: &[&EncodedSample]) -> Result<Forward> {
        let logits = linear_logits(tape, vars, &self.weights, self.bias, batch)?;
        let probabilities = tape.sigmoid(logits);
        Ok(Forward {
            logits,
            probabilities,
            traces: Vec::new(),
        })
    }
}

/// Linear term plus `sum_{i<j} <v_i, v_j>` over the active features' latent
/// vectors, evaluated as `0.5 * sum_k [(sum_i v_ik)^2 - sum_i v_ik^2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationMachine {
    pub(crate) config: ModelConfig,
    pub(crate) params: ParamStore,
    weights: Range<usize>,
    bias: usize,
    latent: Range<usize>,
}

impl FactorizationMachine {
    /// Zero linear part; latent vectors uniform on `[-1/sqrt(d), 1/sqrt(d)]`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        if config.kind != ModelKind::Fm {
            return Err(Error::Config(format!("{} config given to FM", config.kind)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let (weights, bias) = push_linear(&mut params, &config.vocab_sizes)?;
        let start = params.len();
        for (i, t) in init_tables(&config.vocab_sizes, config.embedding_dim, &mut rng)?
            .into_iter()
            .enumerate()
        {
            params.push(format!("latent.{i}"), t);
        }
        let latent = start..params.len();
        Ok(FactorizationMachine {
            config,
            params,
            weights,
            bias,
            latent,
        })
    }

    pub fn latent_slots(&self) -> Range<usize> {
        self.latent.clone()
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], batch: &[&EncodedSample]) -> Result<Forward> {
        let linear = linear_logits(tape, vars, &self.weights, self.bias, batch)?;
        let table = EmbeddingTable::new(tape, vars[self.latent.clone()].to_vec())?;
        let x = table.embed_batch(tape, batch)?; // [b, n, d]
        let total = tape.sum(x, 1)?; // [b, d]
        let total_sq = tape.mul(total, total)?;
        let x_sq = tape.mul(x, x)?;
        let sq_total = tape.sum(x_sq, 1)?;
        let diff = tape.sub(total_sq, sq_total)?;
        let pairs = tape.sum(diff, 1)?; // [b]
        let pairs = tape.scale(pairs, 0.5);
        let logits = tape.add(linear, pairs)?;
        let probabilities = tape.sigmoid(logits);
        Ok(Forward {
            logits,
            probabilities,
            traces: Vec::new(),
        })
    }
}
