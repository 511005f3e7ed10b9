use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{init_multi_head, MultiHeadParams};
use crate::crossnet::{stack_layers, LayerOptions, LayerTrace};
use crate::embedding::{init_tables, EmbeddingTable};
use crate::error::Result;
use crate::featurestore::EncodedSample;
use crate::model::config::ModelConfig;
use crate::model::{dense_layer, dropout, Forward, Mode};
use crate::numerics::{Tape, Var};
use crate::params::{uniform, ParamStore};

/// Slot positions of each parameter group inside the store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DcapLayout {
    pub embeddings: Range<usize>,
    /// `3 * heads + 1` slots per cross layer.
    pub layers: Vec<Range<usize>>,
    /// `(weight, bias)` per dense layer, output layer last.
    pub dense: Vec<(usize, usize)>,
}

/// Embedding, cross attentional product layers and an MLP head over
/// `[flattened embeddings, Y_1, .., Y_L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DcapModel {
    pub(crate) config: ModelConfig,
    pub(crate) params: ParamStore,
    layout: DcapLayout,
}

impl DcapModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let d = config.embedding_dim;

        let start = params.len();
        for (i, t) in init_tables(&config.vocab_sizes, d, &mut rng)?.into_iter().enumerate() {
            params.push(format!("embedding.{i}"), t);
        }
        let embeddings = start..params.len();

        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let start = params.len();
            let tensors = init_multi_head(d, config.heads, &mut rng)?;
            let last = tensors.len() - 1;
            for (k, t) in tensors.into_iter().enumerate() {
                let name = if k == last {
                    format!("cross.{l}.output")
                } else {
                    let role = ["query", "key", "value"][k % 3];
                    format!("cross.{l}.head{}.{role}", k / 3)
                };
                params.push(name, t);
            }
            layers.push(start..params.len());
        }

        let mut widths = vec![config.dense_input_width()];
        widths.extend(&config.hidden);
        widths.push(1);
        let mut dense = Vec::with_capacity(widths.len() - 1);
        for (k, w) in widths.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let weight = params.push(format!("dense.{k}.weight"), uniform(&[w[0], w[1]], bound, &mut rng)?);
            let bias = params.push(format!("dense.{k}.bias"), uniform(&[w[1]], bound, &mut rng)?);
            dense.push((weight, bias));
        }

        Ok(DcapModel {
            config,
            params,
            layout: DcapLayout {
                embeddings,
                layers,
                dense,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn layout(&self) -> &DcapLayout {
        &self.layout
    }

    /// Embedding tables bound in `vars`.
    pub fn embedding_table(&self, tape: &Tape, vars: &[Var]) -> Result<EmbeddingTable> {
        EmbeddingTable::new(tape, vars[self.layout.embeddings.clone()].to_vec())
    }

    /// Multi-head parameters of every cross layer bound in `vars`.
    pub fn cross_params(&self, vars: &[Var]) -> Result<Vec<MultiHeadParams>> {
        self.layout
            .layers
            .iter()
            .map(|r| MultiHeadParams::from_vars(&vars[r.clone()]))
            .collect()
    }

    pub fn layer_options(&self) -> LayerOptions {
        LayerOptions {
            kind: self.config.product,
            residual: self.config.residual,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &[&EncodedSample],
        mode: &mut Mode<'_>,
    ) -> Result<Forward> {
        let embedding = self.embedding_table(tape, vars)?;
        let x0 = embedding.embed_batch(tape, batch)?;
        let layers = self.cross_params(vars)?;
        let traces: Vec<LayerTrace> = stack_layers(tape, x0, &layers, self.layer_options(), None)?;

        let b = batch.len();
        let n = self.config.fields();
        let d = self.config.embedding_dim;
        let mut parts = vec![tape.reshape(x0, &[b, n * d])?];
        parts.extend(traces.iter().map(|t| t.y));
        let mut h = tape.concat(&parts, 1)?;

        let last = self.layout.dense.len() - 1;
        for (k, &(w, bias)) in self.layout.dense.iter().enumerate() {
            h = dense_layer(tape, h, vars[w], vars[bias])?;
            if k < last {
                h = tape.relu(h);
                h = dropout(tape, h, self.config.dropout, mode)?;
            }
        }
        let logits = tape.reshape(h, &[b])?;
        let probabilities = tape.sigmoid(logits);
        Ok(Forward {
            logits,
            probabilities,
            traces,
        })
    }
}
