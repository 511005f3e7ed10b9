//! Per-field embedding tables and assembly of the `n x d` input matrix.

use rand::Rng;

use crate::error::{Error, Result};
use crate::featurestore::EncodedSample;
use crate::numerics::{Tape, Tensor, Var};
use crate::params::uniform;

/// Embedding dimension used across every model.
pub const DEFAULT_EMBEDDING_DIM: usize = 16;

/// One `[vocab_i, d]` table per field, entries uniform on `[-1/sqrt(d), 1/sqrt(d)]`.
pub fn init_tables(vocab_sizes: &[usize], dim: usize, rng: &mut impl Rng) -> Result<Vec<Tensor>> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let bound = 1.0 / (dim as f64).sqrt();
    vocab_sizes
        .iter()
        .map(|&v| uniform(&[v, dim], bound, rng))
        .collect()
}

/// Embedding tables bound onto a tape.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    tables: Vec<Var>,
    vocab_sizes: Vec<usize>,
    dim: usize,
}

impl EmbeddingTable {
    /// Wraps bound tables; all must be rank-2 with the same column count.
    pub fn new(tape: &Tape, tables: Vec<Var>) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::Config("no embedding tables".into()))?;
        let dim = tape.value(*first).shape().get(1).copied().unwrap_or(0);
        let mut vocab_sizes = Vec::with_capacity(tables.len());
        for &t in &tables {
            let shape = tape.value(t).shape();
            if shape.len() != 2 || shape[1] != dim {
                return Err(Error::dim("embedding table", shape, &[shape[0], dim]));
            }
            vocab_sizes.push(shape[0]);
        }
        Ok(EmbeddingTable {
            tables,
            vocab_sizes,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn field_count(&self) -> usize {
        self.tables.len()
    }

    pub fn tables(&self) -> &[Var] {
        &self.tables
    }

    fn check(&self, sample: &EncodedSample) -> Result<()> {
        if sample.feature_ids.len() != self.tables.len() {
            return Err(Error::Contract(format!(
                "sample has {} ids for {} fields",
                sample.feature_ids.len(),
                self.tables.len()
            )));
        }
        for (field, (&id, &size)) in sample.feature_ids.iter().zip(&self.vocab_sizes).enumerate() {
            if id >= size {
                return Err(Error::Index {
                    field: format!("#{field}"),
                    id,
                    size,
                });
            }
        }
        Ok(())
    }

    /// `[n, d]` matrix whose row `i` is row `feature_ids[i]` of table `i`.
    pub fn embed(&self, tape: &mut Tape, sample: &EncodedSample) -> Result<Var> {
        self.check(sample)?;
        let rows = self
            .tables
            .iter()
            .zip(&sample.feature_ids)
            .map(|(&t, &id)| tape.gather(t, &[id]))
            .collect::<Result<Vec<_>>>()?;
        tape.concat(&rows, 0)
    }

    /// `[batch, n, d]` stack of [`EmbeddingTable::embed`] over a batch.
    pub fn embed_batch(&self, tape: &mut Tape, batch: &[&EncodedSample]) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        for s in batch {
            self.check(s)?;
        }
        let b = batch.len();
        let mut columns = Vec::with_capacity(self.tables.len());
        for (field, &table) in self.tables.iter().enumerate() {
            let ids: Vec<usize> = batch.iter().map(|s| s.feature_ids[field]).collect();
            let rows = tape.gather(table, &ids)?;
            columns.push(tape.reshape(rows, &[b, 1, self.dim])?);
        }
        tape.concat(&columns, 1)
    }
}

/// Sum of the selected rows of one table (a multivalent field).
pub fn embed_multivalent(tape: &mut Tape, table: Var, ids: &[usize]) -> Result<Var> {
    if ids.is_empty() {
        return Err(Error::Contract("multivalent field with no ids".into()));
    }
    let rows = tape.gather(table, ids)?;
    let summed = tape.sum(rows, 0)?;
    Ok(summed)
}
