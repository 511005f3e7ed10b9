//! Scaled dot-product multi-head self-attention over field embeddings.
//!
//! Projections carry no bias. Each head projects the `n x d` input to
//! `d / h` columns; the head outputs are concatenated and mapped back to `d`
//! columns by the output projection.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::params::uniform;

/// Head count used when none is configured.
pub const DEFAULT_HEADS: usize = 4;

/// Query/key/value projections of one head, each `[d, d/h]`.
#[derive(Clone, Copy, Debug)]
pub struct HeadProjections {
    pub query: Var,
    pub key: Var,
    pub value: Var,
}

/// Bound parameters of one multi-head block.
#[derive(Clone, Debug)]
pub struct MultiHeadParams {
    pub heads: Vec<HeadProjections>,
    /// `[h * d/h, d]`.
    pub output: Var,
}

impl MultiHeadParams {
    /// Groups bound tensors laid out as `(query, key, value)` per head
    /// followed by the output projection.
    pub fn from_vars(vars: &[Var]) -> Result<Self> {
        if vars.len() < 4 || (vars.len() - 1) % 3 != 0 {
            return Err(Error::Config(format!(
                "{} tensors do not form a multi-head block",
                vars.len()
            )));
        }
        let (heads, output) = vars.split_at(vars.len() - 1);
        Ok(MultiHeadParams {
            heads: heads
                .chunks(3)
                .map(|c| HeadProjections {
                    query: c[0],
                    key: c[1],
                    value: c[2],
                })
                .collect(),
            output: output[0],
        })
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }
}

/// Fresh multi-head tensors in [`MultiHeadParams::from_vars`] order, entries
/// uniform on `[-1/sqrt(d), 1/sqrt(d)]`.
pub fn init_multi_head(dim: usize, heads: usize, rng: &mut impl Rng) -> Result<Vec<Tensor>> {
    let head_dim = head_dim(dim, heads)?;
    let bound = 1.0 / (dim as f64).sqrt();
    let mut out = Vec::with_capacity(3 * heads + 1);
    for _ in 0..heads {
        for _ in 0..3 {
            out.push(uniform(&[dim, head_dim], bound, rng)?);
        }
    }
    out.push(uniform(&[heads * head_dim, dim], bound, rng)?);
    Ok(out)
}

/// `d / h`, or a configuration error when `h` does not divide `d`.
pub fn head_dim(dim: usize, heads: usize) -> Result<usize> {
    if heads == 0 || dim % heads != 0 {
        return Err(Error::Config(format!(
            "embedding dimension {dim} is not divisible by {heads} heads"
        )));
    }
    Ok(dim / heads)
}

/// `softmax(Q K^T / sqrt(d_v)) V`; returns the output and the weights.
pub fn scaled_attention(tape: &mut Tape, query: Var, key: Var, value: Var) -> Result<(Var, Var)> {
    let qs = tape.value(query).shape().to_vec();
    let ks = tape.value(key).shape().to_vec();
    let vs = tape.value(value).shape().to_vec();
    let r = qs.len();
    if r < 2 || ks.len() != r || vs.len() != r || qs[r - 2] != ks[r - 2] || ks[r - 2] != vs[r - 2] {
        return Err(Error::dim("scaled_attention", &qs, &vs));
    }
    let kt = tape.transpose(key)?;
    let scores = tape.matmul(query, kt)?;
    let scaled = tape.scale(scores, 1.0 / (vs[r - 1] as f64).sqrt());
    let weights = tape.softmax_rows(scaled);
    let out = tape.matmul(weights, value)?;
    Ok((out, weights))
}

/// Output of [`multi_head`].
#[derive(Clone, Debug)]
pub struct MultiHeadOutput {
    /// Same shape as the input.
    pub z: Var,
    /// One `[n, n]` (or `[batch, n, n]`) weight matrix per head.
    pub weights: Vec<Var>,
}

/// Multi-head self-attention of `x` (`[n, d]` or `[batch, n, d]`).
///
/// With `frozen` set, the given per-head weights replace the softmax, so the
/// block becomes linear in `x`.
pub fn multi_head(
    tape: &mut Tape,
    x: Var,
    params: &MultiHeadParams,
    frozen: Option<&[Var]>,
) -> Result<MultiHeadOutput> {
    let shape = tape.value(x).shape().to_vec();
    if shape.len() < 2 {
        return Err(Error::Shape {
            shape,
            reason: "attention input must be [n, d] or [batch, n, d]".into(),
        });
    }
    let d = shape[shape.len() - 1];
    let out_shape = tape.value(params.output).shape().to_vec();
    if out_shape != [out_shape[0], d] {
        return Err(Error::dim("multi_head output projection", &out_shape, &shape));
    }
    if let Some(f) = frozen {
        if f.len() != params.heads.len() {
            return Err(Error::Contract(format!(
                "{} frozen weight matrices for {} heads",
                f.len(),
                params.heads.len()
            )));
        }
    }
    let mut outputs = Vec::with_capacity(params.heads.len());
    let mut weights = Vec::with_capacity(params.heads.len());
    for (i, head) in params.heads.iter().enumerate() {
        let v = tape.matmul(x, head.value)?;
        match frozen {
            Some(f) => {
                outputs.push(tape.matmul(f[i], v)?);
                weights.push(f[i]);
            }
            None => {
                let q = tape.matmul(x, head.query)?;
                let k = tape.matmul(x, head.key)?;
                let (o, w) = scaled_attention(tape, q, k, v)?;
                outputs.push(o);
                weights.push(w);
            }
        }
    }
    let joined = if outputs.len() == 1 {
        outputs[0]
    } else {
        tape.concat(&outputs, shape.len() - 1)?
    };
    let z = tape.matmul(joined, params.output)?;
    Ok(MultiHeadOutput { z, weights })
}
