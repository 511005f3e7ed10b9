//! Cross attentional product layers.
//!
//! Each layer attends over its input, multiplies every attended field `z_i`
//! with every later ORIGINAL embedding `x_j` (`i < j`), sums those products
//! over the embedding axis to get the layer output `Y`, and average-pools the
//! `n(n-1)/2` product rows back to `n` rows to feed the next layer.

use crate::attention::{multi_head, MultiHeadParams};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// How a pair of `d`-vectors is combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProductKind {
    /// Component-wise product `a_k * b_k`.
    Inner,
    /// `a_k * sum(b)`.
    Outer,
}

impl ProductKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProductKind::Inner => "inner",
            ProductKind::Outer => "outer",
        }
    }
}

impl std::str::FromStr for ProductKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" => Ok(ProductKind::Inner),
            "outer" => Ok(ProductKind::Outer),
            other => Err(Error::Config(format!("unknown product kind {other:?}"))),
        }
    }
}

/// Ordered pairs `(i, j)`, `i < j`, zero-based and lexicographic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairIndex {
    fields: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairIndex {
    pub fn new(fields: usize) -> Result<Self> {
        if fields < 2 {
            return Err(Error::Config(format!(
                "cross products need at least 2 fields, got {fields}"
            )));
        }
        let pairs = (0..fields)
            .flat_map(|i| (i + 1..fields).map(move |j| (i, j)))
            .collect();
        Ok(PairIndex { fields, pairs })
    }

    pub fn fields(&self) -> usize {
        self.fields
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn left(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    fn right(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }
}

/// `n(n-1)/2`.
pub fn pair_count(fields: usize) -> usize {
    fields * fields.saturating_sub(1) / 2
}

/// Component-wise product; operands share a shape.
pub fn inner_product(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    tape.mul(a, b)
}

/// `a` scaled by the sum of `b` along the last axis; operands share a shape.
pub fn outer_product(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let (sa, sb) = (tape.value(a).shape(), tape.value(b).shape());
    if sa != sb {
        return Err(Error::dim("outer_product", sa, sb));
    }
    let last = sb.len() - 1;
    let totals = tape.sum(b, last)?;
    tape.scale_rows(a, totals)
}

pub fn product(tape: &mut Tape, a: Var, b: Var, kind: ProductKind) -> Result<Var> {
    match kind {
        ProductKind::Inner => inner_product(tape, a, b),
        ProductKind::Outer => outer_product(tape, a, b),
    }
}

/// Row `(i, j)` of the result is `product(z_i, x_j)`, in [`PairIndex`] order.
pub fn pair_products(tape: &mut Tape, z: Var, x: Var, kind: ProductKind) -> Result<Var> {
    let (sz, sx) = (tape.value(z).shape(), tape.value(x).shape());
    if sz != sx || sz.len() < 2 {
        return Err(Error::dim("pair_products", sz, sx));
    }
    let pairs = PairIndex::new(sz[sz.len() - 2])?;
    let left = tape.select_rows(z, &pairs.left())?;
    let right = tape.select_rows(x, &pairs.right())?;
    product(tape, left, right, kind)
}

/// Sums the embedding (last) axis: `[.., m, d] -> [.., m]`.
pub fn sum_embedding_axis(tape: &mut Tape, p: Var) -> Result<Var> {
    let rank = tape.value(p).rank();
    if rank < 2 {
        return Err(Error::Shape {
            shape: tape.value(p).shape().to_vec(),
            reason: "expected [m, d] or [batch, m, d]".into(),
        });
    }
    tape.sum(p, rank - 1)
}

/// Pools the cross-feature rows down to `target` rows.
pub fn adaptive_avg_pool(tape: &mut Tape, p: Var, target: usize) -> Result<Var> {
    tape.adaptive_avg_pool(p, target)
}

/// Output length of a plain 1-D pooling window:
/// `floor((len_in + 2*padding - kernel) / stride + 1)`.
pub fn pooled_length(len_in: usize, padding: usize, kernel: usize, stride: usize) -> Result<usize> {
    if stride == 0 || kernel == 0 || kernel > len_in + 2 * padding {
        return Err(Error::Config(format!(
            "invalid pooling window: len {len_in}, padding {padding}, kernel {kernel}, stride {stride}"
        )));
    }
    Ok((len_in + 2 * padding - kernel) / stride + 1)
}

/// Options shared by every layer of a stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerOptions {
    pub kind: ProductKind,
    /// Adds the layer input to the attention output. Not part of the
    /// published layer equations; off by default.
    pub residual: bool,
}

impl Default for LayerOptions {
    fn default() -> Self {
        LayerOptions {
            kind: ProductKind::Inner,
            residual: false,
        }
    }
}

/// Nodes produced by one layer.
#[derive(Clone, Debug)]
pub struct LayerTrace {
    /// Attention output, shaped like the layer input.
    pub z: Var,
    /// Pair products, `[.., n(n-1)/2, d]`.
    pub p: Var,
    /// Embedding-axis sums of `p`, `[.., n(n-1)/2]`.
    pub y: Var,
    /// Pooled `p`, shaped like the layer input.
    pub x_next: Var,
    /// Attention weights per head.
    pub attention: Vec<Var>,
}

/// Tensor values of a [`LayerTrace`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerValues {
    pub z: Tensor,
    pub p: Tensor,
    pub y: Tensor,
    pub x_next: Tensor,
    pub attention: Vec<Tensor>,
}

impl LayerTrace {
    pub fn values(&self, tape: &Tape) -> LayerValues {
        LayerValues {
            z: tape.value(self.z).clone(),
            p: tape.value(self.p).clone(),
            y: tape.value(self.y).clone(),
            x_next: tape.value(self.x_next).clone(),
            attention: self.attention.iter().map(|&w| tape.value(w).clone()).collect(),
        }
    }
}

/// One cross attentional product layer. `x_l` is the layer input, `x_0` the
/// original embeddings used as the right product operand.
pub fn layer_forward(
    tape: &mut Tape,
    x_l: Var,
    x_0: Var,
    params: &MultiHeadParams,
    options: LayerOptions,
    frozen: Option<&[Var]>,
) -> Result<LayerTrace> {
    let (sl, s0) = (tape.value(x_l).shape(), tape.value(x_0).shape());
    if sl != s0 {
        return Err(Error::dim("layer_forward", sl, s0));
    }
    let n = sl[sl.len() - 2];
    let attended = multi_head(tape, x_l, params, frozen)?;
    let z = if options.residual {
        tape.add(attended.z, x_l)?
    } else {
        attended.z
    };
    let p = pair_products(tape, z, x_0, options.kind)?;
    let y = sum_embedding_axis(tape, p)?;
    let x_next = adaptive_avg_pool(tape, p, n)?;
    Ok(LayerTrace {
        z,
        p,
        y,
        x_next,
        attention: attended.weights,
    })
}

/// Runs `layers.len()` layers; layer `l + 1` consumes `x_next` of layer `l`
/// and always multiplies against `x_0`.
pub fn stack_layers(
    tape: &mut Tape,
    x_0: Var,
    layers: &[MultiHeadParams],
    options: LayerOptions,
    frozen: Option<&[Vec<Var>]>,
) -> Result<Vec<LayerTrace>> {
    if layers.is_empty() {
        return Err(Error::Config("at least one cross layer is required".into()));
    }
    if let Some(f) = frozen {
        if f.len() != layers.len() {
            return Err(Error::Contract(format!(
                "{} frozen layers for {} layers",
                f.len(),
                layers.len()
            )));
        }
    }
    let mut traces: Vec<LayerTrace> = Vec::with_capacity(layers.len());
    let mut x = x_0;
    for (l, params) in layers.iter().enumerate() {
        let trace = layer_forward(tape, x, x_0, params, options, frozen.map(|f| f[l].as_slice()))?;
        x = trace.x_next;
        traces.push(trace);
    }
    Ok(traces)
}
