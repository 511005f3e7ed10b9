//! Reverse-mode differentiation over [`Tensor`] values.
//!
//! Every primitive appends one node to the tape holding its forward value and
//! the ids of its inputs; [`Tape::backward`] walks the nodes in reverse and
//! applies each node's vector-Jacobian rule.

use crate::error::{Error, Result};
use crate::numerics::tensor::{gemm, BinaryKind, ReduceKind, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Binary(Var, Var, BinaryKind),
    Scale(Var, f64),
    AddBias(Var, Var),
    ScaleRows(Var, Var),
    Softmax(Var),
    Reduce(Var, usize, ReduceKind),
    SumAll(Var),
    Concat(Vec<Var>, usize),
    Reshape(Var),
    Gather(Var, Vec<usize>),
    SelectRows(Var, Vec<usize>),
    AvgPool(Var, usize),
    Relu(Var),
    Sigmoid(Var),
    LogLoss(Var, Vec<f64>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Deliberate corruption of one backward rule, used to prove that the
/// gradient checks can fail.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackwardFault {
    FlipMulSign,
}

/// Clamp applied to probabilities inside [`Tape::logloss`].
pub const PROB_EPS: f64 = 1e-7;

/// Append-only record of a forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<BackwardFault>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `var`, or `None` when it has no path to the root.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient for `var`, zeros when it has no path to the root.
    pub fn wrt(&self, var: Var) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]).expect("node shapes are valid"),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: BackwardFault) {
        self.fault = Some(fault);
    }

    /// A leaf that receives gradients.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn unary(&mut self, value: Tensor, op: Op, input: Var) -> Var {
        let rg = self.needs(&[input]);
        self.push(value, op, rg)
    }

    // ── primitives ──────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        if self.value(a).rank() < 2 {
            return Err(Error::Shape {
                shape: self.value(a).shape().to_vec(),
                reason: "transpose needs rank >= 2".into(),
            });
        }
        let value = self.value(a).transpose_last();
        Ok(self.unary(value, Op::Transpose(a), a))
    }

    pub fn elementwise(&mut self, a: Var, b: Var, kind: BinaryKind) -> Result<Var> {
        let value = self.value(a).elementwise(self.value(b), kind)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Binary(a, b, kind), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, BinaryKind::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, BinaryKind::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, BinaryKind::Mul)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).scale(factor);
        self.unary(value, Op::Scale(a, factor), a)
    }

    /// Adds a `[c]` vector to every row of `a` (last extent `c`).
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        let c = av.last_extent();
        if bv.rank() != 1 || bv.numel() != c {
            return Err(Error::dim("add_bias", av.shape(), bv.shape()));
        }
        let mut data = av.data().to_vec();
        for row in data.chunks_mut(c) {
            for (x, b) in row.iter_mut().zip(bv.data()) {
                *x += b;
            }
        }
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.needs(&[a, bias]);
        Ok(self.push(value, Op::AddBias(a, bias), rg))
    }

    /// Multiplies every row of `a` by the matching entry of `factors`, whose
    /// shape is `a`'s shape without the last axis.
    pub fn scale_rows(&mut self, a: Var, factors: Var) -> Result<Var> {
        let (av, sv) = (self.value(a), self.value(factors));
        let expected = &av.shape()[..av.rank() - 1];
        let ok = if expected.is_empty() {
            sv.numel() == 1
        } else {
            sv.shape() == expected
        };
        if !ok {
            return Err(Error::dim("scale_rows", av.shape(), sv.shape()));
        }
        let c = av.last_extent();
        let mut data = av.data().to_vec();
        for (row, s) in data.chunks_mut(c).zip(sv.data()) {
            row.iter_mut().for_each(|x| *x *= s);
        }
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.needs(&[a, factors]);
        Ok(self.push(value, Op::ScaleRows(a, factors), rg))
    }

    /// Softmax along the last axis.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).softmax_rows();
        self.unary(value, Op::Softmax(a), a)
    }

    pub fn reduce(&mut self, a: Var, axis: usize, kind: ReduceKind) -> Result<Var> {
        let value = self.value(a).reduce(axis, kind)?;
        Ok(self.unary(value, Op::Reduce(a, axis, kind), a))
    }

    pub fn sum(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, ReduceKind::Sum)
    }

    /// Sum of every entry, as a one-element tensor.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum_all());
        self.unary(value, Op::SumAll(a), a)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Tensor::concat(&values, axis)?;
        let rg = self.needs(parts);
        Ok(self.push(value, Op::Concat(parts.to_vec(), axis), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).reshape(shape)?;
        Ok(self.unary(value, Op::Reshape(a), a))
    }

    /// Rows `ids` of a `[rows, c]` table, stacked into `[ids.len(), c]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if tv.rank() != 2 {
            return Err(Error::Shape {
                shape: tv.shape().to_vec(),
                reason: "gather needs a rank-2 table".into(),
            });
        }
        if ids.is_empty() {
            return Err(Error::Contract("gather with no ids".into()));
        }
        let (rows, c) = (tv.shape()[0], tv.shape()[1]);
        let mut data = Vec::with_capacity(ids.len() * c);
        for &id in ids {
            if id >= rows {
                return Err(Error::Index {
                    field: "table".into(),
                    id,
                    size: rows,
                });
            }
            data.extend_from_slice(&tv.data()[id * c..(id + 1) * c]);
        }
        let value = Tensor::new(vec![ids.len(), c], data)?;
        Ok(self.unary(value, Op::Gather(table, ids.to_vec()), table))
    }

    /// Picks rows (second-to-last axis) by index, per leading batch entry.
    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let av = self.value(a);
        if av.rank() < 2 || rows.is_empty() {
            return Err(Error::Shape {
                shape: av.shape().to_vec(),
                reason: "select_rows needs rank >= 2 and at least one row".into(),
            });
        }
        let (m, c) = (av.row_count(), av.last_extent());
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(Error::Index {
                field: "rows".into(),
                id: bad,
                size: m,
            });
        }
        let mut data = Vec::with_capacity(av.batch_count() * rows.len() * c);
        for b in 0..av.batch_count() {
            let base = b * m * c;
            for &r in rows {
                data.extend_from_slice(&av.data()[base + r * c..base + (r + 1) * c]);
            }
        }
        let mut shape = av.shape().to_vec();
        let r = shape.len();
        shape[r - 2] = rows.len();
        let value = Tensor::new(shape, data)?;
        Ok(self.unary(value, Op::SelectRows(a, rows.to_vec()), a))
    }

    /// Adaptive average pooling of the row axis (second-to-last) down to
    /// `target` rows. Output row `i` averages input rows
    /// `[floor(i*m/target), ceil((i+1)*m/target))`.
    pub fn adaptive_avg_pool(&mut self, a: Var, target: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rank() < 2 {
            return Err(Error::Shape {
                shape: av.shape().to_vec(),
                reason: "pooling needs rank >= 2".into(),
            });
        }
        let (m, c) = (av.row_count(), av.last_extent());
        if target == 0 || target > m {
            return Err(Error::Config(format!(
                "cannot pool {m} rows down to {target}"
            )));
        }
        let bounds = pool_bounds(m, target);
        let mut data = vec![0.0; av.batch_count() * target * c];
        for b in 0..av.batch_count() {
            let src = &av.data()[b * m * c..(b + 1) * m * c];
            let dst = &mut data[b * target * c..(b + 1) * target * c];
            for (i, &(lo, hi)) in bounds.iter().enumerate() {
                let inv = 1.0 / (hi - lo) as f64;
                let out = &mut dst[i * c..(i + 1) * c];
                for r in lo..hi {
                    for (o, s) in out.iter_mut().zip(&src[r * c..(r + 1) * c]) {
                        *o += s * inv;
                    }
                }
            }
        }
        let mut shape = av.shape().to_vec();
        let r = shape.len();
        shape[r - 2] = target;
        let value = Tensor::new(shape, data)?;
        Ok(self.unary(value, Op::AvgPool(a, target), a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.unary(value, Op::Relu(a), a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.unary(value, Op::Sigmoid(a), a)
    }

    /// Mean binary cross-entropy of probabilities `p` against `labels`, with
    /// `p` clamped to `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn logloss(&mut self, p: Var, labels: &[f64]) -> Result<Var> {
        let pv = self.value(p);
        if labels.is_empty() {
            return Err(Error::Contract("logloss of an empty batch".into()));
        }
        if pv.numel() != labels.len() {
            return Err(Error::dim("logloss", pv.shape(), &[labels.len()]));
        }
        let value = Tensor::scalar(logloss(pv.data(), labels));
        Ok(self.unary(value, Op::LogLoss(p, labels.to_vec()), p))
    }

    // ── reverse pass ───────────────────────────────────────────────────

    /// Gradients of the one-element `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if root_value.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward from non-scalar root of shape {:?}",
                root_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::ones(root_value.shape())?);

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            for (input, contribution) in self.vjp(node, &g)? {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
        })
    }

    /// Vector-Jacobian products of one node: (input, gradient) pairs.
    fn vjp(&self, node: &Node, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let val = |v: Var| &self.nodes[v.0].value;
        let out = &node.value;
        Ok(match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let da = g.matmul(&bv.transpose_last())?;
                let db = if bv.rank() == 2 && av.rank() == 3 {
                    // shared right operand: fold the batch into rows
                    let k = av.last_extent();
                    let p = g.last_extent();
                    let rows = av.numel() / k;
                    let at = Tensor::new(vec![rows, k], av.data().to_vec())?.transpose_last();
                    Tensor::new(vec![k, p], gemm(at.data(), g.data(), k, rows, p))?
                } else {
                    av.transpose_last().matmul(g)?
                };
                vec![(*a, da), (*b, db)]
            }
            Op::Transpose(a) => vec![(*a, g.transpose_last())],
            Op::Binary(a, b, kind) => match kind {
                BinaryKind::Add => vec![(*a, g.clone()), (*b, g.clone())],
                BinaryKind::Sub => vec![(*a, g.clone()), (*b, g.scale(-1.0))],
                BinaryKind::Mul => {
                    let sign = if self.fault == Some(BackwardFault::FlipMulSign) {
                        -1.0
                    } else {
                        1.0
                    };
                    vec![
                        (*a, g.mul(val(*b))?.scale(sign)),
                        (*b, g.mul(val(*a))?.scale(sign)),
                    ]
                }
            },
            Op::Scale(a, f) => vec![(*a, g.scale(*f))],
            Op::AddBias(a, bias) => {
                let c = g.last_extent();
                let mut db = vec![0.0; c];
                for row in g.data().chunks(c) {
                    for (d, x) in db.iter_mut().zip(row) {
                        *d += x;
                    }
                }
                vec![(*a, g.clone()), (*bias, Tensor::vector(db)?)]
            }
            Op::ScaleRows(a, s) => {
                let (av, sv) = (val(*a), val(*s));
                let c = g.last_extent();
                let mut da = g.data().to_vec();
                let mut ds = vec![0.0; sv.numel()];
                for (((grow, arow), f), d) in da
                    .chunks_mut(c)
                    .zip(av.data().chunks(c))
                    .zip(sv.data())
                    .zip(ds.iter_mut())
                {
                    *d = grow.iter().zip(arow).map(|(x, y)| x * y).sum();
                    grow.iter_mut().for_each(|x| *x *= f);
                }
                vec![
                    (*a, Tensor::new(g.shape().to_vec(), da)?),
                    (*s, Tensor::new(sv.shape().to_vec(), ds)?),
                ]
            }
            Op::Softmax(a) => {
                let c = g.last_extent();
                let mut da = vec![0.0; g.numel()];
                for ((d, y), gy) in da
                    .chunks_mut(c)
                    .zip(out.data().chunks(c))
                    .zip(g.data().chunks(c))
                {
                    let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                    for ((di, yi), gi) in d.iter_mut().zip(y).zip(gy) {
                        *di = yi * (gi - dot);
                    }
                }
                vec![(*a, Tensor::new(g.shape().to_vec(), da)?)]
            }
            Op::Reduce(a, axis, kind) => {
                let av = val(*a);
                let (outer, extent, inner) = av.split_around(*axis);
                let factor = match kind {
                    ReduceKind::Sum => 1.0,
                    ReduceKind::Mean => 1.0 / extent as f64,
                };
                let mut da = vec![0.0; av.numel()];
                for o in 0..outer {
                    let src = &g.data()[o * inner..(o + 1) * inner];
                    for e in 0..extent {
                        let dst = &mut da[(o * extent + e) * inner..(o * extent + e + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d = s * factor;
                        }
                    }
                }
                vec![(*a, Tensor::new(av.shape().to_vec(), da)?)]
            }
            Op::SumAll(a) => {
                let gv = g.data()[0];
                vec![(*a, Tensor::full(val(*a).shape(), gv)?)]
            }
            Op::Concat(parts, axis) => {
                let sizes: Vec<usize> = parts.iter().map(|p| val(*p).shape()[*axis]).collect();
                parts
                    .iter()
                    .copied()
                    .zip(g.split(*axis, &sizes)?)
                    .collect()
            }
            Op::Reshape(a) => vec![(*a, g.reshape(val(*a).shape())?)],
            Op::Gather(table, ids) => {
                let tv = val(*table);
                let c = tv.shape()[1];
                let mut dt = vec![0.0; tv.numel()];
                for (k, &id) in ids.iter().enumerate() {
                    for (d, s) in dt[id * c..(id + 1) * c]
                        .iter_mut()
                        .zip(&g.data()[k * c..(k + 1) * c])
                    {
                        *d += s;
                    }
                }
                vec![(*table, Tensor::new(tv.shape().to_vec(), dt)?)]
            }
            Op::SelectRows(a, rows) => {
                let av = val(*a);
                let (m, c) = (av.row_count(), av.last_extent());
                let k = rows.len();
                let mut da = vec![0.0; av.numel()];
                for b in 0..av.batch_count() {
                    for (j, &r) in rows.iter().enumerate() {
                        let src = &g.data()[(b * k + j) * c..(b * k + j + 1) * c];
                        let dst = &mut da[(b * m + r) * c..(b * m + r + 1) * c];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
                vec![(*a, Tensor::new(av.shape().to_vec(), da)?)]
            }
            Op::AvgPool(a, target) => {
                let av = val(*a);
                let (m, c) = (av.row_count(), av.last_extent());
                let bounds = pool_bounds(m, *target);
                let mut da = vec![0.0; av.numel()];
                for b in 0..av.batch_count() {
                    for (i, &(lo, hi)) in bounds.iter().enumerate() {
                        let inv = 1.0 / (hi - lo) as f64;
                        let src = &g.data()[(b * target + i) * c..(b * target + i + 1) * c];
                        for r in lo..hi {
                            let dst = &mut da[(b * m + r) * c..(b * m + r + 1) * c];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += s * inv;
                            }
                        }
                    }
                }
                vec![(*a, Tensor::new(av.shape().to_vec(), da)?)]
            }
            Op::Relu(a) => {
                let av = val(*a);
                let da = g
                    .data()
                    .iter()
                    .zip(av.data())
                    .map(|(gi, x)| if *x > 0.0 { *gi } else { 0.0 })
                    .collect();
                vec![(*a, Tensor::new(av.shape().to_vec(), da)?)]
            }
            Op::Sigmoid(a) => {
                let da = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(gi, s)| gi * s * (1.0 - s))
                    .collect();
                vec![(*a, Tensor::new(out.shape().to_vec(), da)?)]
            }
            Op::LogLoss(p, labels) => {
                let pv = val(*p);
                let scale = g.data()[0] / labels.len() as f64;
                let dp = pv
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&pi, &y)| {
                        if pi <= PROB_EPS || pi >= 1.0 - PROB_EPS {
                            0.0
                        } else {
                            -scale * (y / pi - (1.0 - y) / (1.0 - pi))
                        }
                    })
                    .collect();
                vec![(*p, Tensor::new(pv.shape().to_vec(), dp)?)]
            }
        })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean clamped binary cross-entropy.
pub fn logloss(probabilities: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    -total / labels.len() as f64
}

/// Half-open input row ranges averaged into each of `target` output rows.
pub fn pool_bounds(rows: usize, target: usize) -> Vec<(usize, usize)> {
    (0..target)
        .map(|i| {
            let lo = i * rows / target;
            let hi = ((i + 1) * rows).div_ceil(target);
            (lo, hi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let sq = tape.mul(w, w).unwrap();
        let root = tape.sum_all(sq);
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.wrt(w).data(), &[2.0, 4.0]);
        assert_eq!(grads.wrt(root).data(), &[1.0]);
    }

    #[test]
    fn constant_root_gives_zero_gradients() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let c = tape.constant(Tensor::vector(vec![3.0, 4.0]).unwrap());
        let root = tape.sum_all(c);
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.wrt(w), Tensor::zeros(&[2]).unwrap());
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        assert!(matches!(tape.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn pooling_bounds_cover_inputs() {
        assert_eq!(pool_bounds(4, 2), vec![(0, 2), (2, 4)]);
        assert_eq!(pool_bounds(6, 4), vec![(0, 2), (1, 3), (3, 5), (4, 6)]);
        assert_eq!(pool_bounds(3, 3), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn pooling_example() {
        let mut tape = Tape::new();
        let p = tape.constant(
            Tensor::from_rows(&[
                vec![1.0, 2.0],
                vec![3.0, 4.0],
                vec![5.0, 6.0],
                vec![7.0, 8.0],
            ])
            .unwrap(),
        );
        let pooled = tape.adaptive_avg_pool(p, 2).unwrap();
        assert_eq!(tape.value(pooled).data(), &[2.0, 3.0, 6.0, 7.0]);
        let same = tape.adaptive_avg_pool(p, 4).unwrap();
        assert_eq!(tape.value(same), tape.value(p));
        assert!(matches!(tape.adaptive_avg_pool(p, 5), Err(Error::Config(_))));
    }

    #[test]
    fn logloss_examples() {
        assert!((logloss(&[0.5], &[1.0]) - 2f64.ln()).abs() < 1e-12);
        assert!(logloss(&[1.0, 0.0], &[1.0, 0.0]) < 1e-6);
        let expected = -0.5 * (0.9f64.ln() + 0.9f64.ln());
        assert!((logloss(&[0.9, 0.1], &[1.0, 0.0]) - expected).abs() < 1e-12);
        assert!((expected - 0.10536).abs() < 1e-5);
    }

    #[test]
    fn fault_flips_mul_gradient() {
        let mut tape = Tape::new();
        tape.inject_fault(BackwardFault::FlipMulSign);
        let w = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let sq = tape.mul(w, w).unwrap();
        let root = tape.sum_all(sq);
        assert_eq!(tape.backward(root).unwrap().wrt(w).data(), &[-2.0, -4.0]);
    }
}
