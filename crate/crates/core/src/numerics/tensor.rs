use std::fmt;

use crate::error::{Error, Result};

/// Largest rank the engine supports.
pub const MAX_RANK: usize = 3;

/// Dense row-major array of `f64` with rank 1 to 3.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Reduction applied by [`Tensor::reduce`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
}

/// Pointwise binary operation applied by [`Tensor::elementwise`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
}

impl BinaryKind {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryKind::Add => a + b,
            BinaryKind::Sub => a - b,
            BinaryKind::Mul => a * b,
        }
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::Shape {
            shape: shape.to_vec(),
            reason: format!("rank must be 1..={MAX_RANK}"),
        });
    }
    if shape.contains(&0) {
        return Err(Error::Shape {
            shape: shape.to_vec(),
            reason: "extents must be positive".into(),
        });
    }
    Ok(())
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape)?;
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape {
                shape,
                reason: format!("holds {} values", data.len()),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        check_shape(shape)?;
        let numel = shape.iter().product();
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 1.0)
    }

    /// A one-element rank-1 tensor.
    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(values: Vec<f64>) -> Result<Self> {
        Self::new(vec![values.len()], values)
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape {
                shape: vec![rows.len(), cols],
                reason: "ragged rows".into(),
            });
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        if index.len() != self.rank() {
            return None;
        }
        let mut flat = 0;
        for (&i, &extent) in index.iter().zip(&self.shape) {
            if i >= extent {
                return None;
            }
            flat = flat * extent + i;
        }
        Some(self.data[flat])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the flattened values.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::dim("max_abs_diff", &self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    /// Rows of the trailing matrix (second-to-last extent; 1 for rank 1).
    pub(crate) fn row_count(&self) -> usize {
        if self.rank() >= 2 {
            self.shape[self.rank() - 2]
        } else {
            1
        }
    }

    pub(crate) fn last_extent(&self) -> usize {
        self.shape[self.rank() - 1]
    }

    /// Number of independent trailing matrices (product of leading extents).
    pub(crate) fn batch_count(&self) -> usize {
        if self.rank() >= 2 {
            self.shape[..self.rank() - 2].iter().product()
        } else {
            1
        }
    }

    pub fn elementwise(&self, other: &Tensor, kind: BinaryKind) -> Result<Tensor> {
        if self.shape != other.shape {
            let op = match kind {
                BinaryKind::Add => "add",
                BinaryKind::Sub => "sub",
                BinaryKind::Mul => "mul",
            };
            return Err(Error::dim(op, &self.shape, &other.shape));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| kind.apply(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(other, BinaryKind::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(other, BinaryKind::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(other, BinaryKind::Mul)
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Matrix product over the trailing two axes.
    ///
    /// Accepted combinations: `[m,k]·[k,p]`, `[b,m,k]·[k,p]` (shared right
    /// operand) and `[b,m,k]·[b,k,p]` (batched).
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let err = || Error::dim("matmul", &self.shape, &other.shape);
        match (self.rank(), other.rank()) {
            (2, 2) | (3, 2) => {
                let k = self.last_extent();
                let (k2, p) = (other.shape[0], other.shape[1]);
                if k != k2 {
                    return Err(err());
                }
                let rows = self.numel() / k;
                let data = gemm(&self.data, &other.data, rows, k, p);
                let mut shape = self.shape.clone();
                *shape.last_mut().unwrap() = p;
                Ok(Tensor { shape, data })
            }
            (3, 3) => {
                let (b, m, k) = (self.shape[0], self.shape[1], self.shape[2]);
                let (b2, k2, p) = (other.shape[0], other.shape[1], other.shape[2]);
                if b != b2 || k != k2 {
                    return Err(err());
                }
                let mut data = Vec::with_capacity(b * m * p);
                for i in 0..b {
                    let lhs = &self.data[i * m * k..(i + 1) * m * k];
                    let rhs = &other.data[i * k * p..(i + 1) * k * p];
                    data.extend(gemm(lhs, rhs, m, k, p));
                }
                Ok(Tensor {
                    shape: vec![b, m, p],
                    data,
                })
            }
            _ => Err(err()),
        }
    }

    /// Swaps the trailing two axes. Rank-1 input is treated as a row vector
    /// and comes back as a column.
    pub fn transpose_last(&self) -> Tensor {
        if self.rank() == 1 {
            return Tensor {
                shape: vec![self.numel(), 1],
                data: self.data.clone(),
            };
        }
        let (m, n) = (self.row_count(), self.last_extent());
        let mut data = vec![0.0; self.numel()];
        for b in 0..self.batch_count() {
            let base = b * m * n;
            for i in 0..m {
                for j in 0..n {
                    data[base + j * m + i] = self.data[base + i * n + j];
                }
            }
        }
        let mut shape = self.shape.clone();
        let r = shape.len();
        shape.swap(r - 2, r - 1);
        Tensor { shape, data }
    }

    /// Softmax along the last axis with row-max subtraction.
    pub fn softmax_rows(&self) -> Tensor {
        let n = self.last_extent();
        let mut data = self.data.clone();
        for row in data.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }

    /// Sum or mean over one axis; the axis disappears from the shape. A
    /// rank-1 input collapses to a one-element tensor.
    pub fn reduce(&self, axis: usize, kind: ReduceKind) -> Result<Tensor> {
        if axis >= self.rank() {
            return Err(Error::Axis {
                axis,
                rank: self.rank(),
            });
        }
        let (outer, extent, inner) = self.split_around(axis);
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..extent {
                let src = &self.data[(o * extent + a) * inner..(o * extent + a + 1) * inner];
                let dst = &mut data[o * inner..(o + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        if kind == ReduceKind::Mean {
            let inv = 1.0 / extent as f64;
            data.iter_mut().for_each(|v| *v *= inv);
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Tensor { shape, data })
    }

    pub fn sum_all(&self) -> f64 {
        self.data.iter().sum()
    }

    /// (product of extents before `axis`, extent of `axis`, product after).
    pub(crate) fn split_around(&self, axis: usize) -> (usize, usize, usize) {
        let outer = self.shape[..axis].iter().product();
        let inner = self.shape[axis + 1..].iter().product();
        (outer, self.shape[axis], inner)
    }

    /// Joins tensors along `axis`; every other extent must agree.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        if axis >= first.rank() {
            return Err(Error::Axis {
                axis,
                rank: first.rank(),
            });
        }
        for p in &parts[1..] {
            let same_rest = p.rank() == first.rank()
                && p
                    .shape
                    .iter()
                    .zip(&first.shape)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !same_rest {
                return Err(Error::dim("concat", &first.shape, &p.shape));
            }
        }
        let (outer, _, inner) = first.split_around(axis);
        let total: usize = parts.iter().map(|p| p.shape[axis]).sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape[axis] * inner;
                data.extend_from_slice(&p.data[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape.clone();
        shape[axis] = total;
        Ok(Tensor { shape, data })
    }

    /// Inverse of [`Tensor::concat`]: cuts `axis` into consecutive pieces.
    pub fn split(&self, axis: usize, sizes: &[usize]) -> Result<Vec<Tensor>> {
        if axis >= self.rank() {
            return Err(Error::Axis {
                axis,
                rank: self.rank(),
            });
        }
        if sizes.iter().sum::<usize>() != self.shape[axis] || sizes.contains(&0) {
            return Err(Error::dim("split", &self.shape, sizes));
        }
        let (outer, extent, inner) = self.split_around(axis);
        let mut out = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for &size in sizes {
            let mut data = Vec::with_capacity(outer * size * inner);
            for o in 0..outer {
                let start = (o * extent + offset) * inner;
                data.extend_from_slice(&self.data[start..start + size * inner]);
            }
            let mut shape = self.shape.clone();
            shape[axis] = size;
            out.push(Tensor { shape, data });
            offset += size;
        }
        Ok(out)
    }
}

/// Row-major `[rows,k]·[k,p]`.
pub(crate) fn gemm(a: &[f64], b: &[f64], rows: usize, k: usize, p: usize) -> Vec<f64> {
    let mut c = vec![0.0; rows * p];
    for i in 0..rows {
        let out = &mut c[i * p..(i + 1) * p];
        for (kk, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * p..(kk + 1) * p];
            for (o, &bv) in out.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    c
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.numel() <= 32 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matmul() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let i = Tensor::identity(2).unwrap();
        assert_eq!(i.matmul(&a).unwrap(), a);
    }

    #[test]
    fn row_times_column() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.data(), &[11.0]);
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]).unwrap();
        let err = a.matmul(&a).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn softmax_examples() {
        let t = Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap().softmax_rows();
        assert_eq!(t.data(), &[0.5, 0.5]);
        let t = Tensor::from_rows(&[vec![1000.0, 1000.0]])
            .unwrap()
            .softmax_rows();
        assert_eq!(t.data(), &[0.5, 0.5]);
        let t = Tensor::from_rows(&[vec![0.0, 3f64.ln()]])
            .unwrap()
            .softmax_rows();
        assert!((t.data()[0] - 0.25).abs() < 1e-15);
        assert!((t.data()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn elementwise_examples() {
        let a = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
        let b = Tensor::vector(vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.mul(&b).unwrap().data(), &[4.0, 10.0, 18.0]);
        let z = Tensor::zeros(&[3]).unwrap();
        assert_eq!(a.add(&z).unwrap(), a);
        assert_eq!(a.sub(&a).unwrap(), z);
        assert!(a.add(&Tensor::zeros(&[2]).unwrap()).is_err());
    }

    #[test]
    fn reduce_examples() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.reduce(1, ReduceKind::Sum).unwrap().data(), &[3.0, 7.0]);
        let c = Tensor::full(&[2, 2], 2.0).unwrap();
        assert_eq!(c.reduce(0, ReduceKind::Mean).unwrap().data(), &[2.0, 2.0]);
        let z = Tensor::zeros(&[3, 4]).unwrap().reduce(0, ReduceKind::Sum).unwrap();
        assert_eq!(z, Tensor::zeros(&[4]).unwrap());
        assert!(matches!(
            a.reduce(2, ReduceKind::Sum),
            Err(Error::Axis { axis: 2, rank: 2 })
        ));
    }

    #[test]
    fn concat_examples() {
        let a = Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let c = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(c, Tensor::from_rows(&[vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap());
        assert_eq!(Tensor::concat(&[&a], 0).unwrap(), a);
        let ragged = Tensor::zeros(&[3, 1]).unwrap();
        assert!(Tensor::concat(&[&a, &ragged], 1).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![1, 1, 1, 1], vec![1.0]).is_err());
        assert!(Tensor::zeros(&[0, 2]).is_err());
    }

    #[test]
    fn transpose_batched() {
        let t = Tensor::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let tt = t.transpose_last();
        assert_eq!(tt.shape(), &[2, 2, 1]);
        assert_eq!(tt.data(), &[1.0, 2.0, 3.0, 4.0]);
    }
}
