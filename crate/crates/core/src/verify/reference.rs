//! Scalar-loop reimplementation of one cross attentional product layer.
//!
//! Deliberately shares nothing with the tape-based modules beyond reading
//! tensor data: plain nested `Vec`s, explicit loops, its own softmax and its
//! own pooling windows.

use crate::crossnet::ProductKind;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub type Matrix = Vec<Vec<f64>>;

/// Per-head `(query, key, value)` matrices, each `d x d/h`, and the `d x d`
/// output projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceWeights {
    pub heads: Vec<[Matrix; 3]>,
    pub output: Matrix,
}

impl ReferenceWeights {
    /// From multi-head tensors laid out as `q, k, v` per head, then output.
    pub fn from_tensors(tensors: &[Tensor]) -> Result<Self> {
        if tensors.len() < 4 || (tensors.len() - 1) % 3 != 0 {
            return Err(Error::Config(format!("{} tensors do not form a layer", tensors.len())));
        }
        let m = |t: &Tensor| -> Result<Matrix> { to_matrix(t) };
        let heads = tensors[..tensors.len() - 1]
            .chunks(3)
            .map(|c| Ok([m(&c[0])?, m(&c[1])?, m(&c[2])?]))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReferenceWeights {
            heads,
            output: m(&tensors[tensors.len() - 1])?,
        })
    }
}

pub fn to_matrix(t: &Tensor) -> Result<Matrix> {
    if t.rank() != 2 {
        return Err(Error::Shape {
            shape: t.shape().to_vec(),
            reason: "expected a matrix".into(),
        });
    }
    let cols = t.shape()[1];
    Ok(t.data().chunks(cols).map(<[f64]>::to_vec).collect())
}

/// Reference layer outputs plus the number of multiplications performed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrace {
    pub z: Matrix,
    pub p: Matrix,
    pub y: Vec<f64>,
    pub x_next: Matrix,
    pub attention: Vec<Matrix>,
    /// Multiply-accumulates in projections, attention and products;
    /// exponentials, divisions and plain additions are not counted.
    pub mult_adds: u64,
}

pub fn naive_reference_layer(x_l: &Matrix, x_0: &Matrix, w: &ReferenceWeights, kind: ProductKind) -> ReferenceTrace {
    let n = x_l.len();
    let d = x_l[0].len();
    let mut macs = 0u64;

    let mut concat = vec![Vec::new(); n];
    let mut attention = Vec::new();
    for [wq, wk, wv] in &w.heads {
        let dv = wv[0].len();
        let mut q = vec![vec![0.0; dv]; n];
        let mut k = vec![vec![0.0; dv]; n];
        let mut v = vec![vec![0.0; dv]; n];
        for i in 0..n {
            for c in 0..dv {
                for r in 0..d {
                    q[i][c] += x_l[i][r] * wq[r][c];
                    k[i][c] += x_l[i][r] * wk[r][c];
                    v[i][c] += x_l[i][r] * wv[r][c];
                    macs += 3;
                }
            }
        }
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for c in 0..dv {
                    s += q[i][c] * k[j][c];
                    macs += 1;
                }
                a[i][j] = s / (dv as f64).sqrt();
            }
            let top = a[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..n {
                a[i][j] = (a[i][j] - top).exp();
                total += a[i][j];
            }
            for j in 0..n {
                a[i][j] /= total;
            }
        }
        for i in 0..n {
            for c in 0..dv {
                let mut s = 0.0;
                for j in 0..n {
                    s += a[i][j] * v[j][c];
                    macs += 1;
                }
                concat[i].push(s);
            }
        }
        attention.push(a);
    }

    let mut z = vec![vec![0.0; d]; n];
    for i in 0..n {
        for c in 0..d {
            for r in 0..concat[i].len() {
                z[i][c] += concat[i][r] * w.output[r][c];
                macs += 1;
            }
        }
    }

    let mut p = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let row: Vec<f64> = match kind {
                ProductKind::Inner => (0..d).map(|c| z[i][c] * x_0[j][c]).collect(),
                ProductKind::Outer => {
                    let s: f64 = x_0[j].iter().sum();
                    (0..d).map(|c| z[i][c] * s).collect()
                }
            };
            macs += d as u64;
            p.push(row);
        }
    }
    let y = p.iter().map(|row| row.iter().sum()).collect();

    let m = p.len();
    let mut x_next = vec![vec![0.0; d]; n];
    for (i, out) in x_next.iter_mut().enumerate() {
        let lo = i * m / n;
        let hi = ((i + 1) * m).div_ceil(n);
        for row in &p[lo..hi] {
            for c in 0..d {
                out[c] += row[c];
            }
        }
        for v in out.iter_mut() {
            *v /= (hi - lo) as f64;
        }
    }

    ReferenceTrace {
        z,
        p,
        y,
        x_next,
        attention,
        mult_adds: macs,
    }
}
