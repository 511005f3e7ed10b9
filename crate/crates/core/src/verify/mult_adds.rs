use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::init_multi_head;
use crate::crossnet::ProductKind;
use crate::error::Result;
use crate::params::uniform;
use crate::verify::reference::{naive_reference_layer, to_matrix, ReferenceWeights};

/// Asymptotic cross-stack cost `3 n^2 d l + 4 n d^2 l`.
pub fn closed_form_mult_adds(fields: usize, dim: usize, layers: usize) -> u64 {
    let (n, d, l) = (fields as u64, dim as u64, layers as u64);
    3 * n * n * d * l + 4 * n * d * d * l
}

/// Closed form next to a counted tally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultAddReport {
    pub closed_form: u64,
    pub counted: u64,
}

impl MultAddReport {
    /// `max / min` of the two figures.
    pub fn ratio(&self) -> f64 {
        let (a, b) = (self.closed_form as f64, self.counted as f64);
        a.max(b) / a.min(b)
    }
}

/// Runs the reference stack once on random inputs and tallies its
/// multiply-accumulates.
pub fn count_mult_adds(fields: usize, dim: usize, heads: usize, layers: usize, kind: ProductKind) -> Result<MultAddReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x0 = to_matrix(&uniform(&[fields, dim], 1.0, &mut rng)?)?;
    let mut x = x0.clone();
    let mut counted = 0;
    for _ in 0..layers {
        let w = ReferenceWeights::from_tensors(&init_multi_head(dim, heads, &mut rng)?)?;
        let t = naive_reference_layer(&x, &x0, &w, kind);
        counted += t.mult_adds;
        x = t.x_next;
    }
    Ok(MultAddReport {
        closed_form: closed_form_mult_adds(fields, dim, layers),
        counted,
    })
}
