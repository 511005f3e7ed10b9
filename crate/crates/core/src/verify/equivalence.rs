use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{init_multi_head, MultiHeadParams};
use crate::crossnet::{layer_forward, LayerOptions, ProductKind};
use crate::error::Result;
use crate::numerics::{Tape, Tensor};
use crate::params::uniform;
use crate::verify::reference::{naive_reference_layer, to_matrix, Matrix, ReferenceWeights};

/// Worst disagreement between the production layer and the reference.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub kind: ProductKind,
    pub instances: usize,
    pub max_abs_diff: f64,
}

fn max_diff(a: &Tensor, b: &Matrix) -> f64 {
    a.data()
        .iter()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Compares `Z`, `P`, `Y`, pooled output and attention weights on random
/// instances with `3 <= n <= max_fields`, `1 <= d <= max_dim` and every head
/// count dividing `d`. `X_l` and `X_0` are drawn independently.
pub fn reference_equivalence(
    kind: ProductKind,
    instances: usize,
    max_fields: usize,
    max_dim: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.gen_range(3..=max_fields.max(3));
        let d = rng.gen_range(1..=max_dim.max(1));
        let divisors: Vec<usize> = (1..=d).filter(|h| d % h == 0).collect();
        let h = divisors[rng.gen_range(0..divisors.len())];
        let x_l = uniform(&[n, d], 2.0, &mut rng)?;
        let x_0 = uniform(&[n, d], 2.0, &mut rng)?;
        let weights = init_multi_head(d, h, &mut rng)?;

        let reference = naive_reference_layer(
            &to_matrix(&x_l)?,
            &to_matrix(&x_0)?,
            &ReferenceWeights::from_tensors(&weights)?,
            kind,
        );

        let mut tape = Tape::new();
        let xl = tape.constant(x_l);
        let x0 = tape.constant(x_0);
        let vars: Vec<_> = weights.into_iter().map(|t| tape.constant(t)).collect();
        let params = MultiHeadParams::from_vars(&vars)?;
        let options = LayerOptions { kind, residual: false };
        let got = layer_forward(&mut tape, xl, x0, &params, options, None)?.values(&tape);

        worst = worst
            .max(max_diff(&got.z, &reference.z))
            .max(max_diff(&got.p, &reference.p))
            .max(max_diff(&got.y, &vec![reference.y.clone()]))
            .max(max_diff(&got.x_next, &reference.x_next));
        for (a, b) in got.attention.iter().zip(&reference.attention) {
            worst = worst.max(max_diff(a, b));
        }
    }
    Ok(EquivalenceReport {
        kind,
        instances,
        max_abs_diff: worst,
    })
}
