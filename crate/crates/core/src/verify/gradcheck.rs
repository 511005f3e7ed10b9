use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::featurestore::EncodedSample;
use crate::model::{Model, ModelConfig, ModelKind, Mode};
use crate::numerics::{BackwardFault, Tape};
use crate::params::uniform;
use crate::verify::finite_diff::{finite_diff_grad, max_relative_error, norm_relative_error};

/// Central-difference step used by [`gradient_check`].
pub const GRADIENT_CHECK_STEP: f64 = 1e-5;

/// Comparison for one named parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub coordinates: usize,
    /// Norm-wise relative error of the whole tensor; the pass criterion.
    pub relative_error: f64,
    /// Worst coordinate-wise relative error, for diagnosis.
    pub max_coordinate_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub groups: Vec<GroupCheck>,
}

impl GradientReport {
    pub fn max_relative_error(&self) -> f64 {
        self.groups.iter().map(|g| g.relative_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        !self.groups.is_empty() && self.groups.iter().all(|g| g.relative_error < tol)
    }
}

/// Small DCAP used by the gradient check: 4 fields, d = 8, two layers of two
/// heads, hidden widths 5 and 5, no dropout.
pub fn toy_config(seed: u64) -> ModelConfig {
    let mut c = ModelConfig::new(ModelKind::Dcap, vec![3, 4, 2, 3]);
    c.embedding_dim = 8;
    c.layers = 2;
    c.heads = 2;
    c.hidden = vec![5, 5];
    c.dropout = 0.0;
    c.seed = seed;
    c
}

/// [`toy_config`] model with every parameter redrawn uniformly from
/// `[-1, 1]`. At the default initialization attention is nearly uniform and
/// the query/key gradients are around 1e-7, where central-difference
/// roundoff, not the backward pass, dominates any relative comparison.
pub fn toy_model(seed: u64) -> Result<Model> {
    let mut model = Model::new(toy_config(seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in model.params_mut().tensors_mut() {
        *t = uniform(t.shape(), 1.0, &mut rng)?;
    }
    Ok(model)
}

/// Batch touching every id of every field at least once, both labels.
pub fn toy_batch(vocab_sizes: &[usize]) -> Vec<EncodedSample> {
    let rows = vocab_sizes.iter().copied().max().unwrap_or(1).max(2);
    (0..rows)
        .map(|r| {
            let ids = vocab_sizes.iter().enumerate().map(|(f, &v)| (r + f) % v).collect();
            EncodedSample::new(ids, (r % 2) as u8)
        })
        .collect()
}

fn batch_loss(model: &Model, batch: &[EncodedSample], fault: Option<BackwardFault>) -> Result<(f64, Vec<f64>)> {
    let refs: Vec<&EncodedSample> = batch.iter().collect();
    let labels: Vec<f64> = batch.iter().map(|s| f64::from(s.label)).collect();
    let mut tape = Tape::new();
    if let Some(f) = fault {
        tape.inject_fault(f);
    }
    let vars = model.params().bind(&mut tape);
    let fwd = model.forward(&mut tape, &vars, &refs, &mut Mode::Eval)?;
    let loss = tape.logloss(fwd.probabilities, &labels)?;
    let grads = tape.backward(loss)?;
    let flat = model
        .params()
        .collect_grads(&grads, &vars)
        .iter()
        .flat_map(|t| t.data().to_vec())
        .collect();
    Ok((tape.value(loss).data()[0], flat))
}

/// Backward pass against central differences of the batch log loss, for
/// every parameter tensor of `model`. `fault` corrupts the backward pass
/// (mutation check).
pub fn gradient_check(model: &Model, batch: &[EncodedSample], fault: Option<BackwardFault>) -> Result<GradientReport> {
    let (_, analytic) = batch_loss(model, batch, fault)?;
    let point = model.params().flatten();
    let mut probe = model.clone();
    let numeric = finite_diff_grad(
        |w| {
            probe.params_mut().assign_flat(w)?;
            Ok(batch_loss(&probe, batch, None)?.0)
        },
        &point,
        GRADIENT_CHECK_STEP,
    )?;

    let mut groups = Vec::new();
    let mut offset = 0;
    for (name, t) in model.params().names().iter().zip(model.params().tensors()) {
        let r = offset..offset + t.numel();
        groups.push(GroupCheck {
            name: name.clone(),
            coordinates: t.numel(),
            relative_error: norm_relative_error(&analytic[r.clone()], &numeric[r.clone()]),
            max_coordinate_error: max_relative_error(&analytic[r.clone()], &numeric[r]),
        });
        offset += t.numel();
    }
    Ok(GradientReport { groups })
}
