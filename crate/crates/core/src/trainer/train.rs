use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::featurestore::{minibatches, DatasetSplit, EncodedSample, DEFAULT_BATCH_SIZE};
use crate::model::{Model, ModelConfig, Mode, DEFAULT_WEIGHT_DECAY};
use crate::numerics::Tape;
use crate::trainer::adam::{AdamState, DecayMode, DEFAULT_LEARNING_RATE};
use crate::trainer::metrics::{mean_std, MetricsReport};

pub const DEFAULT_PATIENCE: usize = 3;
pub const DEFAULT_MAX_EPOCHS: usize = 50;

/// ChaCha stream reserved for dropout masks; shuffles use stream = epoch.
const DROPOUT_STREAM: u64 = 1 << 63;

/// Optimizer and loop settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub decay: DecayMode,
    pub batch_size: usize,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Drives minibatch order and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            decay: DecayMode::Coupled,
            batch_size: DEFAULT_BATCH_SIZE,
            patience: DEFAULT_PATIENCE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("patience and epoch cap must be positive".into()));
        }
        Ok(())
    }
}

/// One epoch of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Sample-weighted mean log loss of the training minibatches, each taken
    /// before its update.
    pub train_loss: f64,
    pub validation: MetricsReport,
    pub seconds: f64,
}

impl EpochRecord {
    pub const TSV_HEADER: &'static str = "epoch\ttrain_loss\tval_auc\tval_logloss\tseconds";

    pub fn tsv(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.3}",
            self.epoch, self.train_loss, self.validation.auc, self.validation.logloss, self.seconds
        )
    }
}

/// Early-stopping bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    /// Non-decreasing; `None` before the first validation.
    pub best_auc: Option<f64>,
    /// 1-based epoch of `best_auc`.
    pub best_epoch: usize,
    pub since_improvement: usize,
    pub patience: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    fn new(patience: usize) -> Self {
        TrainState {
            epoch: 0,
            best_auc: None,
            best_epoch: 0,
            since_improvement: 0,
            patience,
            history: Vec::new(),
        }
    }

    /// Records an epoch; true when its validation AUC is a new best.
    fn record(&mut self, rec: EpochRecord) -> bool {
        self.epoch = rec.epoch;
        let improved = self.best_auc.is_none_or(|b| rec.validation.auc > b);
        if improved {
            self.best_auc = Some(rec.validation.auc);
            self.best_epoch = rec.epoch;
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        self.history.push(rec);
        improved
    }

    pub fn exhausted(&self) -> bool {
        self.since_improvement >= self.patience
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.train_loss).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Patience,
    EpochCap,
    Diverged { epoch: usize, reason: String },
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::Patience => f.write_str("early stop"),
            StopReason::EpochCap => f.write_str("epoch cap"),
            StopReason::Diverged { epoch, reason } => write!(f, "diverged at epoch {epoch}: {reason}"),
        }
    }
}

/// Result of a training run. `model` is the best-validation checkpoint, or
/// the initial model if no epoch finished.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub state: TrainState,
    pub stop: StopReason,
}

impl TrainOutcome {
    /// Turns a diverged run into [`Error::Diverged`].
    pub fn into_result(self) -> Result<Self> {
        match &self.stop {
            StopReason::Diverged { epoch, reason } => Err(Error::Diverged {
                epoch: *epoch,
                reason: reason.clone(),
            }),
            _ => Ok(self),
        }
    }
}

/// Eval-mode metrics of `model` over `samples`.
pub fn evaluate(model: &Model, samples: &[EncodedSample], split: &str, chunk: usize) -> Result<MetricsReport> {
    let p = model.predict(samples, chunk)?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    MetricsReport::compute(split, &p, &labels)
}

/// Mini-batch Adam on `split.train`, validated after every epoch.
/// Divergence (non-finite loss or gradient) stops the run with
/// [`StopReason::Diverged`] and the last good checkpoint.
pub fn train(
    mut model: Model,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::EmptyDataset("training and validation parts must be non-empty".into()));
    }
    let mut adam = AdamState::new(model.params(), cfg.learning_rate, cfg.weight_decay)?;
    adam.decay = cfg.decay;
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);

    let mut state = TrainState::new(cfg.patience);
    let mut best = model.clone();
    let eval_chunk = cfg.batch_size.max(1);

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for block in minibatches(split.train.len(), cfg.batch_size, cfg.seed, epoch)? {
            let batch: Vec<&EncodedSample> = block.iter().map(|&i| &split.train[i]).collect();
            let labels: Vec<f64> = batch.iter().map(|s| f64::from(s.label)).collect();
            let mut tape = Tape::new();
            let vars = model.params().bind(&mut tape);
            let fwd = model.forward(&mut tape, &vars, &batch, &mut Mode::Train(&mut dropout_rng))?;
            let loss = tape.logloss(fwd.probabilities, &labels)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Ok(diverged(best, state, epoch, format!("training loss {value}")));
            }
            loss_sum += value * batch.len() as f64;
            let grads = tape.backward(loss)?;
            let grads = model.params().collect_grads(&grads, &vars);
            match adam.step(model.params_mut(), &grads) {
                Ok(()) => {}
                Err(e @ Error::NonFiniteGradient(_)) => return Ok(diverged(best, state, epoch, e.to_string())),
                Err(e) => return Err(e),
            }
        }
        let train_loss = loss_sum / split.train.len() as f64;

        let validation = match evaluate(&model, &split.validation, "validation", eval_chunk) {
            Ok(v) if v.logloss.is_finite() => v,
            Ok(_) => return Ok(diverged(best, state, epoch, "non-finite validation loss".into())),
            Err(e) => return Err(e),
        };
        let rec = EpochRecord {
            epoch,
            train_loss,
            validation,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&rec);
        if state.record(rec) {
            best = model.clone();
        }
        if state.exhausted() {
            return Ok(TrainOutcome {
                model: best,
                state,
                stop: StopReason::Patience,
            });
        }
    }
    Ok(TrainOutcome {
        model: best,
        state,
        stop: StopReason::EpochCap,
    })
}

fn diverged(best: Model, state: TrainState, epoch: usize, reason: String) -> TrainOutcome {
    log::error!("training diverged at epoch {epoch}: {reason}");
    TrainOutcome {
        model: best,
        state,
        stop: StopReason::Diverged { epoch, reason },
    }
}

/// One trial of a multi-seed run.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub test: MetricsReport,
    pub history: Vec<EpochRecord>,
    pub model: Model,
}

/// Test metrics aggregated over trials.
#[derive(Clone, Debug)]
pub struct TrialSummary {
    pub trials: Vec<TrialResult>,
    pub auc: (f64, f64),
    pub logloss: (f64, f64),
}

/// Trains `trials` independent models; trial `i` uses seed `base + i` for
/// both initialization and the training streams. A diverged trial is an
/// error.
pub fn run_trials(
    model_config: &ModelConfig,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    trials: usize,
    mut on_epoch: impl FnMut(usize, &EpochRecord),
) -> Result<TrialSummary> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let mut results = Vec::with_capacity(trials);
    for t in 0..trials {
        let seed = cfg.seed.wrapping_add(t as u64);
        let mut mc = model_config.clone();
        mc.seed = seed;
        let tc = TrainConfig { seed, ..cfg.clone() };
        let outcome = train(Model::new(mc)?, split, &tc, |r| on_epoch(t, r))?.into_result()?;
        let test = evaluate(&outcome.model, &split.test, "test", tc.batch_size)?;
        log::info!("trial {t} seed {seed}: {test} ({})", outcome.stop);
        results.push(TrialResult {
            seed,
            epochs: outcome.state.epoch,
            best_epoch: outcome.state.best_epoch,
            stop: outcome.stop,
            test,
            history: outcome.state.history,
            model: outcome.model,
        });
    }
    let aucs: Vec<f64> = results.iter().map(|r| r.test.auc).collect();
    let losses: Vec<f64> = results.iter().map(|r| r.test.logloss).collect();
    Ok(TrialSummary {
        auc: mean_std(&aucs).expect("non-empty"),
        logloss: mean_std(&losses).expect("non-empty"),
        trials: results,
    })
}
