use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use dcap::featurestore::{split_dataset, DatasetSplit};
use dcap::model::{save_checkpoint, Model, ModelConfig, ModelKind, CLICK_LOG_DROPOUT, MOVIELENS_DROPOUT};
use dcap::trainer::{evaluate, format_mean_std, mean_std, train, EpochRecord, StopReason, TrainConfig};
use serde::Serialize;

use crate::config::{read_config_file, Layer, RunConfig};
use crate::data;

#[derive(Debug, Serialize)]
struct TrialSummary {
    seed: u64,
    epochs: usize,
    best_epoch: usize,
    stop: String,
    test_auc: f64,
    test_logloss: f64,
    checkpoint: String,
    log: String,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    name: String,
    layers: usize,
    heads: usize,
    trials: Vec<TrialSummary>,
    auc: Option<String>,
    logloss: Option<String>,
}

#[derive(Debug, Serialize)]
struct Summary {
    config_hash: String,
    config: Layer,
    dropout: f64,
    split_seed: u64,
    instances: [usize; 3],
    runs: Vec<RunSummary>,
}

pub fn run(config_file: &Option<PathBuf>, flags: &Layer) -> Result<ExitCode> {
    let file = match config_file {
        Some(p) => read_config_file(p)?,
        None => Layer::new(),
    };
    let cfg = RunConfig::resolve(&file, flags)?;
    let data_path = cfg
        .data
        .clone()
        .context("no dataset: pass --data or set DCAP_DATA_DIR")?;
    let dataset = data::load(&data_path)?;
    let dropout = cfg.dropout.unwrap_or(if data::is_movielens(&dataset) {
        MOVIELENS_DROPOUT
    } else {
        CLICK_LOG_DROPOUT
    });
    let split = split_dataset(&dataset.samples, cfg.split_seed)?;
    log::info!(
        "{}: {} train / {} validation / {} test, dropout {dropout}",
        data_path.display(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    // The grid only applies to the cross layers.
    let grid: Vec<(usize, usize)> = if cfg.model == ModelKind::Dcap {
        cfg.layers.iter().flat_map(|&l| cfg.heads.iter().map(move |&h| (l, h))).collect()
    } else {
        vec![(cfg.layers[0], cfg.heads[0])]
    };

    let mut summary = Summary {
        config_hash: cfg.hash(),
        config: cfg.to_layer(),
        dropout,
        split_seed: cfg.split_seed,
        instances: [split.train.len(), split.validation.len(), split.test.len()],
        runs: Vec::new(),
    };
    let mut failed = false;
    for (layers, heads) in grid {
        let mut mc = ModelConfig::new(cfg.model, dataset.vocab_sizes());
        mc.embedding_dim = cfg.embedding_dim;
        mc.layers = layers;
        mc.heads = heads;
        mc.product = cfg.product;
        mc.residual = cfg.residual;
        mc.hidden = cfg.hidden.clone();
        mc.dropout = dropout;
        let name = match cfg.model {
            ModelKind::Dcap => format!("dcap_L{layers}_h{heads}"),
            other => other.to_string(),
        };
        let run = train_grid_point(&cfg, &mc, &split, &name)?;
        failed |= run.auc.is_none();
        summary.runs.push(run);
    }

    let path = cfg.out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

/// `cfg.trials` trials with seeds `seed, seed+1, ..`. A diverged trial keeps
/// its checkpoint and log but leaves the run without an aggregate.
fn train_grid_point(cfg: &RunConfig, mc: &ModelConfig, split: &DatasetSplit, name: &str) -> Result<RunSummary> {
    let dir = cfg.out.join(name);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut diverged = false;
    for t in 0..cfg.trials {
        let seed = cfg.seed.wrapping_add(t as u64);
        let mut mc = mc.clone();
        mc.seed = seed;
        let tc = TrainConfig {
            learning_rate: cfg.lr,
            weight_decay: cfg.weight_decay,
            decay: cfg.decay,
            batch_size: cfg.batch_size,
            patience: cfg.patience,
            max_epochs: cfg.max_epochs,
            seed,
        };
        let log_path = dir.join(format!("trial_{seed}.tsv"));
        let mut log_file = EpochLog::create(&log_path)?;
        let outcome = train(Model::new(mc)?, split, &tc, |rec| {
            log::info!("{name} seed {seed} epoch {}: loss {:.6} {}", rec.epoch, rec.train_loss, rec.validation);
            log_file.append(rec);
        })?;
        log_file.finish()?;

        let ckpt = dir.join(format!("trial_{seed}.ckpt"));
        save_checkpoint(&ckpt, &outcome.model)?;
        let test = evaluate(&outcome.model, &split.test, "test", cfg.batch_size)?;
        if let StopReason::Diverged { .. } = outcome.stop {
            eprintln!("{name} seed {seed}: {}; best checkpoint kept at {}", outcome.stop, ckpt.display());
            diverged = true;
        }
        println!("{name} seed {seed}: {test} best epoch {} ({})", outcome.state.best_epoch, outcome.stop);
        trials.push(TrialSummary {
            seed,
            epochs: outcome.state.epoch,
            best_epoch: outcome.state.best_epoch,
            stop: outcome.stop.to_string(),
            test_auc: test.auc,
            test_logloss: test.logloss,
            checkpoint: ckpt.display().to_string(),
            log: log_path.display().to_string(),
        });
        if diverged {
            break;
        }
    }

    let (auc, logloss) = if diverged {
        (None, None)
    } else {
        let aucs: Vec<f64> = trials.iter().map(|t| t.test_auc).collect();
        let losses: Vec<f64> = trials.iter().map(|t| t.test_logloss).collect();
        let a = mean_std(&aucs).context("no trials")?;
        let l = mean_std(&losses).context("no trials")?;
        let (a, l) = (format_mean_std(a.0, a.1), format_mean_std(l.0, l.1));
        println!("{name}: AUC {a} Logloss {l}");
        (Some(a), Some(l))
    };
    Ok(RunSummary {
        name: name.to_string(),
        layers: mc.layers,
        heads: mc.heads,
        trials,
        auc,
        logloss,
    })
}

/// Per-epoch TSV; write errors are kept until `finish` so the training
/// callback stays infallible.
struct EpochLog {
    path: PathBuf,
    file: fs::File,
    error: Option<std::io::Error>,
}

impl EpochLog {
    fn create(path: &Path) -> Result<Self> {
        let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "{}", EpochRecord::TSV_HEADER)?;
        Ok(EpochLog {
            path: path.to_path_buf(),
            file,
            error: None,
        })
    }

    fn append(&mut self, rec: &EpochRecord) {
        if self.error.is_none() {
            self.error = writeln!(self.file, "{}", rec.tsv()).err();
        }
    }

    fn finish(self) -> Result<()> {
        match self.error {
            Some(e) => Err(e).with_context(|| format!("writing {}", self.path.display())),
            None => Ok(()),
        }
    }
}
