use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use dcap::featurestore::{Dataset, EncodedSample};
use dcap::model::{bind_constants, load_checkpoint, Mode, Model};
use dcap::numerics::Tape;
use dcap::trainer::evaluate as score;

use crate::data;
use crate::{EvaluateArgs, ExportArgs, Part};

fn part_name(part: Part) -> &'static str {
    match part {
        Part::Train => "train",
        Part::Validation => "validation",
        Part::Test => "test",
        Part::All => "all",
    }
}

fn load_pair(checkpoint: &std::path::Path, data_path: &std::path::Path) -> Result<(Model, Dataset)> {
    let model = load_checkpoint(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let dataset = data::load(data_path)?;
    let expected = &model.config().vocab_sizes;
    let found = dataset.vocab_sizes();
    ensure!(
        *expected == found,
        "checkpoint expects vocabulary sizes {expected:?} but {} has {found:?}",
        data_path.display()
    );
    Ok((model, dataset))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let (model, dataset) = load_pair(&args.checkpoint, &args.data)?;
    let samples = data::select_part(&dataset, args.part, args.split_seed)?;
    let report = score(&model, &samples, part_name(args.part), args.batch_size)?;
    println!("{report}");
    Ok(ExitCode::SUCCESS)
}

/// Mean of each head's `[n, n]` attention matrix over the selected samples,
/// one file per layer and head.
pub fn export_attention(args: &ExportArgs) -> Result<ExitCode> {
    let (model, dataset) = load_pair(&args.checkpoint, &args.data)?;
    if !matches!(model, Model::Dcap(_)) {
        bail!("{} model has no attention to export", model.kind());
    }
    let mut samples = data::select_part(&dataset, args.part, args.split_seed)?;
    samples.truncate(args.samples);
    ensure!(!samples.is_empty(), "no samples selected");

    let n = dataset.field_count();
    let cfg = model.config();
    let mut sums = vec![vec![vec![0.0; n * n]; cfg.heads]; cfg.layers];
    for block in samples.chunks(512) {
        let refs: Vec<&EncodedSample> = block.iter().collect();
        let mut tape = Tape::new();
        let vars = bind_constants(model.params(), &mut tape);
        let fwd = model.forward(&mut tape, &vars, &refs, &mut Mode::Eval)?;
        for (l, trace) in fwd.traces.iter().enumerate() {
            for (h, &w) in trace.attention.iter().enumerate() {
                // [batch, n, n]
                for chunk in tape.value(w).data().chunks(n * n) {
                    for (acc, v) in sums[l][h].iter_mut().zip(chunk) {
                        *acc += v;
                    }
                }
            }
        }
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let names = dataset.field_names();
    let count = samples.len() as f64;
    for (l, heads) in sums.iter().enumerate() {
        // Deeper layers attend over pooled pair rows, not raw fields.
        let labels: Vec<String> = if l == 0 {
            names.clone()
        } else {
            (0..n).map(|i| format!("pooled{i}")).collect()
        };
        for (h, sum) in heads.iter().enumerate() {
            let mut text = format!("query\\key\t{}\n", labels.join("\t"));
            for (i, row) in sum.chunks(n).enumerate() {
                text.push_str(&labels[i]);
                for v in row {
                    write!(text, "\t{:.6}", v / count)?;
                }
                text.push('\n');
            }
            let path = args.out.join(format!("attention_l{}_h{}.tsv", l + 1, h + 1));
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    println!(
        "wrote {} attention matrices averaged over {} samples to {}",
        cfg.layers * cfg.heads,
        samples.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
