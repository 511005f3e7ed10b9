use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use dcap::featurestore::{
    load_delimited, load_movielens, read_dataset, split_dataset, write_dataset, Dataset, DelimitedSchema,
    EncodedSample, MOVIELENS_FIELDS,
};

use crate::{Format, Part, PrepareArgs};

/// `instances=N fields=F dimension=D positive_rate=P`.
pub fn stats_line(ds: &Dataset) -> String {
    format!(
        "instances={} fields={} dimension={} positive_rate={:.4}",
        ds.samples.len(),
        ds.field_count(),
        ds.feature_dimension(),
        ds.positive_rate()
    )
}

fn default_input(format: Format) -> Result<PathBuf> {
    let root = std::env::var_os("DCAP_DATA_DIR").context("--input not given and DCAP_DATA_DIR is not set")?;
    let root = PathBuf::from(root);
    Ok(match format {
        Format::Movielens => root.join("ml-1m"),
        Format::Criteo => root.join("criteo").join("train.txt"),
        Format::Avazu => root.join("avazu").join("train"),
        Format::Delimited => bail!("--format delimited needs --input"),
    })
}

pub fn prepare(args: &PrepareArgs) -> Result<ExitCode> {
    let input = match &args.input {
        Some(p) => p.clone(),
        None => default_input(args.format)?,
    };
    let dataset = match args.format {
        Format::Movielens => {
            let data = load_movielens(&input.join("ratings.dat"), &input.join("users.dat"), &input.join("movies.dat"))?;
            if data.skipped > 0 {
                log::warn!("{} malformed rating lines skipped", data.skipped);
            }
            match args.limit {
                Some(n) if n < data.dataset.samples.len() => {
                    Dataset::new(data.dataset.fields, data.dataset.samples.into_iter().take(n).collect())?
                }
                _ => data.dataset,
            }
        }
        Format::Criteo => load_delimited(&input, &DelimitedSchema::criteo(), args.limit)?,
        Format::Avazu => load_delimited(&input, &DelimitedSchema::avazu(), args.limit)?,
        Format::Delimited => {
            let schema = args.schema.as_ref().context("--format delimited needs --schema")?;
            load_delimited(&input, &DelimitedSchema::load(schema)?, args.limit)?
        }
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_dataset(&args.out, &dataset)?;
    let stats = stats_line(&dataset);
    let stats_path = args.out.with_extension("stats");
    fs::write(&stats_path, format!("{stats}\n")).with_context(|| format!("writing {}", stats_path.display()))?;
    println!("{stats}");
    Ok(ExitCode::SUCCESS)
}

pub fn load(path: &Path) -> Result<Dataset> {
    read_dataset(path).with_context(|| format!("loading prepared dataset {}", path.display()))
}

/// The MovieLens protocol uses heavier dropout than the click logs.
pub fn is_movielens(ds: &Dataset) -> bool {
    ds.field_names() == MOVIELENS_FIELDS
}

pub fn select_part(ds: &Dataset, part: Part, split_seed: u64) -> Result<Vec<EncodedSample>> {
    if part == Part::All {
        return Ok(ds.samples.clone());
    }
    let split = split_dataset(&ds.samples, split_seed)?;
    Ok(match part {
        Part::Train => split.train,
        Part::Validation => split.validation,
        Part::Test => split.test,
        Part::All => unreachable!(),
    })
}
