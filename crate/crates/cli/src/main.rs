mod config;
mod data;
mod evaluate;
mod train;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Layer;

#[derive(Debug, Parser)]
#[command(name = "dcap", version, about = "Deep cross attentional product network for CTR prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a raw dataset into a prepared cache and print its statistics
    Prepare(PrepareArgs),
    /// Train DCAP or a baseline, optionally over a layers x heads grid
    Train(TrainArgs),
    /// Score a checkpoint on one part of a prepared dataset
    Evaluate(EvaluateArgs),
    /// Write per-layer, per-head mean attention matrices as TSV
    ExportAttention(ExportArgs),
    /// Run the verification suite (gradients, homogeneity, reference layer)
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// ratings.dat, users.dat and movies.dat in one directory
    Movielens,
    /// tab-separated Criteo display-advertising log
    Criteo,
    /// Avazu csv with header
    Avazu,
    /// any delimited file described by --schema
    Delimited,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long, value_enum, default_value = "movielens")]
    pub format: Format,

    /// Input directory (movielens) or file; defaults to $DCAP_DATA_DIR/ml-1m for movielens
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Column schema file for --format delimited
    #[arg(long)]
    pub schema: Option<PathBuf>,

    /// Keep at most this many instances (MovieLens keeps the vocabulary of
    /// the full files; delimited formats build it from the rows read)
    #[arg(long)]
    pub limit: Option<usize>,

    /// Cache file to write; a `.stats` summary is written next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// key=value file; flags take precedence over it
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Prepared dataset cache [default: $DCAP_DATA_DIR/dataset.dcapds]
    #[arg(long)]
    pub data: Option<String>,

    /// dcap, lr or fm [default: dcap]
    #[arg(long)]
    pub model: Option<String>,

    /// [default: 16]
    #[arg(long)]
    pub embedding_dim: Option<String>,

    /// Cross depth: one value, a list "1,2" or a range "1..5" [default: 2]
    #[arg(long)]
    pub layers: Option<String>,

    /// Attention heads: one value or a list "1,2,4,8,16" [default: 4]
    #[arg(long)]
    pub heads: Option<String>,

    /// inner or outer [default: inner]
    #[arg(long)]
    pub product: Option<String>,

    /// Add the layer input to the attention output [default: false]
    #[arg(long)]
    pub residual: Option<String>,

    /// Hidden widths of the prediction head [default: 100,100]
    #[arg(long)]
    pub hidden: Option<String>,

    /// [default: 0.5 for MovieLens fields, 0.2 otherwise]
    #[arg(long)]
    pub dropout: Option<String>,

    /// [default: 0.001]
    #[arg(long)]
    pub lr: Option<String>,

    /// [default: 1e-6]
    #[arg(long)]
    pub weight_decay: Option<String>,

    /// coupled or decoupled [default: coupled]
    #[arg(long)]
    pub decay: Option<String>,

    /// [default: 4096]
    #[arg(long)]
    pub batch_size: Option<String>,

    /// Epochs without validation-AUC improvement before stopping [default: 3]
    #[arg(long)]
    pub patience: Option<String>,

    /// [default: 50]
    #[arg(long)]
    pub max_epochs: Option<String>,

    /// Independent trials per grid point, seeds seed..seed+trials [default: 1]
    #[arg(long)]
    pub trials: Option<String>,

    /// [default: 0]
    #[arg(long)]
    pub seed: Option<String>,

    /// Seed of the 80/10/10 split [default: 0]
    #[arg(long)]
    pub split_seed: Option<String>,

    /// Output directory [default: runs]
    #[arg(long)]
    pub out: Option<String>,
}

impl TrainArgs {
    fn flag_layer(&self) -> Layer {
        let pairs = [
            ("data", &self.data),
            ("model", &self.model),
            ("embedding_dim", &self.embedding_dim),
            ("layers", &self.layers),
            ("heads", &self.heads),
            ("product", &self.product),
            ("residual", &self.residual),
            ("hidden", &self.hidden),
            ("dropout", &self.dropout),
            ("lr", &self.lr),
            ("weight_decay", &self.weight_decay),
            ("decay", &self.decay),
            ("batch_size", &self.batch_size),
            ("patience", &self.patience),
            ("max_epochs", &self.max_epochs),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("split_seed", &self.split_seed),
            ("out", &self.out),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Part {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Prepared dataset cache
    #[arg(long, env = "DCAP_DATASET")]
    pub data: PathBuf,

    #[arg(long, value_enum, default_value = "test")]
    pub part: Part,

    /// Must match the seed used for training
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,

    #[arg(long, default_value_t = 4096)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    #[arg(long, env = "DCAP_DATASET")]
    pub data: PathBuf,

    #[arg(long, value_enum, default_value = "test")]
    pub part: Part,

    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,

    /// Average over at most this many samples of the part
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,

    /// Directory for attention_l{layer}_h{head}.tsv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Random instances per product kind for the reference-layer check
    #[arg(long, default_value_t = 100)]
    pub reference_instances: usize,

    /// Also write checks.tsv and homogeneity.tsv here
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Corrupt a backward rule to confirm the gradient check notices
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(a) => data::prepare(&a),
        Command::Train(a) => train::run(&a.config, &a.flag_layer()),
        Command::Evaluate(a) => evaluate::evaluate(&a),
        Command::ExportAttention(a) => evaluate::export_attention(&a),
        Command::Verify(a) => verify::run(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
