//! Run configuration: built-in defaults, overridden by a `key=value` file,
//! overridden by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dcap::crossnet::ProductKind;
use dcap::featurestore::DEFAULT_BATCH_SIZE;
use dcap::model::{ModelKind, DEFAULT_HIDDEN, DEFAULT_LAYERS, DEFAULT_WEIGHT_DECAY};
use dcap::trainer::{DecayMode, DEFAULT_LEARNING_RATE, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE};
use sha2::{Digest, Sha256};

/// Every recognised key, in canonical order.
pub const KEYS: [&str; 19] = [
    "data",
    "model",
    "embedding_dim",
    "layers",
    "heads",
    "product",
    "residual",
    "hidden",
    "dropout",
    "lr",
    "weight_decay",
    "decay",
    "batch_size",
    "patience",
    "max_epochs",
    "trials",
    "seed",
    "split_seed",
    "out",
];

/// Raw `key -> value` strings from one source.
pub type Layer = BTreeMap<String, String>;

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses a flat `key = value` file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Layer> {
    let mut layer = Layer::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got {raw:?}", i + 1);
        };
        let key = normalize(k);
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key {key:?}", i + 1);
        }
        layer.insert(key, v.trim().to_string());
    }
    Ok(layer)
}

pub fn read_config_file(path: &Path) -> Result<Layer> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config_text(&text).with_context(|| format!("in config {}", path.display()))
}

/// `"3"`, `"1,2,4"` or the inclusive range `"1..5"`.
pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    let values: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty range {s:?}");
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|v| v.trim().parse::<usize>()).collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.contains(&0) {
        bail!("list {s:?} must hold positive integers");
    }
    Ok(values)
}

/// Fully resolved configuration of a `train` invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub model: ModelKind,
    pub embedding_dim: usize,
    /// Sweep axis.
    pub layers: Vec<usize>,
    /// Sweep axis.
    pub heads: Vec<usize>,
    pub product: ProductKind,
    pub residual: bool,
    pub hidden: Vec<usize>,
    /// `None` picks the per-dataset default at run time.
    pub dropout: Option<f64>,
    pub lr: f64,
    pub weight_decay: f64,
    pub decay: DecayMode,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub trials: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub out: PathBuf,
}

impl RunConfig {
    /// Defaults, then `file`, then `flags`.
    pub fn resolve(file: &Layer, flags: &Layer) -> Result<Self> {
        let mut merged = file.clone();
        merged.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));
        for k in merged.keys() {
            if !KEYS.contains(&k.as_str()) {
                bail!("unknown configuration key {k:?}");
            }
        }
        let get = |k: &str| merged.get(k).map(String::as_str);
        fn parse<T: std::str::FromStr>(key: &str, v: Option<&str>, default: T) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            match v {
                None => Ok(default),
                Some(s) => s.parse().map_err(|e| anyhow::anyhow!("{key}={s:?}: {e}")),
            }
        }
        let list = |k: &str, default: Vec<usize>| -> Result<Vec<usize>> {
            get(k).map_or(Ok(default), |s| parse_list(s).with_context(|| format!("{k}={s:?}")))
        };
        let data = match get("data") {
            Some(p) => Some(PathBuf::from(p)),
            None => std::env::var_os("DCAP_DATA_DIR").map(|d| Path::new(&d).join("dataset.dcapds")),
        };
        Ok(RunConfig {
            data,
            model: parse("model", get("model"), ModelKind::Dcap)?,
            embedding_dim: parse("embedding_dim", get("embedding_dim"), dcap::embedding::DEFAULT_EMBEDDING_DIM)?,
            layers: list("layers", vec![DEFAULT_LAYERS])?,
            heads: list("heads", vec![dcap::attention::DEFAULT_HEADS])?,
            product: parse("product", get("product"), ProductKind::Inner)?,
            residual: parse("residual", get("residual"), false)?,
            hidden: list("hidden", DEFAULT_HIDDEN.to_vec())?,
            dropout: get("dropout").map(|s| parse("dropout", Some(s), 0.0)).transpose()?,
            lr: parse("lr", get("lr"), DEFAULT_LEARNING_RATE)?,
            weight_decay: parse("weight_decay", get("weight_decay"), DEFAULT_WEIGHT_DECAY)?,
            decay: match get("decay") {
                None | Some("coupled") => DecayMode::Coupled,
                Some("decoupled") => DecayMode::Decoupled,
                Some(other) => bail!("decay={other:?}: expected coupled or decoupled"),
            },
            batch_size: parse("batch_size", get("batch_size"), DEFAULT_BATCH_SIZE)?,
            patience: parse("patience", get("patience"), DEFAULT_PATIENCE)?,
            max_epochs: parse("max_epochs", get("max_epochs"), DEFAULT_MAX_EPOCHS)?,
            trials: parse("trials", get("trials"), 1)?,
            seed: parse("seed", get("seed"), 0)?,
            split_seed: parse("split_seed", get("split_seed"), 0)?,
            out: PathBuf::from(get("out").unwrap_or("runs")),
        })
    }

    /// Canonical `key -> value` rendering, one entry per key.
    pub fn to_layer(&self) -> Layer {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let entries = [
            ("data", self.data.as_ref().map_or(String::new(), |p| p.display().to_string())),
            ("model", self.model.to_string()),
            ("embedding_dim", self.embedding_dim.to_string()),
            ("layers", join(&self.layers)),
            ("heads", join(&self.heads)),
            ("product", self.product.as_str().to_string()),
            ("residual", self.residual.to_string()),
            ("hidden", join(&self.hidden)),
            ("dropout", self.dropout.map_or("auto".into(), |d| d.to_string())),
            ("lr", self.lr.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            (
                "decay",
                match self.decay {
                    DecayMode::Coupled => "coupled",
                    DecayMode::Decoupled => "decoupled",
                }
                .to_string(),
            ),
            ("batch_size", self.batch_size.to_string()),
            ("patience", self.patience.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("out", self.out.display().to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// SHA-256 over the canonical rendering, output directory excluded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.to_layer() {
            if k != "out" {
                h.update(format!("{k}={v}\n"));
            }
        }
        format!("{:x}", h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(pairs: &[(&str, &str)]) -> Layer {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    /// (key, file value, flag value, canonical default)
    const CASES: [(&str, &str, &str, &str); 18] = [
        ("model", "fm", "lr", "dcap"),
        ("embedding_dim", "8", "32", "16"),
        ("layers", "3", "1..3", "2"),
        ("heads", "2", "1,2,4", "4"),
        ("product", "outer", "inner", "inner"),
        ("residual", "true", "false", "false"),
        ("hidden", "50", "20,10", "100,100"),
        ("dropout", "0.3", "0.1", "auto"),
        ("lr", "0.01", "0.05", "0.001"),
        ("weight_decay", "0.0001", "0", "0.000001"),
        ("decay", "decoupled", "coupled", "coupled"),
        ("batch_size", "128", "256", "4096"),
        ("patience", "5", "2", "3"),
        ("max_epochs", "10", "20", "50"),
        ("trials", "20", "5", "1"),
        ("seed", "7", "9", "0"),
        ("split_seed", "3", "4", "0"),
        ("out", "a", "b", "runs"),
    ];

    fn canonical(key: &str, value: &str) -> String {
        let c = RunConfig::resolve(&layer(&[(key, value)]), &Layer::new()).unwrap();
        c.to_layer()[key].clone()
    }

    #[test]
    fn flags_override_file_override_defaults_for_every_field() {
        let defaults = RunConfig::resolve(&Layer::new(), &Layer::new()).unwrap().to_layer();
        for (key, file, flag, default) in CASES {
            assert_eq!(defaults[key], default, "{key} default");
            let only_file = RunConfig::resolve(&layer(&[(key, file)]), &Layer::new()).unwrap().to_layer();
            assert_eq!(only_file[key], canonical(key, file), "{key} from file");
            assert_ne!(only_file[key], defaults[key], "{key} file value must differ from default");
            let both = RunConfig::resolve(&layer(&[(key, file)]), &layer(&[(key, flag)])).unwrap().to_layer();
            assert_eq!(both[key], canonical(key, flag), "{key} from flag");
            assert_ne!(both[key], only_file[key], "{key} flag value must differ from file");
        }
        // `data` has no built-in default beyond DCAP_DATA_DIR
        let d = RunConfig::resolve(&layer(&[("data", "f.bin")]), &layer(&[("data", "g.bin")])).unwrap();
        assert_eq!(d.data, Some(PathBuf::from("g.bin")));
        let every_key: Vec<&str> = CASES.iter().map(|c| c.0).chain(["data"]).collect();
        assert!(KEYS.iter().all(|k| every_key.contains(k)));
    }

    #[test]
    fn config_file_syntax() {
        let l = parse_config_text("# grid\nlayers = 1..5\nheads=1,2,4,8,16  # sweep\n\nbatch-size=64\n").unwrap();
        assert_eq!(l["layers"], "1..5");
        assert_eq!(l["heads"], "1,2,4,8,16");
        assert_eq!(l["batch_size"], "64");
        assert!(parse_config_text("nonsense").is_err());
        assert!(parse_config_text("colour=blue").is_err());
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_list("1,2,4,8,16").unwrap(), vec![1, 2, 4, 8, 16]);
        assert_eq!(parse_list("2").unwrap(), vec![2]);
        assert!(parse_list("3..1").is_err());
        assert!(parse_list("0,1").is_err());
        assert!(parse_list("x").is_err());
    }

    #[test]
    fn invalid_values_name_the_key() {
        let err = RunConfig::resolve(&layer(&[("lr", "fast")]), &Layer::new()).unwrap_err();
        assert!(err.to_string().contains("lr"));
        assert!(RunConfig::resolve(&layer(&[("decay", "sometimes")]), &Layer::new()).is_err());
    }

    #[test]
    fn hash_ignores_output_directory_only() {
        let a = RunConfig::resolve(&layer(&[("out", "x")]), &Layer::new()).unwrap();
        let b = RunConfig::resolve(&layer(&[("out", "y")]), &Layer::new()).unwrap();
        let c = RunConfig::resolve(&layer(&[("seed", "1")]), &Layer::new()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
