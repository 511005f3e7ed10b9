use std::fmt;
use std::str::FromStr;

use crate::attention::{head_dim, DEFAULT_HEADS};
use crate::crossnet::{pair_count, ProductKind};
use crate::embedding::DEFAULT_EMBEDDING_DIM;
use crate::error::{Error, Result};

/// Which predictor to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Dcap,
    /// Logistic regression baseline.
    Lr,
    /// Factorization machine baseline.
    Fm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dcap => "dcap",
            ModelKind::Lr => "lr",
            ModelKind::Fm => "fm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dcap" => Ok(ModelKind::Dcap),
            "lr" => Ok(ModelKind::Lr),
            "fm" => Ok(ModelKind::Fm),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Default hidden widths of the dense head.
pub const DEFAULT_HIDDEN: [usize; 2] = [100, 100];
/// Default cross depth.
pub const DEFAULT_LAYERS: usize = 2;
/// Dropout used for MovieLens-1M.
pub const MOVIELENS_DROPOUT: f64 = 0.5;
/// Dropout used for Criteo and Avazu.
pub const CLICK_LOG_DROPOUT: f64 = 0.2;

/// Architecture of a model. The field count is `vocab_sizes.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Per-field vocabulary sizes, unknown slots included.
    pub vocab_sizes: Vec<usize>,
    pub embedding_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub product: ProductKind,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// Residual connection around attention (not in the published layer).
    pub residual: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, vocab_sizes: Vec<usize>) -> Self {
        ModelConfig {
            kind,
            vocab_sizes,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            layers: DEFAULT_LAYERS,
            heads: DEFAULT_HEADS,
            product: ProductKind::Inner,
            hidden: DEFAULT_HIDDEN.to_vec(),
            dropout: MOVIELENS_DROPOUT,
            residual: false,
            seed: 0,
        }
    }

    pub fn fields(&self) -> usize {
        self.vocab_sizes.len()
    }

    /// Width of the dense head input: `n*d + L*n(n-1)/2`.
    pub fn dense_input_width(&self) -> usize {
        self.fields() * self.embedding_dim + self.layers * pair_count(self.fields())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.vocab_sizes.is_empty() || self.vocab_sizes.contains(&0) {
            return bad(format!("invalid vocabulary sizes {:?}", self.vocab_sizes));
        }
        if self.embedding_dim == 0 {
            return bad("embedding dimension must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.kind == ModelKind::Dcap {
            // n(n-1)/2 pair rows must pool back down to n rows
            if self.fields() < 3 {
                return bad("DCAP needs at least three fields".into());
            }
            if self.layers == 0 {
                return bad("at least one cross layer is required".into());
            }
            head_dim(self.embedding_dim, self.heads)?;
            if self.hidden.is_empty() || self.hidden.contains(&0) {
                return bad(format!("invalid hidden sizes {:?}", self.hidden));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_width_for_movielens_defaults() {
        let c = ModelConfig::new(ModelKind::Dcap, vec![10; 5]);
        assert_eq!(c.dense_input_width(), 100);
        assert_eq!(c.embedding_dim, 16);
        assert_eq!(c.layers, 2);
        assert_eq!(c.hidden, vec![100, 100]);
        assert_eq!(c.dropout, 0.5);
        assert_eq!(CLICK_LOG_DROPOUT, 0.2);
    }

    #[test]
    fn validation() {
        let mut c = ModelConfig::new(ModelKind::Dcap, vec![3; 4]);
        assert!(c.validate().is_ok());
        c.heads = 3;
        assert!(c.validate().is_err());
        c.heads = 2;
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        c.dropout = 0.0;
        c.layers = 0;
        assert!(c.validate().is_err());
        c.layers = 1;
        c.hidden = vec![];
        assert!(c.validate().is_err());
        let lr = ModelConfig::new(ModelKind::Lr, vec![3]);
        assert!(lr.validate().is_ok());
    }

    #[test]
    fn kind_round_trip() {
        for k in [ModelKind::Dcap, ModelKind::Lr, ModelKind::Fm] {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
    }
}
