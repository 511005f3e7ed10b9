use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Token that infrequent and missing values collapse to.
pub const UNKNOWN_TOKEN: &str = "<unknown>";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Categorical,
    Numerical,
}

/// Vocabulary of one field. Known tokens occupy `0..tokens.len()` in
/// lexicographic order; the unknown slot is the last index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSchema {
    name: String,
    kind: FieldKind,
    tokens: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl FieldSchema {
    /// Rebuilds a schema from its tokens in index order.
    pub fn from_tokens(name: impl Into<String>, kind: FieldKind, tokens: Vec<String>) -> Result<Self> {
        let name = name.into();
        let mut lookup = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if lookup.insert(t.clone(), i).is_some() {
                return Err(Error::Contract(format!(
                    "duplicate token {t:?} in field {name}"
                )));
            }
        }
        Ok(FieldSchema {
            name,
            kind,
            tokens,
            lookup,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Known tokens in index order (the unknown slot is not included).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unknown_index(&self) -> usize {
        self.tokens.len()
    }

    /// Number of indices including the unknown slot.
    pub fn size(&self) -> usize {
        self.tokens.len() + 1
    }

    /// Index of `token`; missing or unseen tokens map to the unknown slot.
    pub fn encode(&self, token: Option<&str>) -> usize {
        token
            .and_then(|t| self.lookup.get(t).copied())
            .unwrap_or(self.unknown_index())
    }

    /// Token at `index`, or `None` for the unknown slot and out-of-range ids.
    pub fn decode(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }
}

/// Counts `tokens` and keeps those seen at least `min_frequency` times.
pub fn build_vocabulary<'a, I>(
    tokens: I,
    name: &str,
    kind: FieldKind,
    min_frequency: usize,
) -> Result<FieldSchema>
where
    I: IntoIterator<Item = &'a str>,
{
    if min_frequency == 0 {
        return Err(Error::Config("min_frequency must be at least 1".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut seen = 0usize;
    for t in tokens {
        *counts.entry(t).or_default() += 1;
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::EmptyDataset(format!("no values for field {name}")));
    }
    let kept = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_frequency)
        .map(|(t, _)| t.to_string())
        .collect();
    FieldSchema::from_tokens(name, kind, kept)
}

/// One encoded record: a per-field index for each of the `n` fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSample {
    pub feature_ids: Vec<usize>,
    pub label: u8,
}

impl EncodedSample {
    pub fn new(feature_ids: Vec<usize>, label: u8) -> Self {
        EncodedSample { feature_ids, label }
    }
}

/// Encoded samples together with the schemas that produced them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub fields: Vec<FieldSchema>,
    pub samples: Vec<EncodedSample>,
}

impl Dataset {
    /// Checks every sample against the field schemas.
    pub fn new(fields: Vec<FieldSchema>, samples: Vec<EncodedSample>) -> Result<Self> {
        for s in &samples {
            validate_sample(&fields, s)?;
        }
        Ok(Dataset { fields, samples })
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    pub fn field_names(&self) -> Vec<String> {
        self.fields.iter().map(|f| f.name().to_string()).collect()
    }

    /// Per-field vocabulary sizes, unknown slots included.
    pub fn vocab_sizes(&self) -> Vec<usize> {
        self.fields.iter().map(FieldSchema::size).collect()
    }

    /// Total number of feature indices across fields.
    pub fn feature_dimension(&self) -> usize {
        self.vocab_sizes().iter().sum()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let pos = self.samples.iter().filter(|s| s.label == 1).count();
        pos as f64 / self.samples.len() as f64
    }
}

pub(crate) fn validate_sample(fields: &[FieldSchema], s: &EncodedSample) -> Result<()> {
    if s.feature_ids.len() != fields.len() {
        return Err(Error::Contract(format!(
            "sample has {} ids for {} fields",
            s.feature_ids.len(),
            fields.len()
        )));
    }
    if s.label > 1 {
        return Err(Error::Contract(format!("label {} is not binary", s.label)));
    }
    for (f, &id) in fields.iter().zip(&s.feature_ids) {
        if id >= f.size() {
            return Err(Error::Index {
                field: f.name().to_string(),
                id,
                size: f.size(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infrequent_tokens_collapse_to_unknown() {
        let mut toks = vec!["a"; 5];
        toks.push("b");
        let f = build_vocabulary(toks, "f", FieldKind::Categorical, 2).unwrap();
        assert_eq!(f.tokens(), &["a".to_string()]);
        assert_eq!(f.unknown_index(), 1);
        assert_eq!(f.encode(Some("a")), 0);
        assert_eq!(f.encode(Some("b")), 1);
        assert_eq!(f.encode(None), 1);
        assert_eq!(f.decode(1), None);
    }

    #[test]
    fn threshold_one_keeps_everything_sorted() {
        let f = build_vocabulary(["z", "b", "m", "b"], "f", FieldKind::Categorical, 1).unwrap();
        assert_eq!(f.tokens(), &["b", "m", "z"]);
        assert_eq!(f.size(), 4);
    }

    #[test]
    fn empty_stream_errors() {
        let r = build_vocabulary(std::iter::empty(), "f", FieldKind::Categorical, 1);
        assert!(matches!(r, Err(Error::EmptyDataset(_))));
        assert!(build_vocabulary(["a"], "f", FieldKind::Categorical, 0).is_err());
    }

    #[test]
    fn dataset_rejects_out_of_range_ids() {
        let f = build_vocabulary(["a"], "g", FieldKind::Categorical, 1).unwrap();
        let bad = EncodedSample::new(vec![2], 1);
        assert!(matches!(
            Dataset::new(vec![f], vec![bad]),
            Err(Error::Index { .. })
        ));
    }
}
