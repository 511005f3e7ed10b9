//! Raw records to encoded samples: vocabularies with frequency thresholds,
//! numeric bucketing, rating binarization, seeded splits and mini-batches.

mod cache;
mod delimited;
mod movielens;
mod schema;
mod split;
mod transform;

pub(crate) use cache::{put_str, put_u32, Reader};
pub use cache::{decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_MAGIC};
pub use delimited::{load_delimited, ColumnRole, ColumnSpec, DelimitedSchema};
pub use movielens::{load_movielens, MovieLensData, MOVIELENS_FIELDS, MOVIELENS_REFERENCE_DIMENSION};
pub use schema::{build_vocabulary, Dataset, EncodedSample, FieldKind, FieldSchema, UNKNOWN_TOKEN};
pub use split::{
    minibatches, shuffled_indices, split_dataset, split_sizes, DatasetSplit, DEFAULT_BATCH_SIZE,
    MIN_SPLIT_SAMPLES,
};
pub use transform::{binarize_rating, numeric_token, transform_numeric};
