use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::featurestore::EncodedSample;

/// Smallest dataset [`split_dataset`] accepts.
pub const MIN_SPLIT_SAMPLES: usize = 10;

/// Default mini-batch size.
pub const DEFAULT_BATCH_SIZE: usize = 4096;

/// Disjoint train/validation/test partition of a dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<EncodedSample>,
    pub validation: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
    pub seed: u64,
}

/// Sizes of the 80/10/10 partition: floor(0.8 N) for training, half of the
/// rest (floored) for validation, the remainder for test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 8 / 10;
    let validation = (n - train) / 2;
    (train, validation, n - train - validation)
}

/// Seeded shuffle of sample positions.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

pub fn split_dataset(samples: &[EncodedSample], seed: u64) -> Result<DatasetSplit> {
    if samples.len() < MIN_SPLIT_SAMPLES {
        return Err(Error::EmptyDataset(format!(
            "{} samples; a split needs at least {MIN_SPLIT_SAMPLES}",
            samples.len()
        )));
    }
    let (train, validation, _) = split_sizes(samples.len());
    let order = shuffled_indices(samples.len(), seed);
    let pick = |range: &[usize]| range.iter().map(|&i| samples[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(&order[..train]),
        validation: pick(&order[train..train + validation]),
        test: pick(&order[train + validation..]),
        seed,
    })
}

/// Index blocks covering `0..len` once, reshuffled per `(seed, epoch)`.
/// The last block may be short.
pub fn minibatches(len: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng);
    Ok(idx.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize) -> Vec<EncodedSample> {
        (0..n)
            .map(|i| EncodedSample::new(vec![i], (i % 2) as u8))
            .collect()
    }

    #[test]
    fn sizes() {
        assert_eq!(split_sizes(10), (8, 1, 1));
        assert_eq!(split_sizes(1_000_209), (800_167, 100_021, 100_021));
        let s = split_dataset(&samples(10), 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            split_dataset(&samples(9), 0),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn deterministic() {
        let a = split_dataset(&samples(50), 11).unwrap();
        let b = split_dataset(&samples(50), 11).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&samples(50), 12).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn batch_sizes_and_coverage() {
        let b = minibatches(10, 4, 1, 0).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_ne!(minibatches(100, 100, 1, 0).unwrap(), minibatches(100, 100, 1, 1).unwrap());
        assert_eq!(minibatches(100, 7, 5, 3).unwrap(), minibatches(100, 7, 5, 3).unwrap());
        assert!(minibatches(3, 0, 0, 0).is_err());
    }
}
