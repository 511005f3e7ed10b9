#![allow(dead_code)]

use dcap::featurestore::{build_vocabulary, split_dataset, Dataset, DatasetSplit, EncodedSample, FieldKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `samples` rows over `fields` fields with `vocab` values each. The label
/// is a noisy XOR of whether fields 0 and 1 take an even value, so it is
/// only predictable from their interaction.
pub fn planted_interaction(samples: usize, fields: usize, vocab: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens: Vec<String> = (0..vocab).map(|v| format!("v{v}")).collect();
    let schema = (0..fields)
        .map(|f| build_vocabulary(tokens.iter().map(String::as_str), &format!("f{f}"), FieldKind::Categorical, 1).unwrap())
        .collect::<Vec<_>>();
    let rows = (0..samples)
        .map(|_| {
            let ids: Vec<usize> = (0..fields).map(|_| rng.gen_range(0..vocab)).collect();
            let clean = (ids[0] % 2 == 0) ^ (ids[1] % 2 == 0);
            let flip = rng.gen::<f64>() < noise;
            EncodedSample::new(ids, u8::from(clean ^ flip))
        })
        .collect();
    Dataset::new(schema, rows).unwrap()
}

pub fn planted_split(samples: usize, seed: u64) -> (Dataset, DatasetSplit) {
    let ds = planted_interaction(samples, 4, 6, 0.05, seed);
    let split = split_dataset(&ds.samples, seed).unwrap();
    (ds, split)
}

/// Fraction of correctly ordered positive/negative pairs, ties counted one
/// half, as an exact ratio `2 * wins / (2 * P * N)`.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice_wins: u64 = 0;
    let (mut p, mut n) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            p += 1;
        } else {
            n += 1;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                if scores[i] > scores[j] {
                    twice_wins += 2;
                } else if scores[i] == scores[j] {
                    twice_wins += 1;
                }
            }
        }
    }
    twice_wins as f64 / (2 * p * n) as f64
}
