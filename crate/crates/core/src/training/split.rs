use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::derive_seed;
use crate::volume::{ClassLabel, NUM_CLASSES};

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];
/// Two-way train/test split in the 315-70 proportion (no validation part).
pub const TWO_WAY_RATIOS: [f64; 3] = [315.0 / 385.0, 0.0, 70.0 / 385.0];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split. Within each class the indices are shuffled by a seed
/// derived from `(seed, class)`, then `floor(n_c * r_train)` go to train,
/// `floor(n_c * r_val)` to validation and the remainder to test.
pub fn split_dataset(labels: &[ClassLabel], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if labels.len() < 10 {
        return Err(Error::param(format!(
            "need at least 10 samples to split, got {}",
            labels.len()
        )));
    }
    if ratios.iter().any(|&r| !(0.0..=1.0).contains(&r)) || ratios[0] + ratios[1] > 1.0 + 1e-12 {
        return Err(Error::param(format!("invalid split ratios {ratios:?}")));
    }
    let mut by_class = vec![Vec::new(); NUM_CLASSES];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    let mut split = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (c, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 3 {
            return Err(Error::param(format!(
                "class {} has only {} samples",
                ClassLabel::ALL[c],
                idx.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        // Guard against ratios like 315/385 landing a hair below an integer.
        let n_train = (n * ratios[0] + 1e-9).floor() as usize;
        let n_val = (n * ratios[1] + 1e-9).floor() as usize;
        split.train.extend_from_slice(&idx[..n_train]);
        split
            .validation
            .extend_from_slice(&idx[n_train..n_train + n_val]);
        split.test.extend_from_slice(&idx[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
