//! Deterministic shuffled k-fold partitions at the sample level. Windows of
//! one sample never cross the train/test boundary.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    /// `assignments[sample_index] = fold id`.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldSplit {
    pub fn fold_of(&self, sample: usize) -> usize {
        self.assignments[sample]
    }

    /// Sample indices for (train, test) of one fold.
    pub fn train_test(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Shuffle then deal round-robin: fold sizes differ by at most one.
pub fn kfold_split(n_samples: usize, k: usize, seed: u64) -> Result<FoldSplit, HarnessError> {
    if k < 2 || n_samples < k {
        return Err(HarnessError::TooFewSamples { n: n_samples, k });
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0usize; n_samples];
    for (pos, &sample) in order.iter().enumerate() {
        assignments[sample] = pos % k;
    }
    Ok(FoldSplit {
        k,
        assignments,
        seed,
    })
}
