use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Corpus, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(format!("split ratios must be non-negative: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Split sizes for `n` items: train and validation are rounded to the
/// nearest integer and test takes the remainder.
pub fn split_sizes(n: usize, ratios: SplitRatios) -> (usize, usize, usize) {
    let train = ((ratios.train * n as f64).round() as usize).min(n);
    let validation = ((ratios.validation * n as f64).round() as usize).min(n - train);
    (train, validation, n - train - validation)
}

/// Tag every record with a split by seeded uniform shuffle.
pub fn assign_splits(mut corpus: Corpus, ratios: SplitRatios, seed: u64) -> Result<Corpus> {
    ratios.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("cannot split an empty corpus".into()));
    }
    // shuffle a canonical order so the result does not depend on input order
    corpus.records.sort_by(|a, b| a.song_id.cmp(&b.song_id));
    let n = corpus.len();
    let (n_train, n_val, _) = split_sizes(n, ratios);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng(seed));
    for (rank, &i) in order.iter().enumerate() {
        corpus.records[i].split = Some(if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        });
    }
    Ok(corpus)
}
