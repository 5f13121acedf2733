use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Train and validation row indices for one split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Partitions `0..n_samples` into `n_val_splits` disjoint validation folds whose
/// sizes differ by at most one.
pub fn split_folds(n_samples: usize, n_val_splits: usize, seed: u64) -> Result<Vec<Fold>> {
    if n_val_splits < 2 {
        return Err(Error::Config("n_val_splits must be at least 2".into()));
    }
    if n_val_splits > n_samples {
        return Err(Error::Config(format!(
            "n_val_splits ({n_val_splits}) exceeds the number of samples ({n_samples})"
        )));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n_samples / n_val_splits;
    let extra = n_samples % n_val_splits;
    let mut start = 0;
    let mut folds = Vec::with_capacity(n_val_splits);
    for f in 0..n_val_splits {
        let len = base + usize::from(f < extra);
        let mut validation = order[start..start + len].to_vec();
        validation.sort_unstable();
        let mut train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + len..])
            .copied()
            .collect();
        train.sort_unstable();
        folds.push(Fold { train, validation });
        start += len;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn partition_of_ten_into_five() {
        let folds = split_folds(10, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all = BTreeSet::new();
        for f in &folds {
            assert_eq!(f.validation.len(), 2);
            assert_eq!(f.train.len(), 8);
            for &v in &f.validation {
                assert!(all.insert(v), "folds overlap at {v}");
                assert!(!f.train.contains(&v));
            }
        }
        assert_eq!(all, (0..10).collect());
    }

    #[test]
    fn deterministic() {
        assert_eq!(split_folds(37, 4, 3).unwrap(), split_folds(37, 4, 3).unwrap());
        assert_ne!(split_folds(37, 4, 3).unwrap(), split_folds(37, 4, 4).unwrap());
    }

    #[test]
    fn leave_one_out() {
        let folds = split_folds(5, 5, 0).unwrap();
        assert!(folds.iter().all(|f| f.validation.len() == 1));
    }

    #[test]
    fn invalid_counts() {
        assert!(split_folds(3, 5, 0).is_err());
        assert!(split_folds(10, 1, 0).is_err());
    }
}
