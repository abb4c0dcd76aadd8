use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::round_half_up;

pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.1;

/// Stratified k-fold assignment with a stratified validation subset reserved
/// inside every fold's training part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_count: usize,
    pub assignments: Vec<usize>,
    pub validation_fraction: f64,
    /// Sorted validation row ids per fold (all outside that fold's test rows).
    pub validation: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Every row outside the test fold; this is what the classifier trains on.
    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn validation_rows(&self, fold: usize) -> &[usize] {
        &self.validation[fold]
    }

    /// Training part minus the validation subset; generators fit on these rows.
    pub fn generator_rows(&self, fold: usize) -> Vec<usize> {
        let val = &self.validation[fold];
        self.train_rows(fold)
            .into_iter()
            .filter(|i| val.binary_search(i).is_err())
            .collect()
    }
}

/// Stratified fold assignment, deterministic in `seed`. Each class is shuffled
/// and dealt round-robin, so per-fold class counts differ by at most one.
pub fn make_folds(
    labels: &[u8],
    fold_count: usize,
    validation_fraction: f64,
    seed: u64,
) -> Result<FoldSplit> {
    if fold_count < 2 {
        return Err(Error::Config(format!(
            "fold_count must be at least 2, got {fold_count}"
        )));
    }
    if !(0.0..1.0).contains(&validation_fraction) {
        return Err(Error::Config(format!(
            "validation_fraction {validation_fraction} outside [0,1)"
        )));
    }
    let mut rng = seeded(seed);
    let mut assignments = vec![0; labels.len()];
    let mut by_class: Vec<Vec<usize>> = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < fold_count {
            return Err(Error::InsufficientClassRows {
                class,
                have: idx.len(),
                need: fold_count,
            });
        }
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignments[i] = pos % fold_count;
        }
        by_class.push(idx);
    }

    let mut validation = Vec::with_capacity(fold_count);
    for fold in 0..fold_count {
        let mut val = Vec::new();
        for idx in &by_class {
            // shuffled order is reused so the subset is random but reproducible
            let candidates: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| assignments[i] != fold)
                .collect();
            let take = round_half_up(validation_fraction * candidates.len() as f64) as usize;
            // keep at least one training row of each class
            let take = take.min(candidates.len().saturating_sub(1));
            val.extend_from_slice(&candidates[..take]);
        }
        val.sort_unstable();
        validation.push(val);
    }
    Ok(FoldSplit {
        fold_count,
        assignments,
        validation_fraction,
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_percent_minority_over_ten_folds() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 10 == 0)).collect();
        let f = make_folds(&labels, 10, 0.1, 3).unwrap();
        for k in 0..10 {
            let test = f.test_rows(k);
            assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 1);
            assert_eq!(test.len(), 10);
        }
    }

    #[test]
    fn two_folds_on_four_balanced_rows() {
        let f = make_folds(&[0, 1, 0, 1], 2, 0.0, 1).unwrap();
        for k in 0..2 {
            let t = f.test_rows(k);
            assert_eq!(t.len(), 2);
            let labels = [0u8, 1, 0, 1];
            assert_eq!(t.iter().map(|&i| labels[i]).sum::<u8>(), 1);
        }
    }

    #[test]
    fn seeded_assignment_is_deterministic() {
        let labels: Vec<u8> = (0..50).map(|i| u8::from(i % 5 == 0)).collect();
        assert_eq!(
            make_folds(&labels, 5, 0.1, 9).unwrap(),
            make_folds(&labels, 5, 0.1, 9).unwrap()
        );
        assert_ne!(
            make_folds(&labels, 5, 0.1, 9).unwrap(),
            make_folds(&labels, 5, 0.1, 10).unwrap()
        );
    }

    #[test]
    fn small_class_is_rejected() {
        let err = make_folds(&[0, 0, 0, 0, 1], 2, 0.1, 0).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientClassRows {
                class: 1,
                have: 1,
                need: 2
            }
        ));
        assert!(matches!(
            make_folds(&[0, 1], 1, 0.1, 0),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n_neg in 10usize..80, n_pos in 5usize..30, k in 2usize..6, seed in any::<u64>()) {
            let mut labels = vec![0u8; n_neg];
            labels.extend(vec![1u8; n_pos]);
            let f = make_folds(&labels, k, 0.1, seed).unwrap();
            let mut seen = vec![0usize; labels.len()];
            for fold in 0..k {
                for i in f.test_rows(fold) {
                    seen[i] += 1;
                }
                let pos = f.test_rows(fold).iter().filter(|&&i| labels[i] == 1).count();
                let expected = n_pos as f64 / k as f64;
                prop_assert!((pos as f64 - expected).abs() < 1.0);
                let test = f.test_rows(fold);
                prop_assert!(f.validation_rows(fold).iter().all(|i| !test.contains(i)));
                prop_assert!(f.generator_rows(fold).iter().all(|i| !test.contains(i) && !f.validation_rows(fold).contains(i)));
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
