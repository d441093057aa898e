use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrtError};

/// Disjoint, exhaustive split of `0..n` into `k` folds whose sizes differ by at
/// most one. Indices inside each fold are ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(SrtError::invalid("k-fold needs k >= 2"));
    }
    if n < k {
        return Err(SrtError::invalid(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(FoldPlan { seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eight_rows_four_folds() {
        let plan = kfold(8, 4, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 2));
        assert_eq!(plan.train_indices(0).len(), 6);
    }

    #[test]
    fn too_few_rows() {
        assert!(kfold(3, 4, 0).is_err());
        assert!(kfold(10, 1, 0).is_err());
    }

    #[test]
    fn same_seed_same_plan() {
        assert_eq!(kfold(50, 4, 9).unwrap(), kfold(50, 4, 9).unwrap());
        assert_ne!(kfold(50, 4, 9).unwrap(), kfold(50, 4, 10).unwrap());
    }

    proptest! {
        #[test]
        fn folds_disjoint_exhaustive_balanced(n in 2usize..300, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let plan = kfold(n, k, seed).unwrap();
            let mut all: Vec<usize> = plan.folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
