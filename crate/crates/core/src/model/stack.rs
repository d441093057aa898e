//! Stacking constructors: a tree of depth `D1 + D2` whose every leaf of the
//! first tree is replaced by a copy of the second tree. For constant-leaf trees
//! the HBP leaf of the stacked tree is the pair of HBP leaves of the two inputs,
//! so combining leaf intercepts by product or sum reproduces the pointwise
//! product or sum of the two predictors.

use super::{ModelParams, TreeTopology};
use crate::error::{Result, SrtError};

/// Pair `(t1, t2)` of 1-based leaf ordinals in the first and second tree that
/// label leaf ordinal `t` of the stacked tree:
/// `t1 = ceil(t / 2^D2) mod (2^D1 + 1)` and `t2 = ((t - 1) mod 2^D2) + 1`.
pub fn leaf_label_pair(t: usize, depth1: usize, depth2: usize) -> Result<(usize, usize)> {
    let total = depth1
        .checked_add(depth2)
        .filter(|&d| d < usize::BITS as usize)
        .ok_or_else(|| SrtError::invalid("stacked depth too large"))?;
    if t == 0 || t > 1usize << total {
        return Err(SrtError::invalid(format!(
            "leaf ordinal {t} outside 1..={}",
            1usize << total
        )));
    }
    let block = 1usize << depth2;
    let t1 = t.div_ceil(block) % ((1usize << depth1) + 1);
    let t2 = (t - 1) % block + 1;
    Ok((t1, t2))
}

fn stack_with(
    first: &ModelParams,
    second: &ModelParams,
    combine: impl Fn(f64, f64) -> f64,
) -> Result<ModelParams> {
    if !first.has_constant_leaves() || !second.has_constant_leaves() {
        return Err(SrtError::Unsupported(
            "stacking requires trees with constant leaves".into(),
        ));
    }
    if first.n_features() != second.n_features() {
        return Err(SrtError::invalid("stacked trees must share the feature count"));
    }
    if first.mu != second.mu {
        return Err(SrtError::invalid("stacked trees must share mu"));
    }
    let (d1, d2) = (first.depth(), second.depth());
    let mut out = ModelParams::zeros(d1 + d2, first.n_features(), first.mu)?;

    for t in out.topology().branch_nodes() {
        let level = TreeTopology::level(t);
        let source = if level < d1 {
            first.omega_block(t)
        } else {
            // position inside the level, split into (copy index, offset within copy)
            let inner = level - d1;
            let pos = t - (1 << level);
            let offset = pos & ((1 << inner) - 1);
            second.omega_block((1 << inner) + offset)
        };
        out.omega_block_mut(t).copy_from_slice(source);
    }

    let topo1 = *first.topology();
    let topo2 = *second.topology();
    for t in out.topology().leaf_nodes() {
        let ordinal = out.topology().leaf_ordinal(t);
        let (t1, t2) = leaf_label_pair(ordinal, d1, d2)?;
        let b1 = first.beta_block(topo1.first_leaf() + t1 - 1)[0];
        let b2 = second.beta_block(topo2.first_leaf() + t2 - 1)[0];
        out.beta_block_mut(t)[0] = combine(b1, b2);
    }
    Ok(out)
}

/// Tree computing `predict(first, x) * predict(second, x)` for every `x`.
pub fn stack_product(first: &ModelParams, second: &ModelParams) -> Result<ModelParams> {
    stack_with(first, second, |a, b| a * b)
}

/// Tree computing `predict(first, x) + predict(second, x)` for every `x`.
pub fn stack_sum(first: &ModelParams, second: &ModelParams) -> Result<ModelParams> {
    stack_with(first, second, |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_pairs_examples() {
        assert_eq!(leaf_label_pair(1, 2, 1).unwrap(), (1, 1));
        assert_eq!(leaf_label_pair(3, 2, 1).unwrap(), (2, 1));
        assert_eq!(leaf_label_pair(8, 2, 1).unwrap(), (4, 2));
        assert!(leaf_label_pair(0, 2, 1).is_err());
        assert!(leaf_label_pair(9, 2, 1).is_err());
    }

    #[test]
    fn label_pairs_are_bijective() {
        for d1 in 1..=4 {
            for d2 in 1..=d1 {
                let mut seen = std::collections::HashSet::new();
                for t in 1..=1usize << (d1 + d2) {
                    let (a, b) = leaf_label_pair(t, d1, d2).unwrap();
                    assert!((1..=1 << d1).contains(&a) && (1..=1 << d2).contains(&b));
                    assert!(seen.insert((a, b)));
                }
                assert_eq!(seen.len(), 1 << (d1 + d2));
            }
        }
    }

    #[test]
    fn non_constant_leaves_rejected() {
        let mut a = ModelParams::zeros(1, 2, 1.0).unwrap();
        let b = ModelParams::zeros(1, 2, 1.0).unwrap();
        a.beta_block_mut(2)[1] = 0.5;
        assert!(matches!(stack_product(&a, &b), Err(SrtError::Unsupported(_))));
        assert!(matches!(stack_sum(&b, &a), Err(SrtError::Unsupported(_))));
    }
}
