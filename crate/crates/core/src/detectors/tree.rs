use super::{check_training_set, FeatureVector, Label, LabeledSample, Scheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_leaf: 2,
        }
    }
}

/// `attack` / `total` are the training samples that reached the node.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        attack: usize,
        total: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        attack: usize,
        total: usize,
        /// Samples with `value ≤ threshold`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf(attack: usize, total: usize) -> Self {
        TreeNode::Leaf { attack, total }
    }

    fn counts(&self) -> (usize, usize) {
        match *self {
            TreeNode::Leaf { attack, total } | TreeNode::Split { attack, total, .. } => {
                (attack, total)
            }
        }
    }

    /// Attack fraction of the leaf `values` falls into.
    pub fn confidence(&self, values: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { attack, total } => fraction(*attack, *total),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if values[*feature] <= *threshold {
                    left.confidence(values)
                } else {
                    right.confidence(values)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }
}

fn fraction(attack: usize, total: usize) -> f64 {
    if total == 0 {
        0.5
    } else {
        attack as f64 / total as f64
    }
}

fn predicts_attack(conf: f64) -> bool {
    conf >= 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub scheme: Scheme,
    pub root: TreeNode,
    /// Reduced-error pruning ran (it is skipped without a prune set).
    pub pruned: bool,
}

impl TreeModel {
    pub fn score(&self, f: &FeatureVector) -> Result<f64> {
        if f.scheme() != self.scheme {
            return Err(Error::Shape(format!(
                "model expects {}, got {}",
                self.scheme,
                f.scheme()
            )));
        }
        Ok(self.root.confidence(f.values()))
    }

    /// Misclassified samples at the 0.5 confidence cut.
    pub fn errors(&self, samples: &[LabeledSample]) -> usize {
        samples
            .iter()
            .filter(|s| {
                predicts_attack(self.root.confidence(s.features.values()))
                    != (s.label == Label::Attack)
            })
            .count()
    }
}

fn entropy(attack: usize, total: usize) -> f64 {
    if total == 0 || attack == 0 || attack == total {
        return 0.0;
    }
    let p = attack as f64 / total as f64;
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

struct Candidate {
    feature: usize,
    threshold: f64,
    ratio: f64,
}

/// Best gain-ratio split; ties keep the lowest feature, then lowest threshold.
fn best_split(
    data: &[(&[f64], bool)],
    idx: &[usize],
    n_features: usize,
    min_leaf: usize,
) -> Option<Candidate> {
    let n = idx.len();
    let attack = idx.iter().filter(|&&i| data[i].1).count();
    let parent = entropy(attack, n);
    let mut best: Option<Candidate> = None;
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
    for f in 0..n_features {
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| (data[i].0[f], data[i].1)));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_attack = 0;
        for k in 0..n - 1 {
            left_attack += sorted[k].1 as usize;
            let (lo, hi) = (sorted[k].0, sorted[k + 1].0);
            let nl = k + 1;
            if lo == hi || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let (pl, pr) = (nl as f64 / n as f64, (n - nl) as f64 / n as f64);
            let gain =
                parent - pl * entropy(left_attack, nl) - pr * entropy(attack - left_attack, n - nl);
            if gain <= 1e-12 {
                continue;
            }
            let split_info = -(pl * pl.log2() + pr * pr.log2());
            let ratio = gain / split_info;
            if best.as_ref().is_none_or(|b| ratio > b.ratio) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some(Candidate {
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                    ratio,
                });
            }
        }
    }
    best
}

fn grow(
    data: &[(&[f64], bool)],
    idx: Vec<usize>,
    depth: usize,
    n_features: usize,
    cfg: &TreeConfig,
) -> TreeNode {
    let total = idx.len();
    let attack = idx.iter().filter(|&&i| data[i].1).count();
    if attack == 0 || attack == total || depth >= cfg.max_depth {
        return TreeNode::leaf(attack, total);
    }
    let Some(c) = best_split(data, &idx, n_features, cfg.min_leaf.max(1)) else {
        return TreeNode::leaf(attack, total);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| data[i].0[c.feature] <= c.threshold);
    TreeNode::Split {
        feature: c.feature,
        threshold: c.threshold,
        attack,
        total,
        left: Box::new(grow(data, l, depth + 1, n_features, cfg)),
        right: Box::new(grow(data, r, depth + 1, n_features, cfg)),
    }
}

/// Bottom-up reduced-error pruning; returns the prune-set error of the
/// resulting subtree.
fn prune(node: &mut TreeNode, data: &[(&[f64], bool)], idx: &[usize]) -> usize {
    let wrong = |conf: f64, idx: &[usize]| {
        idx.iter()
            .filter(|&&i| predicts_attack(conf) != data[i].1)
            .count()
    };
    match node {
        TreeNode::Leaf { attack, total } => wrong(fraction(*attack, *total), idx),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| data[i].0[*feature] <= *threshold);
            let subtree = prune(left, data, &l) + prune(right, data, &r);
            let (attack, total) = node.counts();
            let as_leaf = wrong(fraction(attack, total), idx);
            if as_leaf <= subtree {
                *node = TreeNode::leaf(attack, total);
                as_leaf
            } else {
                subtree
            }
        }
    }
}

/// Gain-ratio tree on continuous features with midpoint thresholds, then
/// reduced-error pruning against `prune_set` (skipped when it is empty).
pub fn train_tree(
    samples: &[LabeledSample],
    cfg: &TreeConfig,
    prune_set: &[LabeledSample],
) -> Result<TreeModel> {
    let scheme = check_training_set(samples)?;
    if prune_set.iter().any(|s| s.features.scheme() != scheme) {
        return Err(Error::Training(
            "prune set uses a different feature scheme".into(),
        ));
    }
    let data: Vec<(&[f64], bool)> = samples
        .iter()
        .map(|s| (s.features.values(), s.label == Label::Attack))
        .collect();
    let mut root = grow(&data, (0..data.len()).collect(), 0, scheme.len(), cfg);
    let pruned = !prune_set.is_empty();
    if pruned {
        let pdata: Vec<(&[f64], bool)> = prune_set
            .iter()
            .map(|s| (s.features.values(), s.label == Label::Attack))
            .collect();
        prune(&mut root, &pdata, &(0..pdata.len()).collect::<Vec<_>>());
    } else {
        log::warn!("empty prune set; tree left unpruned");
    }
    Ok(TreeModel {
        scheme,
        root,
        pruned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::Variant;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(v: &[f64], attack: bool) -> LabeledSample {
        let mut full = v.to_vec();
        full.resize(6, 0.0);
        LabeledSample::new(
            FeatureVector::new(Scheme::EdgeFeat, full).unwrap(),
            if attack {
                Variant::Sharp
            } else {
                Variant::Genuine
            },
        )
    }

    fn noisy(seed: u64, n: usize) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: f64 = rng.gen();
                let y: f64 = rng.gen();
                let attack = (x + 0.3 * y > 0.6) ^ rng.gen_bool(0.15);
                sample(&[x, y], attack)
            })
            .collect()
    }

    #[test]
    fn perfect_split_at_midpoint() {
        let data = [0.0, 0.25, 0.75, 1.0].map(|x| sample(&[x], x > 0.5));
        let t = train_tree(&data, &TreeConfig::default(), &[]).unwrap();
        match &t.root {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!((*feature, *threshold), (0, 0.5));
                assert_eq!(**left, TreeNode::leaf(0, 2));
                assert_eq!(**right, TreeNode::leaf(2, 2));
            }
            other => panic!("expected a split, got {other:?}"),
        }
        assert!(!t.pruned);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Features 0 and 1 are identical; the split must use feature 0.
        let data = [0.0, 1.0, 2.0, 3.0].map(|x| sample(&[x, x], x > 1.5));
        let t = train_tree(&data, &TreeConfig::default(), &[]).unwrap();
        assert!(
            matches!(t.root, TreeNode::Split { feature: 0, threshold, .. } if threshold == 1.5)
        );
    }

    #[test]
    fn depth_budget_respected() {
        let data = noisy(1, 200);
        for d in [0, 1, 3] {
            let t = train_tree(
                &data,
                &TreeConfig {
                    max_depth: d,
                    min_leaf: 1,
                },
                &[],
            )
            .unwrap();
            assert!(t.root.depth() <= d);
        }
    }

    #[test]
    fn constant_leaf_scores_constant() {
        let t = TreeModel {
            scheme: Scheme::EdgeFeat,
            root: TreeNode::leaf(4, 5),
            pruned: false,
        };
        assert_eq!(t.score(&sample(&[9.0, -3.0], true).features).unwrap(), 0.8);
        let lbp = FeatureVector::new(Scheme::Lbp59, vec![0.0; 59]).unwrap();
        assert!(t.score(&lbp).is_err());
    }

    #[test]
    fn single_class_rejected() {
        let data = [0.0, 1.0].map(|x| sample(&[x], true));
        assert!(train_tree(&data, &TreeConfig::default(), &[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pruning_never_hurts_prune_set(seed in any::<u64>()) {
            let train = noisy(seed, 120);
            let val = noisy(seed.wrapping_add(1), 60);
            let cfg = TreeConfig { max_depth: 8, min_leaf: 1 };
            let full = train_tree(&train, &cfg, &[]).unwrap();
            let pruned = train_tree(&train, &cfg, &val).unwrap();
            prop_assert!(pruned.pruned);
            prop_assert!(pruned.errors(&val) <= full.errors(&val));
            prop_assert!(pruned.root.node_count() <= full.root.node_count());
        }
    }
}
