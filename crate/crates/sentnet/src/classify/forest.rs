//! Random forest of CART trees: bootstrap resampling per tree, √m random
//! candidate features per split, Gini impurity, midpoint thresholds. Trees
//! grow to purity unless capped by `max_depth`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_train_inputs, stream_seed, Classifier, ClassifyError};
use crate::vectorizer::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        counts: Vec<u32>,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Class index at the leaf this doc falls into; leaf ties go to the
    /// lowest class index (classes are sorted, so that is lexicographic).
    fn predict_index(&self, doc: &SparseVector) -> usize {
        let mut at = 0u32;
        loop {
            match &self.nodes[at as usize] {
                Node::Leaf { counts } => {
                    let mut best = 0;
                    for (idx, &c) in counts.iter().enumerate() {
                        if c > counts[best] {
                            best = idx;
                        }
                    }
                    return best;
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if doc.get(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    classes: Vec<String>,
    trees: Vec<Tree>,
    n_features: usize,
    config: ForestConfig,
    oob_accuracy: Option<f64>,
}

impl RandomForestModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Out-of-bag accuracy, absent only when every sample was in every bag.
    pub fn oob_accuracy(&self) -> Option<f64> {
        self.oob_accuracy
    }

    /// Per-class vote counts over all trees; sums to `n_trees`.
    pub fn vote_counts(&self, doc: &SparseVector) -> Vec<usize> {
        let mut votes = vec![0usize; self.classes.len()];
        for tree in &self.trees {
            votes[tree.predict_index(doc)] += 1;
        }
        votes
    }

    /// Majority vote; ties go to the lexicographically smallest class.
    pub fn predict(&self, doc: &SparseVector) -> &str {
        let votes = self.vote_counts(doc);
        let mut best = 0;
        for (idx, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = idx;
            }
        }
        &self.classes[best]
    }
}

impl Classifier for RandomForestModel {
    fn predict(&self, doc: &SparseVector) -> &str {
        RandomForestModel::predict(self, doc)
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }
}

fn gini(counts: &[u32], n: f64) -> f64 {
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64 / n).powi(2)).sum();
    1.0 - sum_sq
}

struct TreeBuilder<'a> {
    vectors: &'a [SparseVector],
    y: &'a [usize],
    n_classes: usize,
    n_features: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn histogram(&self, samples: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &i in samples {
            counts[self.y[i]] += 1;
        }
        counts
    }

    fn push(&mut self, node: Node) -> u32 {
        self.nodes.push(node);
        (self.nodes.len() - 1) as u32
    }

    fn grow(&mut self, samples: &[usize], depth: usize) -> u32 {
        let counts = self.histogram(samples);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let capped = self.max_depth.is_some_and(|d| depth >= d);
        if samples.len() <= 1 || pure || capped {
            return self.push(Node::Leaf { counts });
        }
        let Some((feature, threshold)) = self.best_split(samples, &counts) else {
            return self.push(Node::Leaf { counts });
        };

        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.vectors[i].get(feature) <= threshold);
        let at = self.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(&left_samples, depth + 1);
        let right = self.grow(&right_samples, depth + 1);
        let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[at as usize]
        else {
            unreachable!()
        };
        *l = left;
        *r = right;
        at
    }

    /// Examines up to ⌊√m⌋ non-constant features in seeded random order and
    /// returns the (feature, midpoint threshold) with the lowest weighted
    /// Gini impurity. Ties keep the earliest candidate, which is the lowest
    /// threshold within a feature.
    fn best_split(&mut self, samples: &[usize], parent_counts: &[u32]) -> Option<(u32, f64)> {
        let mut features: Vec<u32> = (0..self.n_features as u32).collect();
        features.shuffle(&mut self.rng);
        let target = ((self.n_features as f64).sqrt().floor() as usize).max(1);

        let n = samples.len() as f64;
        let mut examined = 0;
        let mut best: Option<(f64, u32, f64)> = None;
        for feature in features {
            let mut pairs: Vec<(f64, usize)> = samples
                .iter()
                .map(|&i| (self.vectors[i].get(feature), self.y[i]))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite weights"));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue; // constant here; does not count against the budget
            }
            examined += 1;

            let mut left = vec![0u32; self.n_classes];
            let mut right = parent_counts.to_vec();
            for idx in 0..pairs.len() - 1 {
                left[pairs[idx].1] += 1;
                right[pairs[idx].1] -= 1;
                if pairs[idx].0 == pairs[idx + 1].0 {
                    continue;
                }
                let n_left = (idx + 1) as f64;
                let n_right = n - n_left;
                let impurity =
                    (n_left * gini(&left, n_left) + n_right * gini(&right, n_right)) / n;
                let mut threshold = (pairs[idx].0 + pairs[idx + 1].0) / 2.0;
                if threshold >= pairs[idx + 1].0 {
                    // adjacent floats: fall back to the left value so both
                    // sides stay non-empty under `<=`
                    threshold = pairs[idx].0;
                }
                if best.map_or(true, |(b, _, _)| impurity < b) {
                    best = Some((impurity, feature, threshold));
                }
            }
            if examined == target {
                break;
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }
}

/// Trains `config.n_trees` CART trees on bootstrap samples. Per-tree seeds
/// come from independent streams of `config.seed`, so results cannot depend
/// on training order. Also computes out-of-bag accuracy.
pub fn train_random_forest(
    vectors: &[SparseVector],
    labels: &[String],
    n_features: usize,
    config: &ForestConfig,
) -> Result<RandomForestModel, ClassifyError> {
    if config.n_trees == 0 {
        return Err(ClassifyError::InvalidConfig("n_trees must be ≥ 1".into()));
    }
    let classes = check_train_inputs(vectors, labels)?;
    let class_index: std::collections::BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let y: Vec<usize> = labels.iter().map(|l| class_index[l.as_str()]).collect();
    let n = vectors.len();

    let mut trees = Vec::with_capacity(config.n_trees);
    let mut in_bag: Vec<Vec<bool>> = Vec::with_capacity(config.n_trees);
    for tree_idx in 0..config.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, tree_idx as u64));
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut bag = vec![false; n];
        for &i in &bootstrap {
            bag[i] = true;
        }
        let mut builder = TreeBuilder {
            vectors,
            y: &y,
            n_classes: classes.len(),
            n_features,
            max_depth: config.max_depth,
            rng,
            nodes: Vec::new(),
        };
        builder.grow(&bootstrap, 0);
        trees.push(Tree {
            nodes: builder.nodes,
        });
        in_bag.push(bag);
    }

    // out-of-bag score: each sample judged by the trees that never saw it
    let mut oob_votes = vec![vec![0u32; classes.len()]; n];
    for (tree, bag) in trees.iter().zip(&in_bag) {
        for i in 0..n {
            if !bag[i] {
                oob_votes[i][tree.predict_index(&vectors[i])] += 1;
            }
        }
    }
    let mut scored = 0usize;
    let mut correct = 0usize;
    for i in 0..n {
        if oob_votes[i].iter().all(|&v| v == 0) {
            continue;
        }
        scored += 1;
        let mut best = 0;
        for (idx, &v) in oob_votes[i].iter().enumerate() {
            if v > oob_votes[i][best] {
                best = idx;
            }
        }
        if best == y[i] {
            correct += 1;
        }
    }
    let oob_accuracy = (scored > 0).then(|| correct as f64 / scored as f64);

    Ok(RandomForestModel {
        classes,
        trees,
        n_features,
        config: config.clone(),
        oob_accuracy,
    })
}
