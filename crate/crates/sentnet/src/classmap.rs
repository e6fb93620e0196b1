//! Community ↔ reference-class comparison: contingency counts, Class-split
//! and Class-merge scores, threshold sweeps, and ambiguity reporting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::louvain::{louvain_detect, LouvainConfig, Partition};
use crate::simgraph::{build_graph, GraphError};

#[derive(Debug, Error)]
pub enum ClassMapError {
    #[error("class map requires a fully labeled corpus")]
    UnlabeledCorpus,
    #[error("partition covers {partition} nodes but corpus has {corpus}")]
    PartitionMismatch { partition: usize, corpus: usize },
    #[error("class map has no nonzero counts")]
    EmptyMap,
    #[error("count matrix rows have unequal lengths")]
    RaggedCounts,
    #[error("sweep needs at least 2 thresholds, got {0}")]
    TooFewThresholds(usize),
    #[error("sweep thresholds must be strictly increasing")]
    UnsortedThresholds,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Contingency counts between detected communities (rows) and reference
/// classes (columns).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    /// counts\[community\]\[class\]
    counts: Vec<Vec<u32>>,
    /// class names, column order
    classes: Vec<String>,
}

impl ClassMap {
    /// Builds directly from a count matrix; rows are communities 0.., and
    /// `classes` names the columns.
    pub fn from_counts(counts: Vec<Vec<u32>>, classes: Vec<String>) -> Result<Self, ClassMapError> {
        if counts.iter().any(|row| row.len() != classes.len()) {
            return Err(ClassMapError::RaggedCounts);
        }
        if counts.iter().flatten().all(|&c| c == 0) {
            return Err(ClassMapError::EmptyMap);
        }
        Ok(ClassMap { counts, classes })
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_communities(&self) -> usize {
        self.counts.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Majority reference class of a community; ties break to the
    /// lexicographically smallest class name. `None` for empty communities.
    pub fn majority_class(&self, community: usize) -> Option<&str> {
        let row = &self.counts[community];
        let best = row.iter().max()?;
        if *best == 0 {
            return None;
        }
        row.iter()
            .enumerate()
            .filter(|&(_, c)| c == best)
            .map(|(k, _)| self.classes[k].as_str())
            .min()
    }

    /// Community-label string → majority class name, for message-level
    /// evaluation of community-trained models. Labels are the community ids
    /// rendered in decimal, matching the labeled-dataset CSV column.
    pub fn label_to_class(&self) -> BTreeMap<String, String> {
        (0..self.n_communities())
            .filter_map(|c| {
                self.majority_class(c)
                    .map(|class| (c.to_string(), class.to_string()))
            })
            .collect()
    }
}

/// Exact contingency counts of `p` against the corpus labels.
pub fn build_class_map(p: &Partition, corpus: &Corpus) -> Result<ClassMap, ClassMapError> {
    if !corpus.is_labeled() {
        return Err(ClassMapError::UnlabeledCorpus);
    }
    if p.n_nodes() != corpus.len() {
        return Err(ClassMapError::PartitionMismatch {
            partition: p.n_nodes(),
            corpus: corpus.len(),
        });
    }
    let classes: Vec<String> = corpus.classes().iter().cloned().collect();
    let class_index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut counts = vec![vec![0u32; classes.len()]; p.k()];
    for sentence in corpus.sentences() {
        let community = p.community_of(sentence.id) as usize;
        let class = class_index[sentence.label.as_deref().expect("labeled")];
        counts[community][class] += 1;
    }
    ClassMap::from_counts(counts, classes)
}

/// Split/merge vectors and their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMerge {
    /// Per class (with ≥1 sentence): number of communities it spreads over.
    pub split_vector: Vec<u32>,
    /// Per community (with ≥1 sentence): number of classes it contains.
    pub merge_vector: Vec<u32>,
    pub split_score: f64,
    pub merge_score: f64,
}

/// Class-split and Class-merge scores: how many communities each class is
/// split into, and how many classes each community merges, both averaged.
/// Classes or communities with zero members contribute nothing.
pub fn split_merge_scores(map: &ClassMap) -> SplitMerge {
    let mut split_vector = Vec::new();
    for k in 0..map.n_classes() {
        let spread = map.counts().iter().filter(|row| row[k] > 0).count() as u32;
        if spread > 0 {
            split_vector.push(spread);
        }
    }
    let mut merge_vector = Vec::new();
    for row in map.counts() {
        let spread = row.iter().filter(|&&c| c > 0).count() as u32;
        if spread > 0 {
            merge_vector.push(spread);
        }
    }
    let mean = |v: &[u32]| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
    SplitMerge {
        split_score: mean(&split_vector),
        merge_score: mean(&merge_vector),
        split_vector,
        merge_vector,
    }
}

/// One sweep grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub threshold: f64,
    pub n_communities: usize,
    pub n_singletons: usize,
    pub split_score: f64,
    pub merge_score: f64,
    pub split_norm: f64,
    pub merge_norm: f64,
}

/// How θ* was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThetaSelection {
    /// Piecewise-linear intersection of the normalized curves.
    Crossing,
    /// No crossing existed; θ* is the grid argmin of split_norm+merge_norm.
    ArgminNoCrossing,
    /// A score series was constant; normalization degenerate, argmin rule.
    ArgminDegenerate,
}

/// Sweep output: per-threshold records plus the selected θ*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub theta_star: f64,
    pub selection: ThetaSelection,
}

/// Min–max normalization onto [0,1]; `None` when the series is constant.
fn min_max_normalize(series: &[f64]) -> Option<Vec<f64>> {
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        Some(series.iter().map(|&x| (x - min) / (max - min)).collect())
    } else {
        None
    }
}

/// θ* from normalized series: the piecewise-linear crossing of the split
/// and merge curves. Multiple crossings resolve to the one minimizing
/// split_norm + merge_norm (ties → smallest θ); no crossing falls back to
/// the grid argmin of the sum.
fn select_theta(
    thresholds: &[f64],
    split_norm: &[f64],
    merge_norm: &[f64],
    degenerate: bool,
) -> (f64, ThetaSelection) {
    if !degenerate {
        // Candidates: grid points where the curves touch, and interpolated
        // crossings where the sign of (split − merge) flips.
        let d: Vec<f64> = split_norm
            .iter()
            .zip(merge_norm)
            .map(|(s, m)| s - m)
            .collect();
        let mut candidates: Vec<(f64, f64)> = Vec::new(); // (θ, sum at θ)
        for i in 0..thresholds.len() {
            if d[i] == 0.0 {
                candidates.push((thresholds[i], split_norm[i] + merge_norm[i]));
            }
            if i + 1 < thresholds.len() && d[i] * d[i + 1] < 0.0 {
                let frac = d[i] / (d[i] - d[i + 1]);
                let theta = thresholds[i] + (thresholds[i + 1] - thresholds[i]) * frac;
                let split_at = split_norm[i] + (split_norm[i + 1] - split_norm[i]) * frac;
                let merge_at = merge_norm[i] + (merge_norm[i + 1] - merge_norm[i]) * frac;
                candidates.push((theta, split_at + merge_at));
            }
        }
        if let Some(&(theta, _)) = candidates.iter().min_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap()
                .then(a.0.partial_cmp(&b.0).unwrap())
        }) {
            return (theta, ThetaSelection::Crossing);
        }
    }
    // Fallback: grid argmin of the normalized sum, smallest θ on ties.
    let argmin = (0..thresholds.len())
        .min_by(|&a, &b| {
            let sa = split_norm[a] + merge_norm[a];
            let sb = split_norm[b] + merge_norm[b];
            sa.partial_cmp(&sb).unwrap().then(a.cmp(&b))
        })
        .expect("non-empty grid");
    let mode = if degenerate {
        ThetaSelection::ArgminDegenerate
    } else {
        ThetaSelection::ArgminNoCrossing
    };
    (thresholds[argmin], mode)
}

/// Full sweep: at each threshold build the graph, detect communities,
/// score the class map; then normalize both score series and select θ*.
pub fn sweep_and_select(
    pairs: &BTreeMap<(u32, u32), f64>,
    corpus: &Corpus,
    thresholds: &[f64],
    config: &LouvainConfig,
) -> Result<SweepResult, ClassMapError> {
    if thresholds.len() < 2 {
        return Err(ClassMapError::TooFewThresholds(thresholds.len()));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ClassMapError::UnsortedThresholds);
    }
    if !corpus.is_labeled() {
        return Err(ClassMapError::UnlabeledCorpus);
    }

    let mut partial: Vec<(usize, usize, SplitMerge)> = Vec::with_capacity(thresholds.len());
    for &theta in thresholds {
        let graph = build_graph(pairs, corpus.len(), theta)?;
        let partition = louvain_detect(&graph, config);
        let map = build_class_map(&partition, corpus)?;
        let scores = split_merge_scores(&map);
        partial.push((partition.k(), partition.n_singletons(), scores));
    }

    let split_series: Vec<f64> = partial.iter().map(|(_, _, s)| s.split_score).collect();
    let merge_series: Vec<f64> = partial.iter().map(|(_, _, s)| s.merge_score).collect();
    let split_norm = min_max_normalize(&split_series);
    let merge_norm = min_max_normalize(&merge_series);
    let degenerate = split_norm.is_none() || merge_norm.is_none();
    let split_norm = split_norm.unwrap_or_else(|| vec![0.0; thresholds.len()]);
    let merge_norm = merge_norm.unwrap_or_else(|| vec![0.0; thresholds.len()]);

    let (theta_star, selection) = select_theta(thresholds, &split_norm, &merge_norm, degenerate);

    let records = thresholds
        .iter()
        .enumerate()
        .map(|(i, &threshold)| SweepRecord {
            threshold,
            n_communities: partial[i].0,
            n_singletons: partial[i].1,
            split_score: partial[i].2.split_score,
            merge_score: partial[i].2.merge_score,
            split_norm: split_norm[i],
            merge_norm: merge_norm[i],
        })
        .collect();
    Ok(SweepResult {
        records,
        theta_star,
        selection,
    })
}

/// One mixed community in the ambiguity report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityEntry {
    pub community: u32,
    /// Classes present, majority first (count desc, then name).
    pub classes: Vec<String>,
    /// Member sentences, minority classes first (count asc, then name,
    /// then sentence id) — the likely mislabeled/ambiguous ones lead.
    pub sentences: Vec<AmbiguousSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousSentence {
    pub id: usize,
    pub text: String,
    pub class: String,
}

/// Communities spanning at least two reference classes, with their member
/// sentences ordered so minority-class members surface first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub entries: Vec<AmbiguityEntry>,
}

pub fn ambiguity_report(
    map: &ClassMap,
    corpus: &Corpus,
    p: &Partition,
) -> Result<AmbiguityReport, ClassMapError> {
    if !corpus.is_labeled() {
        return Err(ClassMapError::UnlabeledCorpus);
    }
    if p.n_nodes() != corpus.len() {
        return Err(ClassMapError::PartitionMismatch {
            partition: p.n_nodes(),
            corpus: corpus.len(),
        });
    }
    let mut entries = Vec::new();
    for community in 0..map.n_communities() {
        let row = &map.counts()[community];
        let present: Vec<usize> = (0..map.n_classes()).filter(|&k| row[k] > 0).collect();
        if present.len() < 2 {
            continue;
        }
        let mut classes: Vec<&str> = present.iter().map(|&k| map.classes()[k].as_str()).collect();
        classes.sort_by_key(|name| {
            let k = map.classes().iter().position(|c| c == name).unwrap();
            (u32::MAX - row[k], name.to_string())
        });
        let count_of = |class: &str| {
            let k = map.classes().iter().position(|c| c == class).unwrap();
            row[k]
        };
        let mut sentences: Vec<AmbiguousSentence> = corpus
            .sentences()
            .iter()
            .filter(|s| p.community_of(s.id) as usize == community)
            .map(|s| AmbiguousSentence {
                id: s.id,
                text: s.raw_text.clone(),
                class: s.label.clone().expect("labeled"),
            })
            .collect();
        sentences.sort_by_key(|s| (count_of(&s.class), s.class.clone(), s.id));
        entries.push(AmbiguityEntry {
            community: community as u32,
            classes: classes.into_iter().map(String::from).collect(),
            sentences,
        });
    }
    Ok(AmbiguityReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus_with(labels: &[&str]) -> Corpus {
        Corpus::from_pairs(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| (format!("sentence {i}"), Some(l.to_string()))),
        )
        .unwrap()
    }

    #[test]
    fn diagonal_map_when_labels_equal_communities() {
        let corpus = corpus_with(&["a", "a", "b", "b"]);
        let p = Partition::from_assignment(&[0, 0, 1, 1]);
        let map = build_class_map(&p, &corpus).unwrap();
        assert_eq!(map.counts(), &[vec![2, 0], vec![0, 2]]);
        let scores = split_merge_scores(&map);
        assert_eq!(scores.split_score, 1.0);
        assert_eq!(scores.merge_score, 1.0);
        assert!(ambiguity_report(&map, &corpus, &p).unwrap().entries.is_empty());
    }

    #[test]
    fn hand_counted_two_by_two() {
        // communities {0,1},{2,3}; classes x,x,x,y
        let corpus = corpus_with(&["x", "x", "x", "y"]);
        let p = Partition::from_assignment(&[0, 0, 1, 1]);
        let map = build_class_map(&p, &corpus).unwrap();
        assert_eq!(map.counts(), &[vec![2, 0], vec![1, 1]]);
        let scores = split_merge_scores(&map);
        assert_eq!(scores.split_vector, vec![2, 1]); // x in 2 communities, y in 1
        assert_eq!(scores.merge_vector, vec![1, 2]); // c0 pure, c1 mixed
        assert!((scores.split_score - 1.5).abs() < 1e-12);
        assert!((scores.merge_score - 1.5).abs() < 1e-12);
    }

    #[test]
    fn published_split_and_merge_vectors() {
        let split_vector: [u32; 19] = [2, 1, 4, 5, 1, 2, 2, 1, 1, 4, 1, 9, 1, 1, 4, 2, 2, 2, 7];
        // One community per (class, slot): class k occupies split_vector[k]
        // otherwise-empty communities.
        let n_classes = split_vector.len();
        let mut counts = Vec::new();
        for (k, &spread) in split_vector.iter().enumerate() {
            for _ in 0..spread {
                let mut row = vec![0u32; n_classes];
                row[k] = 1;
                counts.push(row);
            }
        }
        let classes = (0..n_classes).map(|k| format!("class_{k}")).collect();
        let map = ClassMap::from_counts(counts, classes).unwrap();
        let scores = split_merge_scores(&map);
        assert_eq!(scores.split_vector, split_vector);
        assert!((scores.split_score - 2.7368).abs() < 1e-4);

        let merge_vector: [u32; 18] = [1, 1, 1, 1, 4, 1, 2, 1, 2, 4, 1, 9, 2, 1, 1, 1, 6, 12];
        // Each community c holds merge_vector[c] classes of its own.
        let n_classes: usize = merge_vector.iter().sum::<u32>() as usize;
        let mut counts = Vec::new();
        let mut next_class = 0usize;
        for &spread in &merge_vector {
            let mut row = vec![0u32; n_classes];
            for _ in 0..spread {
                row[next_class] = 1;
                next_class += 1;
            }
            counts.push(row);
        }
        let classes = (0..n_classes).map(|k| format!("class_{k}")).collect();
        let map = ClassMap::from_counts(counts, classes).unwrap();
        let scores = split_merge_scores(&map);
        assert_eq!(scores.merge_vector, merge_vector);
        assert!((scores.merge_score - 2.8333).abs() < 1e-4);
    }

    #[test]
    fn empty_map_rejected() {
        assert!(matches!(
            ClassMap::from_counts(vec![vec![0, 0]], vec!["a".into(), "b".into()]),
            Err(ClassMapError::EmptyMap)
        ));
    }

    #[test]
    fn unlabeled_corpus_rejected() {
        let corpus = Corpus::from_pairs([("hello world", None::<&str>)]).unwrap();
        let p = Partition::singletons(1);
        assert!(matches!(
            build_class_map(&p, &corpus),
            Err(ClassMapError::UnlabeledCorpus)
        ));
    }

    #[test]
    fn majority_class_breaks_ties_lexicographically() {
        let map = ClassMap::from_counts(
            vec![vec![3, 3, 1]],
            vec!["zeta".into(), "alpha".into(), "mid".into()],
        )
        .unwrap();
        assert_eq!(map.majority_class(0), Some("alpha"));
        let mapping = map.label_to_class();
        assert_eq!(mapping.get("0").map(String::as_str), Some("alpha"));
    }

    #[test]
    fn select_theta_interpolates_crossing() {
        let (theta, mode) = select_theta(&[0.5, 0.6], &[0.0, 1.0], &[1.0, 0.0], false);
        assert!((theta - 0.55).abs() < 1e-12);
        assert_eq!(mode, ThetaSelection::Crossing);
    }

    #[test]
    fn select_theta_takes_exact_grid_crossing() {
        let (theta, mode) = select_theta(
            &[0.1, 0.2, 0.3],
            &[0.0, 0.5, 1.0],
            &[1.0, 0.5, 0.0],
            false,
        );
        assert_eq!(theta, 0.2);
        assert_eq!(mode, ThetaSelection::Crossing);
    }

    #[test]
    fn select_theta_prefers_lowest_sum_crossing() {
        // Crossings between 0–1 (high sum) and between 2–3 (low sum).
        let thresholds = [0.0, 0.1, 0.2, 0.3];
        let split = [0.8, 1.0, 0.1, 0.3];
        let merge = [1.0, 0.8, 0.3, 0.1];
        let (theta, mode) = select_theta(&thresholds, &split, &merge, false);
        assert_eq!(mode, ThetaSelection::Crossing);
        assert!((theta - 0.25).abs() < 1e-9, "got {theta}");
    }

    #[test]
    fn select_theta_falls_back_to_argmin() {
        // Split always above merge → no crossing.
        let (theta, mode) = select_theta(&[0.0, 0.1, 0.2], &[0.4, 0.3, 1.0], &[0.2, 0.0, 0.5], false);
        assert_eq!(mode, ThetaSelection::ArgminNoCrossing);
        assert_eq!(theta, 0.1);
    }

    #[test]
    fn sweep_on_separable_fixture() {
        // Two tight topics: within-pairs high similarity, across ≈ 0.
        let corpus = corpus_with(&["t0", "t0", "t0", "t1", "t1", "t1"]);
        let mut pairs = BTreeMap::new();
        for i in 0..3u32 {
            for j in (i + 1)..3 {
                pairs.insert((i, j), 0.9);
                pairs.insert((i + 3, j + 3), 0.9);
            }
        }
        pairs.insert((0, 3), 0.2);
        let thresholds = [0.0, 0.3, 0.6];
        let result =
            sweep_and_select(&pairs, &corpus, &thresholds, &LouvainConfig::default()).unwrap();
        assert_eq!(result.records.len(), 3);
        assert!(result.theta_star >= 0.0 && result.theta_star <= 0.6);
        for record in &result.records {
            assert!(record.split_norm >= 0.0 && record.split_norm <= 1.0);
            assert!(record.merge_norm >= 0.0 && record.merge_norm <= 1.0);
        }
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let corpus = corpus_with(&["a", "b"]);
        let pairs = BTreeMap::new();
        assert!(matches!(
            sweep_and_select(&pairs, &corpus, &[0.5], &LouvainConfig::default()),
            Err(ClassMapError::TooFewThresholds(1))
        ));
        assert!(matches!(
            sweep_and_select(&pairs, &corpus, &[0.5, 0.5], &LouvainConfig::default()),
            Err(ClassMapError::UnsortedThresholds)
        ));
    }

    #[test]
    fn ambiguity_flags_minority_first() {
        // community 0: two "movies" + one planted "parking" sentence
        let corpus = corpus_with(&["movies", "movies", "parking", "parking"]);
        let p = Partition::from_assignment(&[0, 0, 0, 1]);
        let map = build_class_map(&p, &corpus).unwrap();
        let report = ambiguity_report(&map, &corpus, &p).unwrap();
        assert_eq!(report.entries.len(), 1);
        let entry = &report.entries[0];
        assert_eq!(entry.community, 0);
        assert_eq!(entry.classes, vec!["movies", "parking"]);
        assert_eq!(entry.sentences[0].id, 2, "planted sentence must lead");
        assert_eq!(entry.sentences[0].class, "parking");
    }

    proptest! {
        // Σ split_vector = Σ merge_vector = number of nonzero cells.
        #[test]
        fn vector_sums_count_nonzero_cells(
            rows in proptest::collection::vec(
                proptest::collection::vec(0u32..4, 3),
                1..6
            )
        ) {
            prop_assume!(rows.iter().flatten().any(|&c| c > 0));
            let classes = vec!["a".into(), "b".into(), "c".into()];
            let map = ClassMap::from_counts(rows.clone(), classes).unwrap();
            let scores = split_merge_scores(&map);
            let nonzero = rows.iter().flatten().filter(|&&c| c > 0).count() as u32;
            prop_assert_eq!(scores.split_vector.iter().sum::<u32>(), nonzero);
            prop_assert_eq!(scores.merge_vector.iter().sum::<u32>(), nonzero);
        }

        #[test]
        fn normalization_hits_zero_and_one(series in proptest::collection::vec(0.0f64..10.0, 2..10)) {
            match min_max_normalize(&series) {
                Some(norm) => {
                    let min = norm.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = norm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!((min - 0.0).abs() < 1e-12);
                    prop_assert!((max - 1.0).abs() < 1e-12);
                }
                None => {
                    // constant input
                    prop_assert!(series.windows(2).all(|w| w[0] == w[1]));
                }
            }
        }
    }
}
