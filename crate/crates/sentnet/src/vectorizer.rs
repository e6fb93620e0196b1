//! TF-IDF vectorization and cosine similarity.
//!
//! Weights follow `tfidf(d,t) = tf(d,t) · ln(|D| / df(t))` with raw counts
//! for TF and the natural logarithm. The log base only rescales every
//! vector uniformly — cosine normalization cancels it — but it is pinned
//! for reproducibility.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::TermCounts;

#[derive(Debug, Error)]
pub enum VectorizerError {
    #[error("cannot fit a vocabulary on an empty document list")]
    EmptyDocumentList,
}

/// Term table fitted on a document collection: dense indices, document
/// frequencies, and the corpus size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// term → dense index, ordered lexicographically.
    terms: BTreeMap<String, u32>,
    /// df\[index\] = number of documents containing the term.
    df: Vec<u32>,
    n_docs: usize,
}

impl Vocabulary {
    /// Fits the vocabulary: every term occurring in at least one document
    /// gets a dense index; df counts documents, not occurrences.
    pub fn fit(docs: &[TermCounts]) -> Result<Self, VectorizerError> {
        if docs.is_empty() {
            return Err(VectorizerError::EmptyDocumentList);
        }
        let mut df_by_term: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in docs {
            for term in doc.keys() {
                *df_by_term.entry(term).or_insert(0) += 1;
            }
        }
        let mut terms = BTreeMap::new();
        let mut df = Vec::with_capacity(df_by_term.len());
        for (index, (term, count)) in df_by_term.into_iter().enumerate() {
            terms.insert(term.to_string(), index as u32);
            df.push(count);
        }
        Ok(Vocabulary {
            terms,
            df,
            n_docs: docs.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.terms.get(term).copied()
    }

    pub fn df(&self, index: u32) -> u32 {
        self.df[index as usize]
    }

    /// Terms in index order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, u32)> {
        self.terms.iter().map(|(t, i)| (t.as_str(), *i))
    }

    /// IDF of a term index: ln(n_docs / df).
    pub fn idf(&self, index: u32) -> f64 {
        (self.n_docs as f64 / self.df[index as usize] as f64).ln()
    }

    /// FNV-1a hash over (term, index, df) entries and n_docs; embedded in
    /// model files so a model is never applied to vectors from a different
    /// vocabulary.
    pub fn content_hash(&self) -> u64 {
        const OFFSET: u64 = 0xcbf29ce484222325;
        const PRIME: u64 = 0x100000001b3;
        let mut hash = OFFSET;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                hash ^= b as u64;
                hash = hash.wrapping_mul(PRIME);
            }
        };
        eat(&(self.n_docs as u64).to_le_bytes());
        for (term, &index) in &self.terms {
            eat(term.as_bytes());
            eat(&[0xff]);
            eat(&index.to_le_bytes());
            eat(&self.df[index as usize].to_le_bytes());
        }
        hash
    }
}

/// Sparse TF-IDF vector: (term index, weight) pairs with strictly
/// increasing indices and no explicit zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds from entries, dropping zeros; panics on unsorted or negative
    /// input (internal misuse, not a data error).
    pub fn new(entries: Vec<(u32, f64)>) -> Self {
        for window in entries.windows(2) {
            assert!(window[0].0 < window[1].0, "indices must strictly increase");
        }
        assert!(
            entries.iter().all(|&(_, w)| w >= 0.0),
            "weights must be nonnegative"
        );
        let entries = entries.into_iter().filter(|&(_, w)| w > 0.0).collect();
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// Weight stored at `index`, or 0 when absent.
    pub fn get(&self, index: u32) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(k) => self.entries[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, w)| w * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        let mut sum = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// TF-IDF transform of one preprocessed document.
///
/// Terms missing from the vocabulary are ignored; terms present in every
/// document get weight ln(1) = 0 and vanish from the sparse form.
pub fn transform_tfidf(doc: &TermCounts, vocab: &Vocabulary) -> SparseVector {
    let mut entries: Vec<(u32, f64)> = doc
        .iter()
        .filter_map(|(term, &count)| {
            vocab.index_of(term).map(|index| {
                let weight = count as f64 * vocab.idf(index);
                (index, weight)
            })
        })
        .collect();
    entries.sort_unstable_by_key(|&(index, _)| index);
    SparseVector::new(entries)
}

/// Cosine similarity per Eq. SIM_C = u·v / (|u||v|), clamped to [0, 1];
/// defined as 0 when either vector has zero norm so all-stopword sentences
/// flow through as isolated nodes.
pub fn cosine_similarity(u: &SparseVector, v: &SparseVector) -> f64 {
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (u.dot(v) / denom).clamp(0.0, 1.0)
}

/// All pairwise similarities, sparse over pairs that share at least one
/// term (disjoint supports are exactly 0 and omitted).
///
/// Keys are (i, j) with i < j. Uses an inverted index so only co-occurring
/// pairs are visited; accumulating term contributions in ascending index
/// order reproduces the merge-join summation order of
/// [`cosine_similarity`] bit for bit.
pub fn pairwise_similarities(vectors: &[SparseVector]) -> BTreeMap<(u32, u32), f64> {
    // Inverted index: term index → [(doc id, weight)] in doc order.
    let mut postings: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
    for (doc_id, vector) in vectors.iter().enumerate() {
        for &(term, weight) in vector.entries() {
            postings
                .entry(term)
                .or_default()
                .push((doc_id as u32, weight));
        }
    }

    // Ascending term order keeps per-pair addition order identical to the
    // merge join in `dot`, so both paths round identically.
    let mut dots: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for list in postings.values() {
        for (a, &(i, wi)) in list.iter().enumerate() {
            for &(j, wj) in &list[a + 1..] {
                *dots.entry((i, j)).or_insert(0.0) += wi * wj;
            }
        }
    }

    let norms: Vec<f64> = vectors.iter().map(SparseVector::norm).collect();
    dots.into_iter()
        .filter_map(|((i, j), dot)| {
            let denom = norms[i as usize] * norms[j as usize];
            if denom == 0.0 {
                return None;
            }
            let sim = (dot / denom).clamp(0.0, 1.0);
            (sim > 0.0).then_some(((i, j), sim))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(terms: &[(&str, u32)]) -> TermCounts {
        terms
            .iter()
            .map(|(t, c)| (t.to_string(), *c))
            .collect()
    }

    #[test]
    fn fit_counts_document_frequencies() {
        let docs = vec![doc(&[("a", 1), ("b", 1)]), doc(&[("b", 1), ("c", 1)])];
        let vocab = Vocabulary::fit(&docs).unwrap();
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.df(vocab.index_of("b").unwrap()), 2);
        assert_eq!(vocab.df(vocab.index_of("a").unwrap()), 1);
        assert_eq!(vocab.df(vocab.index_of("c").unwrap()), 1);
        assert_eq!(vocab.n_docs(), 2);
    }

    #[test]
    fn fit_df_is_document_level() {
        let docs = vec![doc(&[("a", 5)])];
        let vocab = Vocabulary::fit(&docs).unwrap();
        assert_eq!(vocab.df(vocab.index_of("a").unwrap()), 1);
    }

    #[test]
    fn fit_rejects_empty_list() {
        assert!(matches!(
            Vocabulary::fit(&[]),
            Err(VectorizerError::EmptyDocumentList)
        ));
    }

    #[test]
    fn transform_matches_hand_computation() {
        // docs [{a,a,b},{b}]: weight(a in doc0) = 2·ln(2), weight(b) = 0
        let docs = vec![doc(&[("a", 2), ("b", 1)]), doc(&[("b", 1)])];
        let vocab = Vocabulary::fit(&docs).unwrap();
        let v0 = transform_tfidf(&docs[0], &vocab);
        assert_eq!(v0.len(), 1, "b has df=n and must be dropped");
        let (index, weight) = v0.entries()[0];
        assert_eq!(index, vocab.index_of("a").unwrap());
        assert!((weight - 2.0 * 2.0_f64.ln()).abs() < 1e-12);
        assert!((weight - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn transform_ignores_out_of_vocabulary_terms() {
        let docs = vec![doc(&[("a", 1)]), doc(&[("b", 1)])];
        let vocab = Vocabulary::fit(&docs).unwrap();
        let v = transform_tfidf(&doc(&[("a", 1), ("zzz", 7)]), &vocab);
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn transform_empty_doc_is_empty_vector() {
        let docs = vec![doc(&[("a", 1)]), doc(&[("b", 1)])];
        let vocab = Vocabulary::fit(&docs).unwrap();
        assert!(transform_tfidf(&doc(&[]), &vocab).is_empty());
    }

    #[test]
    fn cosine_of_identical_vectors_is_one() {
        let v = SparseVector::new(vec![(0, 1.5), (3, 2.0)]);
        assert!((cosine_similarity(&v, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_disjoint_supports_is_zero() {
        let u = SparseVector::new(vec![(0, 1.0)]);
        let v = SparseVector::new(vec![(1, 1.0)]);
        assert_eq!(cosine_similarity(&u, &v), 0.0);
    }

    #[test]
    fn cosine_hand_example() {
        let u = SparseVector::new(vec![(0, 1.0), (1, 1.0)]);
        let v = SparseVector::new(vec![(0, 1.0)]);
        assert!((cosine_similarity(&u, &v) - 1.0 / 2.0_f64.sqrt()).abs() < 1e-12);
        assert!((cosine_similarity(&u, &v) - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn cosine_zero_norm_is_zero() {
        let z = SparseVector::default();
        let v = SparseVector::new(vec![(0, 1.0)]);
        assert_eq!(cosine_similarity(&z, &v), 0.0);
        assert_eq!(cosine_similarity(&z, &z), 0.0);
    }

    #[test]
    fn pairwise_single_vector_is_empty() {
        let vectors = vec![SparseVector::new(vec![(0, 1.0)])];
        assert!(pairwise_similarities(&vectors).is_empty());
    }

    #[test]
    fn pairwise_matches_per_pair_calls() {
        let vectors = vec![
            SparseVector::new(vec![(0, 1.0), (2, 2.0)]),
            SparseVector::new(vec![(0, 3.0), (1, 1.0)]),
            SparseVector::new(vec![(1, 1.0), (2, 1.0)]),
        ];
        let pairs = pairwise_similarities(&vectors);
        for i in 0..vectors.len() {
            for j in (i + 1)..vectors.len() {
                let direct = cosine_similarity(&vectors[i], &vectors[j]);
                let indexed = pairs.get(&(i as u32, j as u32)).copied().unwrap_or(0.0);
                assert_eq!(direct, indexed, "pair ({i},{j})");
            }
        }
    }

    #[test]
    fn sparse_vector_drops_explicit_zeros() {
        let v = SparseVector::new(vec![(0, 0.0), (1, 2.0)]);
        assert_eq!(v.entries(), &[(1, 2.0)]);
    }

    fn arbitrary_vector() -> impl Strategy<Value = SparseVector> {
        proptest::collection::btree_map(0u32..40, 0.0f64..5.0, 0..12)
            .prop_map(|m| SparseVector::new(m.into_iter().collect()))
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric(u in arbitrary_vector(), v in arbitrary_vector()) {
            prop_assert_eq!(
                cosine_similarity(&u, &v).to_bits(),
                cosine_similarity(&v, &u).to_bits()
            );
        }

        #[test]
        fn cosine_stays_in_unit_interval(u in arbitrary_vector(), v in arbitrary_vector()) {
            let sim = cosine_similarity(&u, &v);
            prop_assert!((0.0..=1.0).contains(&sim));
        }

        #[test]
        fn cosine_is_scale_invariant(u in arbitrary_vector(), v in arbitrary_vector(), alpha in 0.01f64..100.0) {
            let scaled = SparseVector::new(
                u.entries().iter().map(|&(i, w)| (i, w * alpha)).collect()
            );
            let lhs = cosine_similarity(&scaled, &v);
            let rhs = cosine_similarity(&u, &v);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn pairwise_equals_naive_path(
            vectors in proptest::collection::vec(arbitrary_vector(), 2..15)
        ) {
            let pairs = pairwise_similarities(&vectors);
            for i in 0..vectors.len() {
                for j in (i + 1)..vectors.len() {
                    let direct = cosine_similarity(&vectors[i], &vectors[j]);
                    let indexed = pairs.get(&(i as u32, j as u32)).copied().unwrap_or(0.0);
                    prop_assert!((direct - indexed).abs() <= 1e-9);
                }
            }
        }
    }
}
