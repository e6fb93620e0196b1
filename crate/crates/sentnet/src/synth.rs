//! Synthetic topic corpora: a verification stand-in for private chatbot
//! data. Sentences draw pseudo-words from per-topic vocabularies plus a
//! shared pool, so topic structure (and its erosion via `overlap`) is fully
//! controlled.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{AnswerKey, Corpus};
use crate::textprep::{porter_stem, PreprocessConfig};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("need at least 2 topics, got {0}")]
    TooFewTopics(usize),
    #[error("need at least 5 sentences per topic, got {0}")]
    TooFewPerTopic(usize),
    #[error("need at least 4 words per topic vocabulary, got {0}")]
    TooSmallVocabulary(usize),
    #[error("overlap must lie in [0,1), got {0}")]
    InvalidOverlap(f64),
    #[error("corrupt fraction must lie in [0,1), got {0}")]
    InvalidFraction(f64),
    #[error("corpus must be labeled")]
    Unlabeled,
}

/// Builds pseudo-words as consonant-vowel syllable chains ("kilupa").
/// Vowels exclude `e` and `y` and every word ends in a vowel, so the
/// stemmer's suffix rules leave short words alone and stems stay distinct.
struct WordForge {
    used_stems: HashSet<String>,
    config: PreprocessConfig,
}

impl WordForge {
    fn new() -> Self {
        WordForge {
            used_stems: HashSet::new(),
            config: PreprocessConfig::default(),
        }
    }

    fn next_word(&mut self, rng: &mut ChaCha8Rng) -> String {
        const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
        const VOWELS: &[u8] = b"aiou";
        loop {
            let syllables = rng.gen_range(2..=3);
            let mut word = String::with_capacity(syllables * 2);
            for _ in 0..syllables {
                word.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
                word.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
            }
            let stem = porter_stem(&word);
            // Reject stopwords, anything the synonym lexicon knows, and
            // stem collisions with previously issued words.
            if self.config.stopword_set.contains(&word)
                || !self.config.lexicon.synonyms(&stem).is_empty()
                || self.used_stems.contains(&stem)
            {
                continue;
            }
            self.used_stems.insert(stem);
            return word;
        }
    }
}

/// Generates a labeled corpus of `k_topics * per_topic` sentences.
///
/// Every sentence is 4–10 words; each word comes from the shared pool with
/// probability `overlap`, otherwise from the sentence's topic pool. The
/// shared pool has `vocab_per_topic` words, like each topic. Labels are
/// `topic_0..topic_{k-1}`; the result is deterministic in `seed`.
pub fn generate_synthetic_corpus(
    k_topics: usize,
    per_topic: usize,
    vocab_per_topic: usize,
    overlap: f64,
    seed: u64,
) -> Result<Corpus, SynthError> {
    if k_topics < 2 {
        return Err(SynthError::TooFewTopics(k_topics));
    }
    if per_topic < 5 {
        return Err(SynthError::TooFewPerTopic(per_topic));
    }
    if vocab_per_topic < 4 {
        return Err(SynthError::TooSmallVocabulary(vocab_per_topic));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(SynthError::InvalidOverlap(overlap));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut forge = WordForge::new();
    let topic_pools: Vec<Vec<String>> = (0..k_topics)
        .map(|_| (0..vocab_per_topic).map(|_| forge.next_word(&mut rng)).collect())
        .collect();
    let shared_pool: Vec<String> = (0..vocab_per_topic)
        .map(|_| forge.next_word(&mut rng))
        .collect();

    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(k_topics * per_topic);
    for topic in 0..k_topics {
        let label = format!("topic_{topic}");
        for _ in 0..per_topic {
            // Regenerate on the (rare) duplicate sentence; the corpus type
            // rejects duplicates by contract.
            let text = loop {
                let length = rng.gen_range(4..=10);
                let words: Vec<&str> = (0..length)
                    .map(|_| {
                        let pool = if rng.gen::<f64>() < overlap {
                            &shared_pool
                        } else {
                            &topic_pools[topic]
                        };
                        pool[rng.gen_range(0..pool.len())].as_str()
                    })
                    .collect();
                let candidate = words.join(" ");
                if seen.insert(candidate.clone()) {
                    break candidate;
                }
            };
            pairs.push((text, Some(label.clone())));
        }
    }
    Ok(Corpus::from_pairs(pairs).expect("generator emits unique, non-empty sentences"))
}

/// Answer key mapping every class of `corpus` to a distinct message id.
pub fn synthetic_answer_key(corpus: &Corpus) -> AnswerKey {
    let map = corpus
        .classes()
        .iter()
        .map(|class| (class.clone(), format!("msg_{class}")))
        .collect();
    AnswerKey::new(map)
}

/// Reassigns a seeded `fraction` of the labels (round-half-up count) to a
/// different class, uniformly among the remaining classes. Returns the new
/// corpus and the affected sentence ids, sorted.
pub fn corrupt_labels(
    corpus: &Corpus,
    fraction: f64,
    seed: u64,
) -> Result<(Corpus, Vec<usize>), SynthError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(SynthError::InvalidFraction(fraction));
    }
    if !corpus.is_labeled() {
        return Err(SynthError::Unlabeled);
    }
    let n = corpus.len();
    let n_corrupt = (n as f64 * fraction + 0.5).floor() as usize;
    let classes: Vec<String> = corpus.classes().iter().cloned().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut victims: Vec<usize> = ids.into_iter().take(n_corrupt).collect();
    victims.sort_unstable();

    let mut labels: Vec<String> = corpus
        .sentences()
        .iter()
        .map(|s| s.label.clone().expect("labeled"))
        .collect();
    for &id in &victims {
        let current = labels[id].clone();
        let others: Vec<&String> = classes.iter().filter(|c| **c != current).collect();
        labels[id] = others[rng.gen_range(0..others.len())].clone();
    }
    Ok((corpus.with_labels(&labels), victims))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{preprocess_sentence, stem_tokens, tokenize_clean, StopwordSet};
    use crate::vectorizer::{cosine_similarity, transform_tfidf, Vocabulary};

    #[test]
    fn contract_sizes_and_labels() {
        let corpus = generate_synthetic_corpus(5, 100, 20, 0.1, 7).unwrap();
        assert_eq!(corpus.len(), 500);
        assert_eq!(corpus.classes().len(), 5);
        for sentence in corpus.sentences() {
            let words = sentence.raw_text.split(' ').count();
            assert!((4..=10).contains(&words), "{:?}", sentence.raw_text);
        }
    }

    #[test]
    fn same_seed_reproduces_corpus() {
        let a = generate_synthetic_corpus(3, 10, 8, 0.2, 11).unwrap();
        let b = generate_synthetic_corpus(3, 10, 8, 0.2, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_corpus(3, 10, 8, 0.2, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_overlap_keeps_topics_disjoint() {
        let corpus = generate_synthetic_corpus(3, 10, 10, 0.0, 3).unwrap();
        // word stems never cross topics
        let mut by_topic: Vec<HashSet<String>> = vec![HashSet::new(); 3];
        for sentence in corpus.sentences() {
            let topic: usize = sentence.label.as_ref().unwrap()[6..].parse().unwrap();
            let tokens = tokenize_clean(&sentence.raw_text, &StopwordSet::empty());
            by_topic[topic].extend(stem_tokens(&tokens));
        }
        for a in 0..3 {
            for b in (a + 1)..3 {
                assert!(by_topic[a].is_disjoint(&by_topic[b]), "topics {a} and {b} share stems");
            }
        }

        // ... so cross-topic sentence vectors are orthogonal
        let config = PreprocessConfig::default();
        let docs: Vec<_> = corpus
            .sentences()
            .iter()
            .map(|s| preprocess_sentence(&s.raw_text, &config))
            .collect();
        let vocab = Vocabulary::fit(&docs).unwrap();
        let first_of_topic1 = corpus
            .sentences()
            .iter()
            .position(|s| s.label.as_deref() == Some("topic_1"))
            .unwrap();
        let u = transform_tfidf(&docs[0], &vocab);
        let v = transform_tfidf(&docs[first_of_topic1], &vocab);
        assert_eq!(cosine_similarity(&u, &v), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            generate_synthetic_corpus(1, 10, 10, 0.1, 0),
            Err(SynthError::TooFewTopics(1))
        ));
        assert!(matches!(
            generate_synthetic_corpus(2, 4, 10, 0.1, 0),
            Err(SynthError::TooFewPerTopic(4))
        ));
        assert!(matches!(
            generate_synthetic_corpus(2, 10, 3, 0.1, 0),
            Err(SynthError::TooSmallVocabulary(3))
        ));
        assert!(matches!(
            generate_synthetic_corpus(2, 10, 10, 1.0, 0),
            Err(SynthError::InvalidOverlap(_))
        ));
    }

    #[test]
    fn answer_key_covers_all_classes() {
        let corpus = generate_synthetic_corpus(4, 5, 8, 0.0, 1).unwrap();
        let key = synthetic_answer_key(&corpus);
        key.validate_covers(&corpus).unwrap();
        assert_eq!(key.message_for("topic_2"), Some("msg_topic_2"));
    }

    #[test]
    fn corruption_flips_exactly_the_requested_share() {
        let corpus = generate_synthetic_corpus(4, 25, 10, 0.1, 5).unwrap();
        let (corrupted, victims) = corrupt_labels(&corpus, 0.05, 9).unwrap();
        assert_eq!(victims.len(), 5); // 100 × 0.05
        assert_eq!(corrupted.len(), corpus.len());
        for id in 0..corpus.len() {
            let before = corpus.sentences()[id].label.as_ref().unwrap();
            let after = corrupted.sentences()[id].label.as_ref().unwrap();
            if victims.contains(&id) {
                assert_ne!(before, after, "victim {id} kept its label");
            } else {
                assert_eq!(before, after, "non-victim {id} changed");
            }
        }

        let (again, victims_again) = corrupt_labels(&corpus, 0.05, 9).unwrap();
        assert_eq!(corrupted, again);
        assert_eq!(victims, victims_again);
    }
}
