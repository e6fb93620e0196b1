//! Sentence preprocessing: tokenization, stopword removal, stemming, and
//! synonym/bigram expansion into term multisets.

mod stem;

pub use stem::porter_stem;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Ordered lowercase tokens of one sentence.
pub type TokenSequence = Vec<String>;

/// Term multiset: term → occurrence count. Counts feed TF in the vectorizer.
pub type TermCounts = BTreeMap<String, u32>;

const DEFAULT_STOPWORDS: &str = include_str!("../../assets/stopwords_en.txt");
const DEFAULT_LEXICON: &str = include_str!("../../assets/synonyms_en.tsv");

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed lexicon line {line}: {reason}")]
    MalformedLexicon { line: usize, reason: String },
}

/// Lowercase stopword set, matched against raw tokens before stemming.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordSet {
    words: HashSet<String>,
}

impl StopwordSet {
    pub fn empty() -> Self {
        StopwordSet {
            words: HashSet::new(),
        }
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopwordSet {
            words: words
                .into_iter()
                .map(|w| w.as_ref().to_lowercase())
                .collect(),
        }
    }

    /// Parses the one-token-per-line format; `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopwordSet { words }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TextprepError> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopwordSet {
    /// The embedded English list.
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

/// Synonym table keyed by stemmed term; values are stemmed too.
///
/// Keys never map to themselves, and looking up an absent term yields an
/// empty slice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    map: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn empty() -> Self {
        SynonymLexicon::default()
    }

    /// Builds a lexicon from `(term, synonyms)` entries, stemming every term
    /// and dropping synonyms that collapse onto their own key.
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (term, synonyms) in entries {
            let key = porter_stem(&term.as_ref().to_lowercase());
            let slot = map.entry(key.clone()).or_default();
            for synonym in synonyms {
                let stemmed = porter_stem(&synonym.as_ref().to_lowercase());
                if stemmed != key && !slot.contains(&stemmed) {
                    slot.push(stemmed);
                }
            }
        }
        map.retain(|_, v| !v.is_empty());
        SynonymLexicon { map }
    }

    /// Parses the TSV format `term<TAB>syn1,syn2,...`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TextprepError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (term, rest) = line.split_once('\t').ok_or_else(|| {
                TextprepError::MalformedLexicon {
                    line: i + 1,
                    reason: "expected `term<TAB>syn1,syn2,...`".into(),
                }
            })?;
            let synonyms: Vec<&str> = rest
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            if term.trim().is_empty() {
                return Err(TextprepError::MalformedLexicon {
                    line: i + 1,
                    reason: "empty term".into(),
                });
            }
            entries.push((term.trim(), synonyms));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TextprepError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Synonyms of a stemmed term; empty for unknown terms.
    pub fn synonyms(&self, term: &str) -> &[String] {
        self.map.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Knobs for [`preprocess_sentence`].
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopword_set: StopwordSet,
    pub lexicon: SynonymLexicon,
    pub enable_synonyms: bool,
    pub enable_bigrams: bool,
}

impl Default for PreprocessConfig {
    /// Embedded stopwords and lexicon, with synonyms and bigrams on.
    fn default() -> Self {
        PreprocessConfig {
            stopword_set: StopwordSet::default(),
            lexicon: SynonymLexicon::parse(DEFAULT_LEXICON).expect("embedded lexicon parses"),
            enable_synonyms: true,
            enable_bigrams: true,
        }
    }
}

impl PreprocessConfig {
    /// No stopwords, no synonyms, no bigrams: tokenize + stem only.
    pub fn bare() -> Self {
        PreprocessConfig {
            stopword_set: StopwordSet::empty(),
            lexicon: SynonymLexicon::empty(),
            enable_synonyms: false,
            enable_bigrams: false,
        }
    }
}

/// Splits on non-alphanumeric boundaries, lowercases, and drops stopwords.
///
/// Punctuation and special characters vanish as separators; token order is
/// preserved. Digit-bearing and purely numeric tokens are kept.
pub fn tokenize_clean(raw_text: &str, stopword_set: &StopwordSet) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in raw_text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens.retain(|t| !stopword_set.contains(t));
    tokens
}

/// Stems every token, preserving order and length.
pub fn stem_tokens(tokens: &[String]) -> TokenSequence {
    tokens.iter().map(|t| porter_stem(t)).collect()
}

/// Expands a stemmed token sequence into a term multiset.
///
/// The output contains every input token; with synonyms enabled, each
/// token's lexicon synonyms; with bigrams enabled, each adjacent pair joined
/// by one space plus — when synonyms are also enabled — the bigrams formed
/// by substituting either position with each of its synonyms (one position
/// at a time, never both).
pub fn expand_terms(tokens: &[String], config: &PreprocessConfig) -> TermCounts {
    let mut counts = TermCounts::new();
    let mut add = |term: String| *counts.entry(term).or_insert(0) += 1;

    for token in tokens {
        add(token.clone());
    }
    if config.enable_synonyms {
        for token in tokens {
            for synonym in config.lexicon.synonyms(token) {
                add(synonym.clone());
            }
        }
    }
    if config.enable_bigrams {
        for pair in tokens.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            add(format!("{a} {b}"));
            if config.enable_synonyms {
                for sa in config.lexicon.synonyms(a) {
                    add(format!("{sa} {b}"));
                }
                for sb in config.lexicon.synonyms(b) {
                    add(format!("{a} {sb}"));
                }
            }
        }
    }
    counts
}

/// Full preprocessing of one raw sentence:
/// `expand_terms(stem_tokens(tokenize_clean(text)))`.
pub fn preprocess_sentence(raw_text: &str, config: &PreprocessConfig) -> TermCounts {
    let tokens = tokenize_clean(raw_text, &config.stopword_set);
    let stemmed = stem_tokens(&tokens);
    expand_terms(&stemmed, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn subway_lexicon() -> SynonymLexicon {
        SynonymLexicon::from_entries([("subway", vec!["tube", "underground", "metro"])])
    }

    #[test]
    fn tokenize_subway_sentence() {
        let stops = StopwordSet::default();
        let tokens = tokenize_clean("how can I get there if I'm taking a subway?", &stops);
        assert_eq!(tokens, toks(&["get", "taking", "subway"]));
    }

    #[test]
    fn tokenize_empty_and_symbol_only() {
        let stops = StopwordSet::default();
        assert!(tokenize_clean("", &stops).is_empty());
        assert!(tokenize_clean("?!... --- %%%", &stops).is_empty());
    }

    #[test]
    fn tokenize_binghamton() {
        let stops = StopwordSet::from_words(["to"]);
        let tokens = tokenize_clean("Go to Binghamton University!", &stops);
        assert_eq!(tokens, toks(&["go", "binghamton", "university"]));
    }

    #[test]
    fn tokenize_keeps_numeric_tokens() {
        let stops = StopwordSet::empty();
        assert_eq!(
            tokenize_clean("room 42, gate B7", &stops),
            toks(&["room", "42", "gate", "b7"])
        );
    }

    #[test]
    fn stem_tokens_examples() {
        assert_eq!(stem_tokens(&toks(&["taking"])), toks(&["take"]));
        assert_eq!(stem_tokens(&[]), Vec::<String>::new());
        assert_eq!(
            stem_tokens(&toks(&["playing", "parked"])),
            toks(&["play", "park"])
        );
    }

    #[test]
    fn expand_matches_published_example() {
        let config = PreprocessConfig {
            stopword_set: StopwordSet::empty(),
            lexicon: subway_lexicon(),
            enable_synonyms: true,
            enable_bigrams: true,
        };
        let counts = expand_terms(&toks(&["get", "take", "subway"]), &config);
        let support: Vec<&str> = counts.keys().map(String::as_str).collect();
        for expected in [
            "get",
            "take",
            "subway",
            "tube",
            "underground",
            "metro",
            "take metro",
            "get take",
            "take subway",
            "take underground",
        ] {
            assert!(support.contains(&expected), "missing {expected:?}");
        }
        // Exact support under the substitution rule.
        let mut want = vec![
            "get",
            "take",
            "subway",
            "tube",
            "underground",
            "metro",
            "get take",
            "take subway",
            "take tube",
            "take underground",
            "take metro",
        ];
        want.sort_unstable();
        assert_eq!(support, want);
    }

    #[test]
    fn expand_trivial_cases() {
        let config = PreprocessConfig {
            stopword_set: StopwordSet::empty(),
            lexicon: SynonymLexicon::empty(),
            enable_synonyms: true,
            enable_bigrams: true,
        };
        assert!(expand_terms(&[], &config).is_empty());
        let counts = expand_terms(&toks(&["a", "b"]), &config);
        let want: TermCounts = [("a", 1), ("b", 1), ("a b", 1)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(counts, want);
    }

    #[test]
    fn expand_counts_repeats() {
        let config = PreprocessConfig {
            stopword_set: StopwordSet::empty(),
            lexicon: SynonymLexicon::empty(),
            enable_synonyms: false,
            enable_bigrams: true,
        };
        let counts = expand_terms(&toks(&["park", "park"]), &config);
        assert_eq!(counts.get("park"), Some(&2));
        assert_eq!(counts.get("park park"), Some(&1));
    }

    #[test]
    fn preprocess_subway_superset() {
        let config = PreprocessConfig::default();
        let counts = preprocess_sentence("how can I get there if I'm taking a subway?", &config);
        for expected in [
            "get",
            "take",
            "subway",
            "tube",
            "underground",
            "metro",
            "take metro",
            "get take",
            "take subway",
            "take underground",
        ] {
            assert!(counts.contains_key(expected), "missing {expected:?}");
        }
    }

    #[test]
    fn preprocess_all_stopwords_is_empty() {
        let config = PreprocessConfig::default();
        assert!(preprocess_sentence("is it? I am. To be!", &config).is_empty());
    }

    #[test]
    fn preprocess_equals_manual_chain() {
        let config = PreprocessConfig::default();
        for text in [
            "Where can I park my car?",
            "Any movies playing tonight?",
            "I'd like to buy two tickets, please.",
            "What is the price of a large popcorn?",
        ] {
            let tokens = tokenize_clean(text, &config.stopword_set);
            let manual = expand_terms(&stem_tokens(&tokens), &config);
            assert_eq!(preprocess_sentence(text, &config), manual, "{text:?}");
        }
    }

    #[test]
    fn lexicon_drops_self_maps_and_stems_entries() {
        let lex = SynonymLexicon::parse("take\ttaking,get\nmovies\tfilm , cinema\n").unwrap();
        assert_eq!(lex.synonyms("take"), ["get"]); // stem(taking)=take dropped
        assert_eq!(lex.synonyms("movi"), ["film", "cinema"]);
        assert!(lex.synonyms("absent").is_empty());
    }

    #[test]
    fn lexicon_rejects_tabless_line() {
        match SynonymLexicon::parse("movie film,cinema\n") {
            Err(TextprepError::MalformedLexicon { line: 1, .. }) => {}
            other => panic!("expected MalformedLexicon, got {other:?}"),
        }
    }

    #[test]
    fn stopword_file_parsing_skips_comments() {
        let set = StopwordSet::parse("# header\nthe\n\n  A\n# tail\n");
        assert_eq!(set.len(), 2);
        assert!(set.contains("the"));
        assert!(set.contains("a"));
    }

    #[test]
    fn default_assets_load() {
        let config = PreprocessConfig::default();
        assert!(config.stopword_set.len() > 100);
        assert!(config.lexicon.len() >= 10);
        assert_eq!(config.lexicon.synonyms("subway"), ["tube", "underground", "metro"]);
    }

    proptest! {
        // Cleaning a joined clean sequence is a no-op.
        #[test]
        fn cleaning_is_idempotent(words in proptest::collection::vec("[a-z]{1,8}", 0..12)) {
            let stops = StopwordSet::default();
            let first = tokenize_clean(&words.join(" "), &stops);
            let again = tokenize_clean(&first.join(" "), &stops);
            prop_assert_eq!(first, again);
        }

        // Expansion output always contains its input tokens.
        #[test]
        fn expansion_is_monotone(words in proptest::collection::vec("[a-z]{1,8}", 0..10)) {
            let config = PreprocessConfig::default();
            let stemmed = stem_tokens(&words);
            let counts = expand_terms(&stemmed, &config);
            for token in &stemmed {
                prop_assert!(counts.contains_key(token), "missing {}", token);
            }
        }

        // Identical (text, config) gives identical multisets.
        #[test]
        fn preprocessing_is_deterministic(text in "[ a-zA-Z0-9,!?.']{0,60}") {
            let config = PreprocessConfig::default();
            prop_assert_eq!(
                preprocess_sentence(&text, &config),
                preprocess_sentence(&text, &config)
            );
        }
    }
}
