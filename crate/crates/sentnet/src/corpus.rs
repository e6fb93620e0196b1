//! Sentence datasets: loading, validation, serialization and train/test splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One sentence of the dataset, with an optional reference class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    /// Dense 0-based index in corpus order.
    pub id: usize,
    pub raw_text: String,
    pub label: Option<String>,
}

/// An ordered, duplicate-free collection of sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    classes: BTreeSet<String>,
}

/// Dataset file formats understood by [`load_corpus`] and [`save_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// RFC-4180 CSV with header `sentence[,class]`.
    Csv,
    /// One JSON object per line with keys `sentence[, class]`.
    Jsonl,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file not found: {0}")]
    MissingFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("duplicate sentence at line {line}: {text:?}")]
    DuplicateSentence { line: usize, text: String },
    #[error("train ratio must be in (0,1), got {0}")]
    InvalidRatio(f64),
    #[error("stratified split requires a fully labeled corpus")]
    StratifiedUnlabeled,
    #[error("class `{0}` has fewer than 2 sentences; cannot stratify")]
    ClassTooSmall(String),
    #[error("answer key does not cover class `{0}`")]
    UncoveredClass(String),
}

impl Corpus {
    /// Builds a corpus from `(text, label)` pairs, assigning dense ids in order.
    ///
    /// Rejects blank texts and duplicate texts.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (S, Option<S>)>,
        S: Into<String>,
    {
        Self::from_numbered_pairs(
            pairs
                .into_iter()
                .enumerate()
                .map(|(i, (text, label))| (i + 1, text.into(), label.map(Into::into))),
        )
    }

    /// As [`from_pairs`](Self::from_pairs), but error positions use the
    /// caller's line numbers (file loaders pass real file lines).
    fn from_numbered_pairs<I>(pairs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (usize, String, Option<String>)>,
    {
        let mut sentences = Vec::new();
        let mut seen = HashSet::new();
        for (id, (line, text, label)) in pairs.into_iter().enumerate() {
            if text.trim().is_empty() {
                return Err(CorpusError::MalformedRow {
                    line,
                    reason: "empty sentence".into(),
                });
            }
            if !seen.insert(text.clone()) {
                return Err(CorpusError::DuplicateSentence { line, text });
            }
            if let Some(l) = &label {
                if l.trim().is_empty() {
                    return Err(CorpusError::MalformedRow {
                        line,
                        reason: "empty class".into(),
                    });
                }
            }
            sentences.push(Sentence {
                id,
                raw_text: text,
                label,
            });
        }
        if sentences.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let classes = sentences
            .iter()
            .filter_map(|s| s.label.clone())
            .collect::<BTreeSet<_>>();
        Ok(Corpus { sentences, classes })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    /// Distinct label strings present in the corpus.
    pub fn classes(&self) -> &BTreeSet<String> {
        &self.classes
    }

    /// True when every sentence carries a label.
    pub fn is_labeled(&self) -> bool {
        !self.sentences.is_empty() && self.sentences.iter().all(|s| s.label.is_some())
    }

    /// Sub-corpus of the given sentence ids, re-indexed densely in the given order.
    pub fn subset(&self, ids: &[usize]) -> Corpus {
        let sentences: Vec<Sentence> = ids
            .iter()
            .enumerate()
            .map(|(new_id, &old_id)| {
                let s = &self.sentences[old_id];
                Sentence {
                    id: new_id,
                    raw_text: s.raw_text.clone(),
                    label: s.label.clone(),
                }
            })
            .collect();
        let classes = sentences
            .iter()
            .filter_map(|s| s.label.clone())
            .collect::<BTreeSet<_>>();
        Corpus { sentences, classes }
    }

    /// Copy of this corpus with every label replaced by `labels[id]`.
    pub fn with_labels(&self, labels: &[String]) -> Corpus {
        assert_eq!(labels.len(), self.len(), "one label per sentence required");
        let sentences: Vec<Sentence> = self
            .sentences
            .iter()
            .map(|s| Sentence {
                id: s.id,
                raw_text: s.raw_text.clone(),
                label: Some(labels[s.id].clone()),
            })
            .collect();
        let classes = labels.iter().cloned().collect();
        Corpus { sentences, classes }
    }
}

#[derive(Deserialize, Serialize)]
struct JsonlRecord<'a> {
    sentence: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<&'a str>,
}

/// Loads a corpus from `path`.
///
/// With `labeled = true` the `class` column/key is required; with
/// `labeled = false` any class data in the file is dropped.
pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    labeled: bool,
) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(CorpusError::MissingFile(path.display().to_string()));
    }
    match format {
        CorpusFormat::Csv => load_csv(path, labeled),
        CorpusFormat::Jsonl => load_jsonl(path, labeled),
    }
}

fn load_csv(path: &Path, labeled: bool) -> Result<Corpus, CorpusError> {
    parse_csv_reader(File::open(path)?, labeled)
}

/// Parses CSV corpus text already in memory; same conventions as the file
/// loader (header row, `sentence` column, optional `class` column).
pub fn parse_corpus_csv(text: &str, labeled: bool) -> Result<Corpus, CorpusError> {
    parse_csv_reader(text.as_bytes(), labeled)
}

fn parse_csv_reader<R: std::io::Read>(input: R, labeled: bool) -> Result<Corpus, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(_) => return Err(CorpusError::EmptyCorpus),
    };
    let cols: Vec<&str> = headers.iter().collect();
    let sentence_col = cols
        .iter()
        .position(|c| *c == "sentence")
        .ok_or_else(|| CorpusError::MissingColumn("sentence".into()))?;
    let class_col = cols.iter().position(|c| *c == "class");
    if labeled && class_col.is_none() {
        return Err(CorpusError::MissingColumn("class".into()));
    }
    if cols.len() > 1 + class_col.map(|_| 1).unwrap_or(0) {
        return Err(CorpusError::MalformedRow {
            line: 1,
            reason: format!("unexpected header columns {cols:?}"),
        });
    }

    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| CorpusError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        let text = record.get(sentence_col).unwrap_or("").to_string();
        let label = if labeled {
            Some(record.get(class_col.unwrap()).unwrap_or("").to_string())
        } else {
            None
        };
        pairs.push((line, text, label));
    }
    from_file_pairs(pairs)
}

fn load_jsonl(path: &Path, labeled: bool) -> Result<Corpus, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
                line: line_no,
                reason: e.to_string(),
            })?;
        let label = if labeled {
            match record.class {
                Some(c) => Some(c.to_string()),
                None => {
                    return Err(CorpusError::MalformedRow {
                        line: line_no,
                        reason: "missing `class` key".into(),
                    })
                }
            }
        } else {
            None
        };
        pairs.push((line_no, record.sentence.to_string(), label));
    }
    from_file_pairs(pairs)
}

// Validation failures carry real file line numbers (headers, blank lines).
fn from_file_pairs(pairs: Vec<(usize, String, Option<String>)>) -> Result<Corpus, CorpusError> {
    if pairs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Corpus::from_numbered_pairs(pairs)
}

/// Writes a corpus back to disk; `load_corpus` of the result reproduces the
/// same `(text, label)` pairs.
pub fn save_corpus(
    corpus: &Corpus,
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    let labeled = corpus.is_labeled();
    match format {
        CorpusFormat::Csv => {
            let mut writer = csv::Writer::from_path(path.as_ref())?;
            if labeled {
                writer.write_record(["sentence", "class"])?;
                for s in corpus.sentences() {
                    writer.write_record([s.raw_text.as_str(), s.label.as_deref().unwrap()])?;
                }
            } else {
                writer.write_record(["sentence"])?;
                for s in corpus.sentences() {
                    writer.write_record([s.raw_text.as_str()])?;
                }
            }
            writer.flush()?;
        }
        CorpusFormat::Jsonl => {
            let mut file = File::create(path.as_ref())?;
            for s in corpus.sentences() {
                let record = JsonlRecord {
                    sentence: &s.raw_text,
                    class: s.label.as_deref(),
                };
                let json = serde_json::to_string(&record).expect("serializable record");
                writeln!(file, "{json}")?;
            }
            file.flush()?;
        }
    }
    Ok(())
}

/// Train size under the round-half-up rule.
fn train_size(n: usize, ratio: f64) -> usize {
    (n as f64 * ratio + 0.5).floor() as usize
}

/// Picks train/test sentence ids.
///
/// Both id lists come back sorted ascending, so corpus order is preserved
/// inside each part. Stratified splits hold every class's train share within
/// one sentence of `n_class * ratio` (largest-remainder apportionment).
pub fn split_indices(
    corpus: &Corpus,
    train_ratio: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>), CorpusError> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(train_ratio));
    }
    let n = corpus.len();
    let target = train_size(n, train_ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut train: Vec<usize>;
    if stratified {
        if !corpus.is_labeled() {
            return Err(CorpusError::StratifiedUnlabeled);
        }
        let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for s in corpus.sentences() {
            by_class
                .entry(s.label.as_deref().unwrap())
                .or_default()
                .push(s.id);
        }
        for (class, members) in &by_class {
            if members.len() < 2 {
                return Err(CorpusError::ClassTooSmall((*class).to_string()));
            }
        }
        // Largest-remainder apportionment of the train quota across classes.
        let mut quotas: Vec<(&str, usize, f64)> = by_class
            .iter()
            .map(|(class, members)| {
                let exact = members.len() as f64 * train_ratio;
                (*class, exact.floor() as usize, exact - exact.floor())
            })
            .collect();
        let mut assigned: usize = quotas.iter().map(|q| q.1).sum();
        quotas.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(b.0)));
        let mut extra: BTreeMap<&str, usize> = BTreeMap::new();
        for (class, _, _) in &quotas {
            if assigned >= target {
                break;
            }
            extra.insert(class, 1);
            assigned += 1;
        }
        train = Vec::with_capacity(target);
        for (class, members) in &by_class {
            let base = quotas.iter().find(|q| q.0 == *class).unwrap().1;
            let take = base + extra.get(class).copied().unwrap_or(0);
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            train.extend(shuffled.into_iter().take(take));
        }
    } else {
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut rng);
        train = ids.into_iter().take(target).collect();
    }

    train.sort_unstable();
    let train_set: HashSet<usize> = train.iter().copied().collect();
    let test: Vec<usize> = (0..n).filter(|i| !train_set.contains(i)).collect();
    Ok((train, test))
}

/// Splits a corpus into disjoint, exhaustive train/test parts.
pub fn split_train_test(
    corpus: &Corpus,
    train_ratio: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Corpus, Corpus), CorpusError> {
    let (train_ids, test_ids) = split_indices(corpus, train_ratio, seed, stratified)?;
    Ok((corpus.subset(&train_ids), corpus.subset(&test_ids)))
}

/// Mapping from class name to the chatbot response message shown for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKey {
    map: BTreeMap<String, String>,
}

impl AnswerKey {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        AnswerKey { map }
    }

    /// Loads a key from CSV with header `class,message_id`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(CorpusError::MissingFile(path.display().to_string()));
        }
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers().map_err(|_| CorpusError::EmptyCorpus)?;
        let cols: Vec<&str> = headers.iter().collect();
        if cols != ["class", "message_id"] {
            return Err(CorpusError::MissingColumn("class,message_id".into()));
        }
        let mut map = BTreeMap::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CorpusError::MalformedRow {
                line: i + 2,
                reason: e.to_string(),
            })?;
            map.insert(
                record.get(0).unwrap_or("").to_string(),
                record.get(1).unwrap_or("").to_string(),
            );
        }
        Ok(AnswerKey { map })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let mut writer = csv::Writer::from_path(path.as_ref())?;
        writer.write_record(["class", "message_id"])?;
        for (class, message) in &self.map {
            writer.write_record([class.as_str(), message.as_str()])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn message_for(&self, class: &str) -> Option<&str> {
        self.map.get(class).map(String::as_str)
    }

    /// Checks the key is total over the corpus's classes.
    pub fn validate_covers(&self, corpus: &Corpus) -> Result<(), CorpusError> {
        for class in corpus.classes() {
            if !self.map.contains_key(class) {
                return Err(CorpusError::UncoveredClass(class.clone()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn labeled(pairs: &[(&str, &str)]) -> Corpus {
        Corpus::from_pairs(pairs.iter().map(|(t, l)| (*t, Some(*l)))).unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_row_csv_with_two_classes() {
        let f = write_temp("sentence,class\nwhere to park,parking\nany movies on,movies\nis parking free,parking\n");
        let corpus = load_corpus(f.path(), CorpusFormat::Csv, true).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.classes().len(), 2);
        assert_eq!(corpus.sentences()[1].label.as_deref(), Some("movies"));
        assert_eq!(corpus.sentences()[2].id, 2);
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_temp("sentence,class\n");
        match load_corpus(f.path(), CorpusFormat::Csv, true) {
            Err(CorpusError::EmptyCorpus) => {}
            other => panic!("expected EmptyCorpus, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_distinct_error() {
        match load_corpus("/nonexistent/nope.csv", CorpusFormat::Csv, true) {
            Err(CorpusError::MissingFile(_)) => {}
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_sentence_rejected() {
        let f = write_temp("sentence,class\nhello there,a\nhello there,b\n");
        match load_corpus(f.path(), CorpusFormat::Csv, true) {
            Err(CorpusError::DuplicateSentence { line: 3, .. }) => {}
            other => panic!("expected DuplicateSentence, got {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_rejected() {
        let f = write_temp("sentence,class\nonly-one-field\n");
        match load_corpus(f.path(), CorpusFormat::Csv, true) {
            Err(CorpusError::MalformedRow { line: 2, .. }) => {}
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn labeled_csv_requires_class_column() {
        let f = write_temp("sentence\nhello there\n");
        match load_corpus(f.path(), CorpusFormat::Csv, true) {
            Err(CorpusError::MissingColumn(c)) => assert_eq!(c, "class"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn unlabeled_load_drops_class_column() {
        let f = write_temp("sentence,class\nwhere to park,parking\n");
        let corpus = load_corpus(f.path(), CorpusFormat::Csv, false).unwrap();
        assert!(corpus.sentences()[0].label.is_none());
        assert!(corpus.classes().is_empty());
    }

    #[test]
    fn jsonl_round_trip_is_identity() {
        let corpus = labeled(&[("take the subway", "transit"), ("park the car", "parking")]);
        let dir = tempfile::tempdir().unwrap();
        for format in [CorpusFormat::Csv, CorpusFormat::Jsonl] {
            let path = dir.path().join("corpus.out");
            save_corpus(&corpus, &path, format).unwrap();
            let reloaded = load_corpus(&path, format, true).unwrap();
            assert_eq!(corpus, reloaded);
        }
    }

    #[test]
    fn csv_quoting_survives_round_trip() {
        let corpus = labeled(&[("a \"quoted\", comma", "x"), ("line\ntwo", "y")]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quoted.csv");
        save_corpus(&corpus, &path, CorpusFormat::Csv).unwrap();
        let reloaded = load_corpus(&path, CorpusFormat::Csv, true).unwrap();
        assert_eq!(corpus, reloaded);
    }

    #[test]
    fn split_sizes_follow_round_half_up() {
        assert_eq!(train_size(100, 0.8), 80);
        assert_eq!(train_size(2212, 0.8), 1770);
        assert_eq!(train_size(5, 0.5), 3); // 2.5 rounds up
    }

    #[test]
    fn split_is_disjoint_exhaustive_and_deterministic() {
        let pairs: Vec<(String, Option<String>)> = (0..100)
            .map(|i| (format!("sentence number {i}"), Some(format!("c{}", i % 4))))
            .collect();
        let corpus = Corpus::from_pairs(pairs).unwrap();
        let (train, test) = split_indices(&corpus, 0.8, 7, false).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());

        let (train2, test2) = split_indices(&corpus, 0.8, 7, false).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);

        let (train3, _) = split_indices(&corpus, 0.8, 8, false).unwrap();
        assert_ne!(train, train3, "different seed should move the split");
    }

    #[test]
    fn stratified_split_keeps_class_proportions() {
        let pairs: Vec<(String, Option<String>)> = (0..90)
            .map(|i| {
                let class = if i < 60 { "big" } else { "small" };
                (format!("s{i}"), Some(class.to_string()))
            })
            .collect();
        let corpus = Corpus::from_pairs(pairs).unwrap();
        let (train, _) = split_indices(&corpus, 0.8, 3, true).unwrap();
        assert_eq!(train.len(), 72);
        let train_corpus = corpus.subset(&train);
        let big = train_corpus
            .sentences()
            .iter()
            .filter(|s| s.label.as_deref() == Some("big"))
            .count();
        // exact quota 48; largest-remainder keeps it within one
        assert!((big as i64 - 48).abs() <= 1, "big class got {big}");
    }

    #[test]
    fn stratified_split_rejects_tiny_class() {
        let corpus = labeled(&[("a b", "solo"), ("c d", "pair"), ("e f", "pair")]);
        match split_indices(&corpus, 0.8, 0, true) {
            Err(CorpusError::ClassTooSmall(c)) => assert_eq!(c, "solo"),
            other => panic!("expected ClassTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn answer_key_coverage() {
        let corpus = labeled(&[("a b", "x"), ("c d", "y")]);
        let mut map = BTreeMap::new();
        map.insert("x".to_string(), "msg1".to_string());
        let key = AnswerKey::new(map.clone());
        assert!(matches!(
            key.validate_covers(&corpus),
            Err(CorpusError::UncoveredClass(c)) if c == "y"
        ));
        map.insert("y".to_string(), "msg2".to_string());
        assert!(AnswerKey::new(map).validate_covers(&corpus).is_ok());
    }

    #[test]
    fn answer_key_csv_round_trip() {
        let mut map = BTreeMap::new();
        map.insert("transit".to_string(), "m_01".to_string());
        map.insert("parking".to_string(), "m_02".to_string());
        let key = AnswerKey::new(map);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("key.csv");
        key.save(&path).unwrap();
        assert_eq!(AnswerKey::load(&path).unwrap(), key);
    }
}
