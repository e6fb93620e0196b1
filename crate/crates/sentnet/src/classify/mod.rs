//! Multiclass classifiers over TF-IDF vectors, plus hit-ratio evaluation.
//!
//! Two model families: a one-vs-rest linear SVM trained by stochastic
//! subgradient descent, and a random forest of CART trees. Evaluation
//! supports plain label matching and message-level scoring, where community
//! labels are first resolved to reference classes by a majority map and both
//! sides are then compared through an answer key.

mod forest;
mod svm;

pub use forest::{train_random_forest, ForestConfig, RandomForestModel};
pub use svm::{train_linear_svm, LinearSvmModel, SvmConfig};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AnswerKey;
use crate::vectorizer::SparseVector;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training data is empty")]
    EmptyTrainSet,
    #[error("training data has the single class {0:?}; need at least 2")]
    SingleClass(String),
    #[error("have {vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("predicted label {0:?} is not in the community-to-class map")]
    UnmappableLabel(String),
    #[error("label {0:?} is missing from the answer key")]
    MissingFromKey(String),
    #[error("model io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

/// splitmix64 finalizer; bijective, so distinct inputs give distinct seeds.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for stream `index` under a master seed.
pub(crate) fn stream_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub trait Classifier {
    fn predict(&self, doc: &SparseVector) -> &str;
    fn classes(&self) -> &[String];
}

/// Either model family, as stored in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Svm(LinearSvmModel),
    Forest(RandomForestModel),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Svm(_) => "svm",
            TrainedModel::Forest(_) => "forest",
        }
    }
}

impl Classifier for TrainedModel {
    fn predict(&self, doc: &SparseVector) -> &str {
        match self {
            TrainedModel::Svm(m) => m.predict(doc),
            TrainedModel::Forest(m) => m.predict(doc),
        }
    }

    fn classes(&self) -> &[String] {
        match self {
            TrainedModel::Svm(m) => m.classes(),
            TrainedModel::Forest(m) => m.classes(),
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    vocab_hash: u64,
    /// What kind of labels the model was trained on ("human" or
    /// "community") — evaluation must resolve predictions accordingly.
    label_source: String,
    model: TrainedModel,
}

/// Writes a model as JSON, embedding the fitting vocabulary's content hash
/// and the label source it was trained on.
pub fn save_model(
    path: &Path,
    model: &TrainedModel,
    vocab_hash: u64,
    label_source: &str,
) -> Result<(), ClassifyError> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        vocab_hash,
        label_source: label_source.to_string(),
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| ClassifyError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    fs::write(path, json + "\n").map_err(|e| ClassifyError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads a model written by [`save_model`]; returns it with the stored
/// vocabulary hash (so callers can reject mismatched feature spaces) and
/// the recorded label source.
pub fn load_model(path: &Path) -> Result<(TrainedModel, u64, String), ClassifyError> {
    let text = fs::read_to_string(path).map_err(|e| ClassifyError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| ClassifyError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(ClassifyError::Format {
            path: path.to_path_buf(),
            reason: format!(
                "unsupported format version {} (expected {})",
                file.format_version, MODEL_FORMAT_VERSION
            ),
        });
    }
    Ok((file.model, file.vocab_hash, file.label_source))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    /// Keyed by the true label as given in the test set.
    pub per_class: BTreeMap<String, ClassCount>,
}

/// Scores `model` on a labeled test set.
///
/// Without a key, a hit is an exact label match. With a key, the predicted
/// label is first resolved through `label_to_class` when provided (community
/// labels → reference classes), then both the resolved prediction and the
/// true label are mapped to message ids; a hit is equal message ids.
pub fn evaluate<C: Classifier + ?Sized>(
    model: &C,
    test: &[SparseVector],
    labels: &[String],
    key: Option<&AnswerKey>,
    label_to_class: Option<&BTreeMap<String, String>>,
) -> Result<EvalResult, ClassifyError> {
    if test.is_empty() {
        return Err(ClassifyError::EmptyTestSet);
    }
    if test.len() != labels.len() {
        return Err(ClassifyError::LengthMismatch {
            vectors: test.len(),
            labels: labels.len(),
        });
    }

    let mut n_correct = 0;
    let mut per_class: BTreeMap<String, ClassCount> = BTreeMap::new();
    for (doc, truth) in test.iter().zip(labels) {
        let predicted = model.predict(doc);
        let hit = match key {
            None => predicted == truth,
            Some(key) => {
                let predicted_class = match label_to_class {
                    Some(map) => map
                        .get(predicted)
                        .ok_or_else(|| ClassifyError::UnmappableLabel(predicted.to_string()))?
                        .as_str(),
                    None => predicted,
                };
                let predicted_msg = key
                    .message_for(predicted_class)
                    .ok_or_else(|| ClassifyError::MissingFromKey(predicted_class.to_string()))?;
                let true_msg = key
                    .message_for(truth)
                    .ok_or_else(|| ClassifyError::MissingFromKey(truth.clone()))?;
                predicted_msg == true_msg
            }
        };
        let slot = per_class
            .entry(truth.clone())
            .or_insert(ClassCount { correct: 0, total: 0 });
        slot.total += 1;
        if hit {
            slot.correct += 1;
            n_correct += 1;
        }
    }

    Ok(EvalResult {
        accuracy: n_correct as f64 / test.len() as f64,
        n_correct,
        n_total: test.len(),
        per_class,
    })
}

/// Shared training-input validation; returns the sorted class list.
fn check_train_inputs(
    vectors: &[SparseVector],
    labels: &[String],
) -> Result<Vec<String>, ClassifyError> {
    if vectors.is_empty() {
        return Err(ClassifyError::EmptyTrainSet);
    }
    if vectors.len() != labels.len() {
        return Err(ClassifyError::LengthMismatch {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    let classes: std::collections::BTreeSet<&String> = labels.iter().collect();
    if classes.len() < 2 {
        return Err(ClassifyError::SingleClass(labels[0].clone()));
    }
    Ok(classes.into_iter().cloned().collect())
}
