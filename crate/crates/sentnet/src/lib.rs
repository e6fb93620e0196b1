//! Sentence-network text labeling toolkit.
//!
//! Clusters sentences by building TF-IDF cosine-similarity graphs, detects
//! communities with greedy modularity maximization, scores the detected
//! labeling against reference classes with class-split / class-merge
//! metrics, and trains classifiers on either labeling.
//!
//! The crate is organized along the pipeline stages:
//!
//! * [`corpus`] — loading, validating and splitting sentence datasets
//! * [`textprep`] — tokenizing, stemming, synonym and bigram expansion
//! * [`vectorizer`] — vocabulary fitting, TF-IDF vectors, cosine similarity
//! * [`simgraph`] — thresholded sentence networks and their structure
//! * [`louvain`] — community detection by modularity maximization
//! * [`classmap`] — community-vs-class contingency, split/merge scores,
//!   threshold sweeps and ambiguity reports
//! * [`classify`] — linear SVM and random forest on sparse features
//! * [`synth`] — synthetic topic corpora for verification
//! * [`pipeline`] — the end-to-end run, from config to report files

pub mod classify;
pub mod classmap;
pub mod corpus;
pub mod louvain;
pub mod pipeline;
pub mod simgraph;
pub mod synth;
pub mod textprep;
pub mod vectorizer;

pub use corpus::{AnswerKey, Corpus, CorpusFormat, Sentence};
pub use louvain::{LouvainConfig, Partition};
pub use simgraph::SentenceGraph;
pub use textprep::PreprocessConfig;
pub use vectorizer::{SparseVector, Vocabulary};
