//! Browser bindings for the demo page in `www/`.
//!
//! Three operations, each taking and returning plain strings so the page
//! needs no framework or codegen beyond `wasm-bindgen`:
//!
//! * [`synth_csv`] — generate a labeled synthetic corpus as CSV text.
//! * [`analyze_json`] — preprocess → TF-IDF → graph at a fixed θ →
//!   Louvain; returns nodes, edges, communities, and (when the corpus is
//!   labeled) split/merge scores plus mixed-community details.
//! * [`sweep_json`] — run the threshold sweep and return the normalized
//!   split/merge curves with the selected θ*.
//!
//! The string-level functions compile and run natively, so the logic is
//! unit-tested without a wasm toolchain; the `#[wasm_bindgen]` exports are
//! thin wrappers gated to `wasm32`.

use serde::Serialize;

use sentnet::classmap::{
    ambiguity_report, build_class_map, split_merge_scores, sweep_and_select,
};
use sentnet::corpus::{parse_corpus_csv, Corpus};
use sentnet::louvain::{louvain_detect, modularity, LouvainConfig};
use sentnet::pipeline::parse_grid;
use sentnet::simgraph::build_graph;
use sentnet::synth::generate_synthetic_corpus;
use sentnet::textprep::{preprocess_sentence, PreprocessConfig};
use sentnet::vectorizer::{pairwise_similarities, transform_tfidf, SparseVector, Vocabulary};

#[derive(Serialize)]
struct NodeOut<'a> {
    id: usize,
    text: &'a str,
    label: Option<&'a str>,
    community: u32,
}

#[derive(Serialize)]
struct EdgeOut {
    source: usize,
    target: usize,
    weight: f64,
}

#[derive(Serialize)]
struct MixedOut {
    community: u32,
    classes: Vec<String>,
    sentences: Vec<usize>,
}

#[derive(Serialize)]
struct AnalyzeOut<'a> {
    theta: f64,
    n_nodes: usize,
    n_edges: usize,
    k: usize,
    n_singletons: usize,
    modularity: f64,
    nodes: Vec<NodeOut<'a>>,
    edges: Vec<EdgeOut>,
    split_score: Option<f64>,
    merge_score: Option<f64>,
    mixed: Vec<MixedOut>,
}

#[derive(Serialize)]
struct SweepPointOut {
    theta: f64,
    k: usize,
    n_singletons: usize,
    split_score: f64,
    merge_score: f64,
    split_norm: f64,
    merge_norm: f64,
}

#[derive(Serialize)]
struct SweepOut {
    records: Vec<SweepPointOut>,
    theta_star: f64,
    selection: String,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Corpus CSV text → (corpus, tf-idf vectors). Label column optional.
fn vectorize(corpus_csv: &str) -> Result<(Corpus, Vec<SparseVector>), String> {
    let labeled = corpus_csv
        .lines()
        .next()
        .map(|h| h.contains("class"))
        .unwrap_or(false);
    let corpus = parse_corpus_csv(corpus_csv, labeled).map_err(err)?;
    let prep = PreprocessConfig::default();
    let docs: Vec<_> = corpus
        .sentences()
        .iter()
        .map(|s| preprocess_sentence(&s.raw_text, &prep))
        .collect();
    let vocab = Vocabulary::fit(&docs).map_err(err)?;
    let vectors = docs.iter().map(|d| transform_tfidf(d, &vocab)).collect();
    Ok((corpus, vectors))
}

/// Generates a labeled synthetic corpus and renders it as `sentence,class`
/// CSV — the same shape the analyze/sweep inputs expect.
pub fn synth_csv(
    topics: usize,
    per_topic: usize,
    vocab: usize,
    overlap: f64,
    seed: u64,
) -> Result<String, String> {
    let corpus = generate_synthetic_corpus(topics, per_topic, vocab, overlap, seed).map_err(err)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["sentence", "class"]).map_err(err)?;
    for s in corpus.sentences() {
        writer
            .write_record([s.raw_text.as_str(), s.label.as_deref().unwrap_or("")])
            .map_err(err)?;
    }
    let bytes = writer.into_inner().map_err(err)?;
    String::from_utf8(bytes).map_err(err)
}

/// Builds the sentence network at `theta`, detects communities, and returns
/// the whole picture as JSON for the canvas renderer.
pub fn analyze_json(corpus_csv: &str, theta: f64, louvain_seed: u64) -> Result<String, String> {
    let (corpus, vectors) = vectorize(corpus_csv)?;
    let pairs = pairwise_similarities(&vectors);
    let graph = build_graph(&pairs, corpus.len(), theta).map_err(err)?;
    let config = LouvainConfig {
        seed: louvain_seed,
        ..LouvainConfig::default()
    };
    let partition = louvain_detect(&graph, &config);

    let (split_score, merge_score, mixed) = if corpus.is_labeled() {
        let map = build_class_map(&partition, &corpus).map_err(err)?;
        let scores = split_merge_scores(&map);
        let mixed = ambiguity_report(&map, &corpus, &partition)
            .map_err(err)?
            .entries
            .into_iter()
            .map(|entry| MixedOut {
                community: entry.community,
                classes: entry.classes,
                sentences: entry.sentences.into_iter().map(|s| s.id).collect(),
            })
            .collect();
        (Some(scores.split_score), Some(scores.merge_score), mixed)
    } else {
        (None, None, Vec::new())
    };

    let nodes: Vec<NodeOut> = corpus
        .sentences()
        .iter()
        .map(|s| NodeOut {
            id: s.id,
            text: &s.raw_text,
            label: s.label.as_deref(),
            community: partition.community_of(s.id),
        })
        .collect();
    let edges: Vec<EdgeOut> = graph
        .edges()
        .iter()
        .map(|&(a, b, w)| EdgeOut {
            source: a as usize,
            target: b as usize,
            weight: w,
        })
        .collect();

    let out = AnalyzeOut {
        theta,
        n_nodes: corpus.len(),
        n_edges: edges.len(),
        k: partition.k(),
        n_singletons: partition.n_singletons(),
        modularity: modularity(&graph, &partition),
        nodes,
        edges,
        split_score,
        merge_score,
        mixed,
    };
    serde_json::to_string(&out).map_err(err)
}

/// Runs the threshold sweep over `grid_spec` (`start:stop:step` or a comma
/// list) and returns the records plus θ* as JSON. Requires a labeled corpus.
pub fn sweep_json(corpus_csv: &str, grid_spec: &str, louvain_seed: u64) -> Result<String, String> {
    let (corpus, vectors) = vectorize(corpus_csv)?;
    let grid = parse_grid(grid_spec)?;
    let pairs = pairwise_similarities(&vectors);
    let config = LouvainConfig {
        seed: louvain_seed,
        ..LouvainConfig::default()
    };
    let sweep = sweep_and_select(&pairs, &corpus, &grid, &config).map_err(err)?;
    let out = SweepOut {
        records: sweep
            .records
            .iter()
            .map(|r| SweepPointOut {
                theta: r.threshold,
                k: r.n_communities,
                n_singletons: r.n_singletons,
                split_score: r.split_score,
                merge_score: r.merge_score,
                split_norm: r.split_norm,
                merge_norm: r.merge_norm,
            })
            .collect(),
        theta_star: sweep.theta_star,
        selection: format!("{:?}", sweep.selection),
    };
    serde_json::to_string(&out).map_err(err)
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn synth(
        topics: usize,
        per_topic: usize,
        vocab: usize,
        overlap: f64,
        seed: u64,
    ) -> Result<String, JsError> {
        super::synth_csv(topics, per_topic, vocab, overlap, seed).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn analyze(corpus_csv: &str, theta: f64, louvain_seed: u64) -> Result<String, JsError> {
        super::analyze_json(corpus_csv, theta, louvain_seed).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn sweep(corpus_csv: &str, grid_spec: &str, louvain_seed: u64) -> Result<String, JsError> {
        super::sweep_json(corpus_csv, grid_spec, louvain_seed).map_err(|e| JsError::new(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_corpus() -> String {
        synth_csv(3, 12, 10, 0.1, 7).unwrap()
    }

    #[test]
    fn synth_emits_header_and_rows() {
        let csv = demo_corpus();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("sentence,class"));
        assert_eq!(lines.count(), 36);
    }

    #[test]
    fn analyze_reports_nodes_edges_and_scores() {
        let out = analyze_json(&demo_corpus(), 0.2, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["n_nodes"], 36);
        assert_eq!(v["nodes"].as_array().unwrap().len(), 36);
        assert!(v["k"].as_u64().unwrap() >= 1);
        assert!(v["split_score"].is_number());
        assert!(v["merge_score"].is_number());
        let edge = &v["edges"][0];
        assert!(edge["weight"].as_f64().unwrap() > 0.2);
    }

    #[test]
    fn analyze_without_labels_omits_scores() {
        let csv = demo_corpus();
        let unlabeled: String = csv
            .lines()
            .map(|l| l.split(',').next().unwrap())
            .collect::<Vec<_>>()
            .join("\n");
        let out = analyze_json(&unlabeled, 0.2, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["split_score"].is_null());
        assert!(v["mixed"].as_array().unwrap().is_empty());
    }

    #[test]
    fn sweep_returns_grid_and_interior_theta() {
        let out = sweep_json(&demo_corpus(), "0.0:0.7:0.1", 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["records"].as_array().unwrap().len(), 8);
        let theta = v["theta_star"].as_f64().unwrap();
        assert!((0.0..=0.7).contains(&theta));
    }

    #[test]
    fn bad_inputs_come_back_as_messages() {
        assert!(analyze_json("", 0.2, 0).is_err());
        assert!(analyze_json(&demo_corpus(), 1.5, 0).is_err());
        assert!(sweep_json(&demo_corpus(), "0.9:0.1:0.1", 0).is_err());
    }
}
