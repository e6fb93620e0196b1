//! Full run: preprocess → vectorize → similarity network → threshold sweep →
//! community labeling → classifier comparison, with every artifact written
//! under one output directory. Any stage failure aborts with the stage name
//! and removes files written so far.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    evaluate, train_linear_svm, train_random_forest, Classifier, ForestConfig, SvmConfig,
};
use crate::classmap::{
    ambiguity_report, build_class_map, ClassMap, SweepRecord, SweepResult, ThetaSelection,
};
use crate::corpus::{load_corpus, split_indices, AnswerKey, Corpus, CorpusFormat};
use crate::louvain::{louvain_detect, modularity, LouvainConfig, Partition};
use crate::simgraph::build_graph;
use crate::textprep::{preprocess_sentence, PreprocessConfig, StopwordSet, SynonymLexicon};
use crate::vectorizer::{pairwise_similarities, transform_tfidf, SparseVector, Vocabulary};

type DynError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
#[error("stage {stage}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: DynError,
}

fn at<T, E: Into<DynError>>(stage: &'static str, result: Result<T, E>) -> Result<T, PipelineError> {
    result.map_err(|e| PipelineError {
        stage,
        source: e.into(),
    })
}

/// Everything a `run` needs. Paths default to the embedded stopword list
/// and synonym lexicon when unset; `theta` pins the threshold and skips
/// the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    pub corpus_format: CorpusFormat,
    pub labeled: bool,
    pub stopwords_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub answer_key_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub thresholds: Vec<f64>,
    pub theta: Option<f64>,
    pub train_ratio: f64,
    pub stratified: bool,
    pub enable_synonyms: bool,
    pub enable_bigrams: bool,
    pub split_seed: u64,
    pub louvain_seed: u64,
    pub model_seed: u64,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub forest_trees: usize,
    pub forest_max_depth: Option<usize>,
}

/// The default sweep grid, 0.0 to 0.9 in steps of 0.1.
pub fn default_grid() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

impl PipelineConfig {
    pub fn new(corpus_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            corpus_path: corpus_path.into(),
            corpus_format: CorpusFormat::Csv,
            labeled: true,
            stopwords_path: None,
            lexicon_path: None,
            answer_key_path: None,
            output_dir: output_dir.into(),
            thresholds: default_grid(),
            theta: None,
            train_ratio: 0.8,
            stratified: false,
            enable_synonyms: true,
            enable_bigrams: true,
            split_seed: 0,
            louvain_seed: 0,
            model_seed: 0,
            svm_lambda: 1e-4,
            svm_epochs: 20,
            forest_trees: 100,
            forest_max_depth: None,
        }
    }
}

/// One row of the Table-1-style comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub labeling: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub n_sentences: usize,
    pub n_classes: usize,
    pub vocabulary_size: usize,
    pub theta_star: f64,
    pub selection: Option<ThetaSelection>,
    pub n_edges: usize,
    pub n_communities: usize,
    pub n_singletons: usize,
    pub modularity: f64,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub sweep: Option<SweepResult>,
    pub evaluation: Option<Vec<EvalRow>>,
    pub partition: Partition,
    /// Files written, in write order.
    pub files: Vec<PathBuf>,
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), io::Error> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable artifact") + "\n"
}

/// Loads the corpus named by the config, then runs the pipeline on it.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    let corpus = at(
        "load-corpus",
        load_corpus(&config.corpus_path, config.corpus_format, config.labeled),
    )?;
    run_pipeline_on(&corpus, config)
}

/// Runs all stages on an in-memory corpus. On error, removes any files
/// already written to the output directory.
pub fn run_pipeline_on(corpus: &Corpus, config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    let mut out = Outputs {
        dir: config.output_dir.clone(),
        written: Vec::new(),
    };
    match run_inner(corpus, config, &mut out) {
        Ok(artifacts) => Ok(artifacts),
        Err(e) => {
            for path in &out.written {
                let _ = fs::remove_file(path);
            }
            Err(e)
        }
    }
}

fn run_inner(
    corpus: &Corpus,
    config: &PipelineConfig,
    out: &mut Outputs,
) -> Result<RunArtifacts, PipelineError> {
    at("output-dir", fs::create_dir_all(&config.output_dir))?;
    let mut notices: Vec<String> = Vec::new();

    // stage a: preprocess
    let stopwords = match &config.stopwords_path {
        Some(path) => at("preprocess", StopwordSet::from_file(path))?,
        None => StopwordSet::default(),
    };
    let lexicon = match &config.lexicon_path {
        Some(path) => at("preprocess", SynonymLexicon::from_file(path))?,
        None => SynonymLexicon::default(),
    };
    let prep = PreprocessConfig {
        stopword_set: stopwords,
        lexicon,
        enable_synonyms: config.enable_synonyms,
        enable_bigrams: config.enable_bigrams,
    };
    let docs: Vec<_> = corpus
        .sentences()
        .iter()
        .map(|s| preprocess_sentence(&s.raw_text, &prep))
        .collect();

    // stage b: vectorize
    let vocab = at("vectorize", Vocabulary::fit(&docs))?;
    let vectors: Vec<SparseVector> = docs.iter().map(|d| transform_tfidf(d, &vocab)).collect();
    let pairs = pairwise_similarities(&vectors);

    // stage c: pick the threshold — sweep when labels allow it
    let (theta_star, selection, sweep) = match (config.theta, corpus.is_labeled()) {
        (Some(theta), _) => {
            notices.push(format!("sweep skipped: threshold fixed at {theta}"));
            (theta, None, None)
        }
        (None, true) => {
            let louvain = LouvainConfig {
                seed: config.louvain_seed,
                ..LouvainConfig::default()
            };
            let sweep = at(
                "sweep",
                crate::classmap::sweep_and_select(&pairs, corpus, &config.thresholds, &louvain),
            )?;
            (sweep.theta_star, Some(sweep.selection), Some(sweep))
        }
        (None, false) => {
            return Err(PipelineError {
                stage: "sweep",
                source: "corpus has no labels; supply an explicit threshold".into(),
            })
        }
    };
    if let Some(sweep) = &sweep {
        at("report", out.write("sweep.csv", &render_sweep_csv(&sweep.records)))?;
        at("report", out.write("curves.tsv", &render_curves_tsv(&sweep.records)))?;
    }

    // stage d: label at θ*
    let graph = at("graph", build_graph(&pairs, corpus.len(), theta_star))?;
    let louvain = LouvainConfig {
        seed: config.louvain_seed,
        ..LouvainConfig::default()
    };
    let partition = louvain_detect(&graph, &louvain);

    let mut labeled_csv = csv::Writer::from_writer(Vec::new());
    at("label", labeled_csv.write_record(["sentence", "community_id"]))?;
    for sentence in corpus.sentences() {
        at(
            "label",
            labeled_csv.write_record([
                sentence.raw_text.as_str(),
                &partition.community_of(sentence.id).to_string(),
            ]),
        )?;
    }
    let labeled_bytes = at("label", labeled_csv.into_inner().map_err(|e| e.to_string()))?;
    let labeled_text = at("label", String::from_utf8(labeled_bytes))?;
    at("report", out.write("labeled.csv", &labeled_text))?;

    if corpus.is_labeled() {
        let map = at("class-map", build_class_map(&partition, corpus))?;
        at("report", out.write("class_map.json", &to_pretty_json(&map)))?;
        let ambiguity = at("class-map", ambiguity_report(&map, corpus, &partition))?;
        at(
            "report",
            out.write("ambiguity.json", &to_pretty_json(&ambiguity)),
        )?;
    }

    // stage e: train and test both model families on both labelings
    let evaluation = if corpus.is_labeled() {
        let rows = at(
            "train",
            train_and_score(corpus, &vectors, vocab.len(), &partition, config),
        )?;
        at(
            "report",
            out.write("evaluation.json", &to_pretty_json(&rows)),
        )?;
        Some(rows)
    } else {
        notices.push("evaluation skipped: corpus has no labels".to_string());
        None
    };

    let summary = RunSummary {
        n_sentences: corpus.len(),
        n_classes: corpus.classes().len(),
        vocabulary_size: vocab.len(),
        theta_star,
        selection,
        n_edges: graph.edges().len(),
        n_communities: partition.k(),
        n_singletons: partition.n_singletons(),
        modularity: modularity(&graph, &partition),
        notices,
    };
    at("report", out.write("summary.json", &to_pretty_json(&summary)))?;

    Ok(RunArtifacts {
        summary,
        sweep,
        evaluation,
        partition,
        files: out.written.clone(),
    })
}

/// Trains {SVM, forest} × {human labels, community labels} on the train
/// split and scores each on the test split at message level.
///
/// The community→class map comes from the training split only, and the
/// answer key falls back to the identity over the corpus classes when no
/// key file is configured.
fn train_and_score(
    corpus: &Corpus,
    vectors: &[SparseVector],
    n_features: usize,
    partition: &Partition,
    config: &PipelineConfig,
) -> Result<Vec<EvalRow>, DynError> {
    let key = match &config.answer_key_path {
        Some(path) => {
            let key = AnswerKey::load(path)?;
            key.validate_covers(corpus)?;
            key
        }
        None => AnswerKey::new(
            corpus
                .classes()
                .iter()
                .map(|c| (c.clone(), c.clone()))
                .collect(),
        ),
    };

    let (train_ids, test_ids) =
        split_indices(corpus, config.train_ratio, config.split_seed, config.stratified)?;
    let pick = |ids: &[usize]| -> Vec<SparseVector> {
        ids.iter().map(|&i| vectors[i].clone()).collect()
    };
    let x_train = pick(&train_ids);
    let x_test = pick(&test_ids);
    let human = |ids: &[usize]| -> Vec<String> {
        ids.iter()
            .map(|&i| corpus.sentences()[i].label.clone().expect("labeled"))
            .collect()
    };
    let human_train = human(&train_ids);
    let human_test = human(&test_ids);
    let community = |ids: &[usize]| -> Vec<String> {
        ids.iter()
            .map(|&i| partition.community_of(i).to_string())
            .collect()
    };
    let community_train = community(&train_ids);

    // majority map from the train split only — no test leakage
    let classes: Vec<String> = corpus.classes().iter().cloned().collect();
    let class_index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut counts = vec![vec![0u32; classes.len()]; partition.k()];
    for &i in &train_ids {
        let class = class_index[corpus.sentences()[i].label.as_deref().expect("labeled")];
        counts[partition.community_of(i) as usize][class] += 1;
    }
    let label_to_class = ClassMap::from_counts(counts, classes)?.label_to_class();

    let svm_config = SvmConfig {
        lambda: config.svm_lambda,
        epochs: config.svm_epochs,
        seed: config.model_seed,
    };
    let forest_config = ForestConfig {
        n_trees: config.forest_trees,
        max_depth: config.forest_max_depth,
        seed: config.model_seed,
    };

    let mut rows = Vec::with_capacity(4);
    let mut score = |model: &dyn Classifier,
                     name: &str,
                     labeling: &str,
                     map: Option<&BTreeMap<String, String>>|
     -> Result<(), DynError> {
        let result = evaluate(model, &x_test, &human_test, Some(&key), map)?;
        rows.push(EvalRow {
            model: name.to_string(),
            labeling: labeling.to_string(),
            accuracy: result.accuracy,
        });
        Ok(())
    };

    let svm_human = train_linear_svm(&x_train, &human_train, n_features, &svm_config)?;
    score(&svm_human, "svm", "human", None)?;
    let svm_community = train_linear_svm(&x_train, &community_train, n_features, &svm_config)?;
    score(&svm_community, "svm", "community", Some(&label_to_class))?;
    let forest_human = train_random_forest(&x_train, &human_train, n_features, &forest_config)?;
    score(&forest_human, "forest", "human", None)?;
    let forest_community =
        train_random_forest(&x_train, &community_train, n_features, &forest_config)?;
    score(&forest_community, "forest", "community", Some(&label_to_class))?;
    Ok(rows)
}

/// Renders sweep records as the `sweep.csv` artifact.
pub fn render_sweep_csv(records: &[SweepRecord]) -> String {
    let mut csv =
        String::from("threshold,n_communities,n_singletons,split,merge,split_norm,merge_norm\n");
    for r in records {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.threshold,
            r.n_communities,
            r.n_singletons,
            r.split_score,
            r.merge_score,
            r.split_norm,
            r.merge_norm
        ));
    }
    csv
}

/// Renders the normalized curves as the `curves.tsv` artifact.
pub fn render_curves_tsv(records: &[SweepRecord]) -> String {
    let mut tsv = String::from("threshold\tsplit_norm\tmerge_norm\n");
    for r in records {
        tsv.push_str(&format!(
            "{}\t{}\t{}\n",
            r.threshold, r.split_norm, r.merge_norm
        ));
    }
    tsv
}

/// Renders the config as the `key = value` lines accepted by the CLI.
pub fn render_config(config: &PipelineConfig) -> String {
    let mut lines = Vec::new();
    let path = |p: &Path| p.display().to_string();
    lines.push(format!("corpus = {}", path(&config.corpus_path)));
    lines.push(format!(
        "format = {}",
        match config.corpus_format {
            CorpusFormat::Csv => "csv",
            CorpusFormat::Jsonl => "jsonl",
        }
    ));
    lines.push(format!("labeled = {}", config.labeled));
    if let Some(p) = &config.stopwords_path {
        lines.push(format!("stopwords = {}", path(p)));
    }
    if let Some(p) = &config.lexicon_path {
        lines.push(format!("lexicon = {}", path(p)));
    }
    if let Some(p) = &config.answer_key_path {
        lines.push(format!("answer_key = {}", path(p)));
    }
    lines.push(format!("output_dir = {}", path(&config.output_dir)));
    let grid = config
        .thresholds
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    lines.push(format!("thresholds = {grid}"));
    if let Some(theta) = config.theta {
        lines.push(format!("theta = {theta}"));
    }
    lines.push(format!("train_ratio = {}", config.train_ratio));
    lines.push(format!("stratified = {}", config.stratified));
    lines.push(format!("enable_synonyms = {}", config.enable_synonyms));
    lines.push(format!("enable_bigrams = {}", config.enable_bigrams));
    lines.push(format!("split_seed = {}", config.split_seed));
    lines.push(format!("louvain_seed = {}", config.louvain_seed));
    lines.push(format!("model_seed = {}", config.model_seed));
    lines.push(format!("svm_lambda = {}", config.svm_lambda));
    lines.push(format!("svm_epochs = {}", config.svm_epochs));
    lines.push(format!("forest_trees = {}", config.forest_trees));
    if let Some(depth) = config.forest_max_depth {
        lines.push(format!("forest_max_depth = {depth}"));
    }
    lines.join("\n") + "\n"
}

/// Parses `key = value` lines (with `#` comments) into a config; `corpus`
/// and `output_dir` are required.
pub fn parse_config(text: &str) -> Result<PipelineConfig, String> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`, got {raw:?}", idx + 1));
        };
        fields.insert(key.trim(), value.trim());
    }

    let corpus = fields
        .remove("corpus")
        .ok_or("missing required key `corpus`")?;
    let output_dir = fields
        .remove("output_dir")
        .ok_or("missing required key `output_dir`")?;
    let mut config = PipelineConfig::new(corpus, output_dir);

    let parse_err = |key: &str, value: &str| format!("invalid value for `{key}`: {value:?}");
    for (key, value) in fields {
        match key {
            "format" => {
                config.corpus_format = match value {
                    "csv" => CorpusFormat::Csv,
                    "jsonl" => CorpusFormat::Jsonl,
                    _ => return Err(parse_err(key, value)),
                }
            }
            "labeled" => config.labeled = value.parse().map_err(|_| parse_err(key, value))?,
            "stopwords" => config.stopwords_path = Some(value.into()),
            "lexicon" => config.lexicon_path = Some(value.into()),
            "answer_key" => config.answer_key_path = Some(value.into()),
            "thresholds" => {
                config.thresholds = parse_grid(value).map_err(|_| parse_err(key, value))?
            }
            "theta" => config.theta = Some(value.parse().map_err(|_| parse_err(key, value))?),
            "train_ratio" => {
                config.train_ratio = value.parse().map_err(|_| parse_err(key, value))?
            }
            "stratified" => config.stratified = value.parse().map_err(|_| parse_err(key, value))?,
            "enable_synonyms" => {
                config.enable_synonyms = value.parse().map_err(|_| parse_err(key, value))?
            }
            "enable_bigrams" => {
                config.enable_bigrams = value.parse().map_err(|_| parse_err(key, value))?
            }
            "split_seed" => config.split_seed = value.parse().map_err(|_| parse_err(key, value))?,
            "louvain_seed" => {
                config.louvain_seed = value.parse().map_err(|_| parse_err(key, value))?
            }
            "model_seed" => config.model_seed = value.parse().map_err(|_| parse_err(key, value))?,
            "svm_lambda" => config.svm_lambda = value.parse().map_err(|_| parse_err(key, value))?,
            "svm_epochs" => config.svm_epochs = value.parse().map_err(|_| parse_err(key, value))?,
            "forest_trees" => {
                config.forest_trees = value.parse().map_err(|_| parse_err(key, value))?
            }
            "forest_max_depth" => {
                config.forest_max_depth = Some(value.parse().map_err(|_| parse_err(key, value))?)
            }
            _ => return Err(format!("unknown config key `{key}`")),
        }
    }
    Ok(config)
}

/// Parses a `start:stop:step` grid spec or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("invalid threshold grid {spec:?}");
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad());
        };
        let start: f64 = start.parse().map_err(|_| bad())?;
        let stop: f64 = stop.parse().map_err(|_| bad())?;
        let step: f64 = step.parse().map_err(|_| bad())?;
        if !(step > 0.0 && stop >= start) {
            return Err(bad());
        }
        // count steps up front: tolerates the usual float drift at `stop`
        let n = ((stop - start) / step + 0.5).floor() as usize;
        let grid: Vec<f64> = (0..=n).map(|i| start + step * i as f64).collect();
        Ok(grid)
    } else {
        spec.split(',')
            .map(|part| part.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}
