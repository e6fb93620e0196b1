//! `sentnet` — drive the sentence-labeling pipeline from the shell.
//!
//! Every subcommand reads the same configuration surface: an optional
//! `key = value` config file plus flags, where flags win. Single-stage
//! subcommands (`preprocess` … `report`) rebuild the pipeline up to their
//! stage from the raw corpus, so artifacts never depend on files a
//! previous invocation may have left behind.
//!
//! Exit codes: 0 success, 2 bad flags or config, 3 unreadable or unusable
//! input data, 4 a pipeline stage failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sentnet::classify::{
    evaluate, load_model, save_model, train_linear_svm, train_random_forest, Classifier,
    ForestConfig, SvmConfig, TrainedModel,
};
use sentnet::classmap::{ambiguity_report, build_class_map, split_merge_scores, sweep_and_select};
use sentnet::corpus::{load_corpus, save_corpus, split_indices, AnswerKey, Corpus, CorpusFormat};
use sentnet::louvain::{louvain_detect, modularity, LouvainConfig, Partition};
use sentnet::pipeline::{
    parse_config, parse_grid, render_curves_tsv, render_sweep_csv, run_pipeline_on,
    PipelineConfig,
};
use sentnet::simgraph::{build_graph, export_graph, graph_stats, GraphFormat, SentenceGraph};
use sentnet::synth::{generate_synthetic_corpus, synthetic_answer_key};
use sentnet::textprep::{
    preprocess_sentence, PreprocessConfig, StopwordSet, SynonymLexicon, TermCounts,
};
use sentnet::vectorizer::{pairwise_similarities, transform_tfidf, SparseVector, Vocabulary};

#[derive(Parser)]
#[command(name = "sentnet", version, about = "Label sentence corpora via similarity networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize, stem and count terms; writes tokens.tsv
    Preprocess(ConfigArgs),
    /// Fit the vocabulary and TF-IDF vectors; writes vocabulary.tsv, vectors.jsonl
    Vectorize(ConfigArgs),
    /// Build the similarity network at --theta; writes graph.edges or graph.graphml
    Graph(GraphArgs),
    /// Detect communities at --theta; writes communities.csv
    Detect(ThetaArgs),
    /// Sweep the threshold grid and select θ*; writes sweep.csv, curves.tsv
    Sweep(ConfigArgs),
    /// Write the community-labeled dataset at θ* (or --theta); writes labeled.csv
    Label(ConfigArgs),
    /// Train a classifier on the train split; writes a model file
    Train(TrainArgs),
    /// Score a trained model on the test split; writes evaluation.json
    Evaluate(EvaluateArgs),
    /// Class map, split/merge scores and ambiguity report at θ* (or --theta)
    Report(ConfigArgs),
    /// Generate a synthetic labeled corpus; writes synthetic corpus + answer key
    Synth(SynthArgs),
    /// Run the full pipeline end to end
    Run(ConfigArgs),
}

/// Shared config surface: `--config FILE` loads `key = value` lines, then
/// any flag given here overrides the file.
#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input corpus (CSV `sentence[,class]` or JSONL)
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Corpus file format
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Whether the corpus carries class labels
    #[arg(long)]
    labeled: Option<bool>,
    /// Stopword list, one word per line
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Synonym/bigram lexicon file
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Answer key CSV `class,message_id`
    #[arg(long)]
    answer_key: Option<PathBuf>,
    /// Directory for artifacts
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// Threshold grid, `start:stop:step` or comma-separated
    #[arg(long)]
    thresholds: Option<String>,
    /// Fixed connectivity threshold; skips the sweep
    #[arg(long)]
    theta: Option<f64>,
    /// Train split fraction in (0,1)
    #[arg(long)]
    train_ratio: Option<f64>,
    /// Stratify the split by class
    #[arg(long)]
    stratified: Option<bool>,
    /// Substitute lexicon synonyms during preprocessing
    #[arg(long)]
    synonyms: Option<bool>,
    /// Join lexicon bigrams during preprocessing
    #[arg(long)]
    bigrams: Option<bool>,
    /// Seed for the train/test split
    #[arg(long)]
    split_seed: Option<u64>,
    /// Seed for community detection
    #[arg(long)]
    louvain_seed: Option<u64>,
    /// Seed for classifier training
    #[arg(long)]
    model_seed: Option<u64>,
    /// SVM regularization strength
    #[arg(long)]
    svm_lambda: Option<f64>,
    /// SVM training epochs
    #[arg(long)]
    svm_epochs: Option<usize>,
    /// Number of trees in the forest
    #[arg(long)]
    forest_trees: Option<usize>,
    /// Depth cap for forest trees (unlimited when absent)
    #[arg(long)]
    forest_max_depth: Option<usize>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Output format for the network
    #[arg(long, value_enum, default_value_t = GraphFormatArg::Edgelist)]
    graph_format: GraphFormatArg,
}

#[derive(Args)]
struct ThetaArgs {
    #[command(flatten)]
    common: ConfigArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Label source for training
    #[arg(long, value_enum, default_value_t = LabelSource::Human)]
    labels: LabelSource,
    /// Model family
    #[arg(long, value_enum, default_value_t = ModelKind::Svm)]
    model: ModelKind,
    /// Where to write the model (default: <output_dir>/model.json)
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Model file written by `train`
    #[arg(long)]
    model_file: PathBuf,
    /// Label source the model was trained on; defaults to what the model
    /// file records
    #[arg(long, value_enum)]
    labels: Option<LabelSource>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Number of topics
    #[arg(long, default_value_t = 5)]
    topics: usize,
    /// Sentences per topic
    #[arg(long, default_value_t = 100)]
    per_topic: usize,
    /// Distinct words per topic
    #[arg(long, default_value_t = 30)]
    vocab: usize,
    /// Fraction of words drawn from the shared pool, in [0,1)
    #[arg(long, default_value_t = 0.1)]
    overlap: f64,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for CorpusFormat {
    fn from(arg: FormatArg) -> CorpusFormat {
        match arg {
            FormatArg::Csv => CorpusFormat::Csv,
            FormatArg::Jsonl => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormatArg {
    Edgelist,
    Graphml,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LabelSource {
    Human,
    Community,
}

impl LabelSource {
    fn as_str(self) -> &'static str {
        match self {
            LabelSource::Human => "human",
            LabelSource::Community => "community",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Svm,
    Forest,
}

enum CliError {
    /// Bad flags or config file → exit 2
    Config(String),
    /// Unreadable or unusable input data → exit 3
    Data(String),
    /// A pipeline stage failed → exit 4
    Stage(String),
}

impl CliError {
    fn report(&self) -> (i32, &str) {
        match self {
            CliError::Config(msg) => (2, msg),
            CliError::Data(msg) => (3, msg),
            CliError::Stage(msg) => (4, msg),
        }
    }
}

fn config_err(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

fn data_err(e: impl ToString) -> CliError {
    CliError::Data(e.to_string())
}

fn stage_err(e: impl ToString) -> CliError {
    CliError::Stage(e.to_string())
}

impl ConfigArgs {
    /// File config (when given) with flag overrides applied on top.
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_config(&text).map_err(config_err)?
            }
            None => {
                let corpus = self.corpus.clone().ok_or_else(|| {
                    CliError::Config("either --corpus or --config is required".into())
                })?;
                PipelineConfig::new(corpus, "out")
            }
        };
        if let Some(corpus) = &self.corpus {
            config.corpus_path = corpus.clone();
        }
        if let Some(format) = self.format {
            config.corpus_format = format.into();
        }
        if let Some(labeled) = self.labeled {
            config.labeled = labeled;
        }
        if let Some(path) = &self.stopwords {
            config.stopwords_path = Some(path.clone());
        }
        if let Some(path) = &self.lexicon {
            config.lexicon_path = Some(path.clone());
        }
        if let Some(path) = &self.answer_key {
            config.answer_key_path = Some(path.clone());
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(spec) = &self.thresholds {
            config.thresholds = parse_grid(spec).map_err(config_err)?;
        }
        if let Some(theta) = self.theta {
            config.theta = Some(theta);
        }
        if let Some(ratio) = self.train_ratio {
            config.train_ratio = ratio;
        }
        if let Some(stratified) = self.stratified {
            config.stratified = stratified;
        }
        if let Some(synonyms) = self.synonyms {
            config.enable_synonyms = synonyms;
        }
        if let Some(bigrams) = self.bigrams {
            config.enable_bigrams = bigrams;
        }
        if let Some(seed) = self.split_seed {
            config.split_seed = seed;
        }
        if let Some(seed) = self.louvain_seed {
            config.louvain_seed = seed;
        }
        if let Some(seed) = self.model_seed {
            config.model_seed = seed;
        }
        if let Some(lambda) = self.svm_lambda {
            config.svm_lambda = lambda;
        }
        if let Some(epochs) = self.svm_epochs {
            config.svm_epochs = epochs;
        }
        if let Some(trees) = self.forest_trees {
            config.forest_trees = trees;
        }
        if let Some(depth) = self.forest_max_depth {
            config.forest_max_depth = Some(depth);
        }

        if let Some(theta) = config.theta {
            if !(0.0..1.0).contains(&theta) {
                return Err(CliError::Config(format!(
                    "theta must be in [0,1), got {theta}"
                )));
            }
        }
        if config.thresholds.len() < 2 {
            return Err(CliError::Config(format!(
                "the threshold grid needs at least 2 points, got {}",
                config.thresholds.len()
            )));
        }
        if let Some(&bad) = config
            .thresholds
            .iter()
            .find(|t| !(0.0..1.0).contains(*t))
        {
            return Err(CliError::Config(format!(
                "grid thresholds must lie in [0,1), got {bad}"
            )));
        }
        if !(config.train_ratio > 0.0 && config.train_ratio < 1.0) {
            return Err(CliError::Config(format!(
                "train_ratio must be in (0,1), got {}",
                config.train_ratio
            )));
        }
        Ok(config)
    }
}

/// The pipeline front end shared by the single-stage subcommands: corpus,
/// preprocessing output, vocabulary and TF-IDF vectors.
struct Stage {
    config: PipelineConfig,
    corpus: Corpus,
    docs: Vec<TermCounts>,
    vocab: Vocabulary,
    vectors: Vec<SparseVector>,
}

impl Stage {
    fn build(args: &ConfigArgs) -> Result<Stage, CliError> {
        let config = args.resolve()?;
        let corpus = load_corpus(&config.corpus_path, config.corpus_format, config.labeled)
            .map_err(data_err)?;
        let stopwords = match &config.stopwords_path {
            Some(path) => StopwordSet::from_file(path).map_err(data_err)?,
            None => StopwordSet::default(),
        };
        let lexicon = match &config.lexicon_path {
            Some(path) => SynonymLexicon::from_file(path).map_err(data_err)?,
            None => SynonymLexicon::default(),
        };
        let prep = PreprocessConfig {
            stopword_set: stopwords,
            lexicon,
            enable_synonyms: config.enable_synonyms,
            enable_bigrams: config.enable_bigrams,
        };
        let docs: Vec<TermCounts> = corpus
            .sentences()
            .iter()
            .map(|s| preprocess_sentence(&s.raw_text, &prep))
            .collect();
        let vocab = Vocabulary::fit(&docs).map_err(stage_err)?;
        let vectors = docs.iter().map(|d| transform_tfidf(d, &vocab)).collect();
        Ok(Stage {
            config,
            corpus,
            docs,
            vocab,
            vectors,
        })
    }

    fn out_path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.config.output_dir).map_err(stage_err)?;
        Ok(self.config.output_dir.join(name))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_path(name)?;
        fs::write(&path, contents)
            .map_err(|e| CliError::Stage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// The fixed θ when configured, otherwise the sweep's θ*.
    fn select_theta(&self) -> Result<f64, CliError> {
        match self.config.theta {
            Some(theta) => Ok(theta),
            None => {
                if !self.corpus.is_labeled() {
                    return Err(CliError::Data(
                        "corpus has no labels; supply --theta to skip the sweep".into(),
                    ));
                }
                Ok(self.sweep()?.theta_star)
            }
        }
    }

    fn sweep(&self) -> Result<sentnet::classmap::SweepResult, CliError> {
        let pairs = pairwise_similarities(&self.vectors);
        if !self.corpus.is_labeled() {
            return Err(CliError::Data(
                "corpus has no labels; the sweep needs them to score thresholds".into(),
            ));
        }
        sweep_and_select(&pairs, &self.corpus, &self.config.thresholds, &self.louvain())
            .map_err(stage_err)
    }

    fn graph_at(&self, theta: f64) -> Result<SentenceGraph, CliError> {
        let pairs = pairwise_similarities(&self.vectors);
        build_graph(&pairs, self.corpus.len(), theta).map_err(stage_err)
    }

    fn louvain(&self) -> LouvainConfig {
        LouvainConfig {
            seed: self.config.louvain_seed,
            ..LouvainConfig::default()
        }
    }

    fn split(&self) -> Result<(Vec<usize>, Vec<usize>), CliError> {
        split_indices(
            &self.corpus,
            self.config.train_ratio,
            self.config.split_seed,
            self.config.stratified,
        )
        .map_err(data_err)
    }

    /// Labels to train on: the corpus classes, or community ids at θ*.
    fn training_labels(
        &self,
        source: LabelSource,
        ids: &[usize],
    ) -> Result<(Vec<String>, Option<Partition>), CliError> {
        match source {
            LabelSource::Human => {
                if !self.corpus.is_labeled() {
                    return Err(CliError::Data(
                        "corpus has no labels; train on --labels community instead".into(),
                    ));
                }
                let labels = ids
                    .iter()
                    .map(|&i| self.corpus.sentences()[i].label.clone().expect("labeled"))
                    .collect();
                Ok((labels, None))
            }
            LabelSource::Community => {
                let theta = self.select_theta()?;
                let graph = self.graph_at(theta)?;
                let partition = louvain_detect(&graph, &self.louvain());
                let labels = ids
                    .iter()
                    .map(|&i| partition.community_of(i).to_string())
                    .collect();
                Ok((labels, Some(partition)))
            }
        }
    }

    /// Majority class per community, counted on the train split only.
    fn community_map(
        &self,
        partition: &Partition,
        train_ids: &[usize],
    ) -> Result<BTreeMap<String, String>, CliError> {
        let classes: Vec<String> = self.corpus.classes().iter().cloned().collect();
        let class_index: BTreeMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut counts = vec![vec![0u32; classes.len()]; partition.k()];
        for &i in train_ids {
            let label = self.corpus.sentences()[i].label.as_deref().expect("labeled");
            counts[partition.community_of(i) as usize][class_index[label]] += 1;
        }
        let map = sentnet::classmap::ClassMap::from_counts(counts, classes).map_err(stage_err)?;
        Ok(map.label_to_class())
    }

    /// Configured answer key, or the identity over the corpus classes.
    fn answer_key(&self) -> Result<AnswerKey, CliError> {
        match &self.config.answer_key_path {
            Some(path) => {
                let key = AnswerKey::load(path).map_err(data_err)?;
                key.validate_covers(&self.corpus).map_err(data_err)?;
                Ok(key)
            }
            None => Ok(AnswerKey::new(
                self.corpus
                    .classes()
                    .iter()
                    .map(|c| (c.clone(), c.clone()))
                    .collect(),
            )),
        }
    }
}

fn cmd_preprocess(args: &ConfigArgs) -> Result<(), CliError> {
    let stage = Stage::build(args)?;
    let mut tsv = String::from("sentence_id\tterms\n");
    for (sentence, doc) in stage.corpus.sentences().iter().zip(&stage.docs) {
        let terms: Vec<String> = doc.iter().map(|(t, n)| format!("{t}:{n}")).collect();
        tsv.push_str(&format!("{}\t{}\n", sentence.id, terms.join(" ")));
    }
    let path = stage.write("tokens.tsv", &tsv)?;
    println!(
        "preprocessed {} sentences into {} distinct terms; wrote {}",
        stage.corpus.len(),
        stage.vocab.len(),
        path.display()
    );
    Ok(())
}

fn cmd_vectorize(args: &ConfigArgs) -> Result<(), CliError> {
    let stage = Stage::build(args)?;
    let mut vocab_tsv = String::from("term\tindex\tdf\n");
    for (term, index) in stage.vocab.terms() {
        vocab_tsv.push_str(&format!("{term}\t{index}\t{}\n", stage.vocab.df(index)));
    }
    let vocab_path = stage.write("vocabulary.tsv", &vocab_tsv)?;

    let mut jsonl = String::new();
    for (sentence, vector) in stage.corpus.sentences().iter().zip(&stage.vectors) {
        let entries: Vec<serde_json::Value> = vector
            .entries()
            .iter()
            .map(|&(j, w)| serde_json::json!([j, w]))
            .collect();
        let line = serde_json::json!({"id": sentence.id, "entries": entries});
        jsonl.push_str(&line.to_string());
        jsonl.push('\n');
    }
    let vec_path = stage.write("vectors.jsonl", &jsonl)?;
    println!(
        "vectorized {} sentences into {} features; wrote {}, {}",
        stage.corpus.len(),
        stage.vocab.len(),
        vocab_path.display(),
        vec_path.display()
    );
    Ok(())
}

fn cmd_graph(args: &GraphArgs) -> Result<(), CliError> {
    let stage = Stage::build(&args.common)?;
    let theta = stage.config.theta.ok_or_else(|| {
        CliError::Config("graph needs --theta (or `theta` in the config file)".into())
    })?;
    let graph = stage.graph_at(theta)?;
    let (name, format) = match args.graph_format {
        GraphFormatArg::Edgelist => ("graph.edges", GraphFormat::EdgeList),
        GraphFormatArg::Graphml => ("graph.graphml", GraphFormat::GraphMl),
    };
    let path = stage.out_path(name)?;
    export_graph(&graph, &path, format).map_err(stage_err)?;
    let stats = graph_stats(&graph);
    println!(
        "graph at theta={theta}: {} nodes, {} edges, {} components, {} isolated; wrote {}",
        stats.n_nodes,
        stats.n_edges,
        stats.n_components,
        stats.n_isolated_nodes,
        path.display()
    );
    Ok(())
}

fn cmd_detect(args: &ThetaArgs) -> Result<(), CliError> {
    let stage = Stage::build(&args.common)?;
    let theta = stage.select_theta()?;
    let graph = stage.graph_at(theta)?;
    let partition = louvain_detect(&graph, &stage.louvain());
    let mut csv = String::from("sentence_id,community\n");
    for sentence in stage.corpus.sentences() {
        csv.push_str(&format!(
            "{},{}\n",
            sentence.id,
            partition.community_of(sentence.id)
        ));
    }
    let path = stage.write("communities.csv", &csv)?;
    println!(
        "detected {} communities ({} singletons) at theta={theta}, modularity {:.4}; wrote {}",
        partition.k(),
        partition.n_singletons(),
        modularity(&graph, &partition),
        path.display()
    );
    Ok(())
}

fn cmd_sweep(args: &ConfigArgs) -> Result<(), CliError> {
    let stage = Stage::build(args)?;
    let sweep = stage.sweep()?;
    let csv_path = stage.write("sweep.csv", &render_sweep_csv(&sweep.records))?;
    let tsv_path = stage.write("curves.tsv", &render_curves_tsv(&sweep.records))?;
    println!(
        "theta* = {} ({:?}) over {} thresholds; wrote {}, {}",
        sweep.theta_star,
        sweep.selection,
        sweep.records.len(),
        csv_path.display(),
        tsv_path.display()
    );
    Ok(())
}

fn cmd_label(args: &ConfigArgs) -> Result<(), CliError> {
    let stage = Stage::build(args)?;
    let theta = stage.select_theta()?;
    let graph = stage.graph_at(theta)?;
    let partition = louvain_detect(&graph, &stage.louvain());
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["sentence", "community_id"])
        .map_err(stage_err)?;
    for sentence in stage.corpus.sentences() {
        writer
            .write_record([
                sentence.raw_text.as_str(),
                &partition.community_of(sentence.id).to_string(),
            ])
            .map_err(stage_err)?;
    }
    let bytes = writer.into_inner().map_err(stage_err)?;
    let text = String::from_utf8(bytes).map_err(stage_err)?;
    let path = stage.write("labeled.csv", &text)?;
    println!(
        "labeled {} sentences with {} communities at theta={theta}; wrote {}",
        stage.corpus.len(),
        partition.k(),
        path.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let stage = Stage::build(&args.common)?;
    let (train_ids, _) = stage.split()?;
    let (labels, _) = stage.training_labels(args.labels, &train_ids)?;
    let x_train: Vec<SparseVector> = train_ids.iter().map(|&i| stage.vectors[i].clone()).collect();

    let model = match args.model {
        ModelKind::Svm => {
            let config = SvmConfig {
                lambda: stage.config.svm_lambda,
                epochs: stage.config.svm_epochs,
                seed: stage.config.model_seed,
            };
            TrainedModel::Svm(
                train_linear_svm(&x_train, &labels, stage.vocab.len(), &config)
                    .map_err(stage_err)?,
            )
        }
        ModelKind::Forest => {
            let config = ForestConfig {
                n_trees: stage.config.forest_trees,
                max_depth: stage.config.forest_max_depth,
                seed: stage.config.model_seed,
            };
            TrainedModel::Forest(
                train_random_forest(&x_train, &labels, stage.vocab.len(), &config)
                    .map_err(stage_err)?,
            )
        }
    };
    let path = match &args.model_out {
        Some(path) => path.clone(),
        None => stage.out_path("model.json")?,
    };
    save_model(
        &path,
        &model,
        stage.vocab.content_hash(),
        args.labels.as_str(),
    )
    .map_err(stage_err)?;
    println!(
        "trained {} on {} train sentences ({} classes); wrote {}",
        model.kind(),
        x_train.len(),
        model.classes().len(),
        path.display()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let stage = Stage::build(&args.common)?;
    let (model, vocab_hash, trained_on) = load_model(&args.model_file).map_err(data_err)?;
    if vocab_hash != stage.vocab.content_hash() {
        return Err(CliError::Data(format!(
            "model {} was trained on a different vocabulary",
            args.model_file.display()
        )));
    }
    let labels = match args.labels {
        Some(source) if source.as_str() != trained_on => {
            return Err(CliError::Data(format!(
                "model {} was trained on {trained_on} labels, not {}",
                args.model_file.display(),
                source.as_str()
            )));
        }
        Some(source) => source,
        None => match trained_on.as_str() {
            "human" => LabelSource::Human,
            "community" => LabelSource::Community,
            other => {
                return Err(CliError::Data(format!(
                    "model {} records unknown label source {other:?}",
                    args.model_file.display()
                )));
            }
        },
    };
    if !stage.corpus.is_labeled() {
        return Err(CliError::Data(
            "corpus has no labels; evaluation needs ground truth".into(),
        ));
    }
    let (train_ids, test_ids) = stage.split()?;
    let x_test: Vec<SparseVector> = test_ids.iter().map(|&i| stage.vectors[i].clone()).collect();
    let y_test: Vec<String> = test_ids
        .iter()
        .map(|&i| stage.corpus.sentences()[i].label.clone().expect("labeled"))
        .collect();

    let key = stage.answer_key()?;
    let label_to_class = match labels {
        LabelSource::Human => None,
        LabelSource::Community => {
            let theta = stage.select_theta()?;
            let graph = stage.graph_at(theta)?;
            let partition = louvain_detect(&graph, &stage.louvain());
            Some(stage.community_map(&partition, &train_ids)?)
        }
    };
    let result = evaluate(
        &model,
        &x_test,
        &y_test,
        Some(&key),
        label_to_class.as_ref(),
    )
    .map_err(stage_err)?;
    let json = serde_json::to_string_pretty(&result).expect("serializable result");
    let path = stage.write("evaluation.json", &(json + "\n"))?;
    println!(
        "accuracy {:.4} ({}/{}); wrote {}",
        result.accuracy,
        result.n_correct,
        result.n_total,
        path.display()
    );
    Ok(())
}

fn cmd_report(args: &ConfigArgs) -> Result<(), CliError> {
    let stage = Stage::build(args)?;
    if !stage.corpus.is_labeled() {
        return Err(CliError::Data(
            "corpus has no labels; the report compares communities against them".into(),
        ));
    }
    let theta = stage.select_theta()?;
    let graph = stage.graph_at(theta)?;
    let partition = louvain_detect(&graph, &stage.louvain());
    let map = build_class_map(&partition, &stage.corpus).map_err(stage_err)?;
    let scores = split_merge_scores(&map);
    let ambiguity = ambiguity_report(&map, &stage.corpus, &partition).map_err(stage_err)?;
    let map_json = serde_json::to_string_pretty(&map).expect("serializable map");
    let amb_json = serde_json::to_string_pretty(&ambiguity).expect("serializable report");
    let map_path = stage.write("class_map.json", &(map_json + "\n"))?;
    let amb_path = stage.write("ambiguity.json", &(amb_json + "\n"))?;
    println!(
        "at theta={theta}: split {:.4}, merge {:.4}, {} mixed communities; wrote {}, {}",
        scores.split_score,
        scores.merge_score,
        ambiguity.entries.len(),
        map_path.display(),
        amb_path.display()
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    // synth creates the corpus, so resolve() must not demand --corpus
    let out_dir = args
        .common
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));
    let format: CorpusFormat = args.common.format.unwrap_or(FormatArg::Csv).into();
    let corpus = generate_synthetic_corpus(
        args.topics,
        args.per_topic,
        args.vocab,
        args.overlap,
        args.seed,
    )
    .map_err(config_err)?;
    fs::create_dir_all(&out_dir).map_err(stage_err)?;
    let corpus_name = match format {
        CorpusFormat::Csv => "synthetic.csv",
        CorpusFormat::Jsonl => "synthetic.jsonl",
    };
    let corpus_path = out_dir.join(corpus_name);
    save_corpus(&corpus, &corpus_path, format).map_err(stage_err)?;
    let key_path = out_dir.join("answer_key.csv");
    synthetic_answer_key(&corpus)
        .save(&key_path)
        .map_err(stage_err)?;
    println!(
        "generated {} sentences across {} topics; wrote {}, {}",
        corpus.len(),
        args.topics,
        corpus_path.display(),
        key_path.display()
    );
    Ok(())
}

fn cmd_run(args: &ConfigArgs) -> Result<(), CliError> {
    let config = args.resolve()?;
    let corpus = load_corpus(&config.corpus_path, config.corpus_format, config.labeled)
        .map_err(data_err)?;
    let artifacts = run_pipeline_on(&corpus, &config)
        .map_err(|e| CliError::Stage(format!("stage {} failed: {e}", e.stage)))?;
    let s = &artifacts.summary;
    println!(
        "{} sentences, {} classes, vocabulary {}",
        s.n_sentences, s.n_classes, s.vocabulary_size
    );
    match s.selection {
        Some(selection) => println!("theta* = {} ({selection:?})", s.theta_star),
        None => println!("theta = {} (fixed)", s.theta_star),
    }
    println!(
        "{} edges, {} communities ({} singletons), modularity {:.4}",
        s.n_edges, s.n_communities, s.n_singletons, s.modularity
    );
    if let Some(rows) = &artifacts.evaluation {
        for row in rows {
            println!("{:>7} / {:<9} accuracy {:.4}", row.model, row.labeling, row.accuracy);
        }
    }
    for notice in &s.notices {
        println!("note: {notice}");
    }
    for file in &artifacts.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Vectorize(args) => cmd_vectorize(args),
        Command::Graph(args) => cmd_graph(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Label(args) => cmd_label(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Run(args) => cmd_run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, msg) = e.report();
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
