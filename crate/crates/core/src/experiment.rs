//! Flat `key = value` experiment configuration, corpus loading, and
//! corpus-level tree analysis shared by the command line and the tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{corpus_pairs, load_corpus, load_embeddings, Document, PaddedDoc, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, Task};
use crate::mtt::DepTree;
use crate::params::ParamStore;
use crate::training::{Split, TrainConfig};
use crate::treeval::{aggregate_stats, extract_tree, ppmi_root_words, tree_statistics, AggregateStats, PpmiConfig, TreeStats};

/// Split names and the file each is read from inside the corpus directory.
pub const SPLITS: [(&str, &str); 3] = [("train", "train.jsonl"), ("dev", "dev.jsonl"), ("test", "test.jsonl")];

/// File name for stand-in pretrained embeddings next to a synthetic corpus.
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Directory holding `train.jsonl`, `dev.jsonl` and `test.jsonl`.
    pub corpus: Option<PathBuf>,
    /// Text embeddings; `None` draws seeded random rows for the train vocabulary.
    pub embeddings: Option<PathBuf>,
    pub embedding_seed: u64,
    pub out: Option<PathBuf>,
    /// Permuted copies per document for the ordering task.
    pub pairs_per_document: usize,
    pub pair_seed: u64,
    /// Split whose trees `analyze` reports by default.
    pub analysis_split: String,
    pub ppmi_top_k: usize,
    pub ppmi: PpmiConfig,
    /// File name of the aggregate tree statistics inside the output directory.
    pub stats_file: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            corpus: None,
            embeddings: None,
            embedding_seed: 1,
            out: None,
            pairs_per_document: 18,
            pair_seed: 1,
            analysis_split: "dev".into(),
            ppmi_top_k: 10,
            ppmi: PpmiConfig::default(),
            stats_file: "tree_stats.tsv".into(),
        }
    }
}

const OWN_KEYS: [&str; 11] = [
    "corpus",
    "embeddings",
    "embedding_seed",
    "out",
    "pairs_per_document",
    "pair_seed",
    "analysis_split",
    "ppmi_top_k",
    "ppmi_smoothing",
    "ppmi_min_count",
    "stats_file",
];

fn optional_path(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl ExperimentConfig {
    /// Every accepted key.
    pub fn keys() -> Vec<&'static str> {
        ModelConfig::KEYS
            .iter()
            .chain(TrainConfig::KEYS.iter())
            .chain(OWN_KEYS.iter())
            .copied()
            .collect()
    }

    /// Parse config text. Blank lines and `#` comments are skipped; relative
    /// paths are resolved against `base`. Every problem is a config error
    /// naming `origin` and the line.
    pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Self> {
        let at = |line: usize, message: String| Error::Config(format!("{}:{}: {}", origin.display(), line, message));
        let mut config = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| at(i + 1, "expected key = value".into()))?;
            if seen.iter().any(|k| k == key) {
                return Err(at(i + 1, format!("duplicate key '{}'", key)));
            }
            seen.push(key.to_string());
            config.set(key, value, base).map_err(|e| match e {
                Error::Config(m) => at(i + 1, m),
                other => at(i + 1, other.to_string()),
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, path, base)
    }

    /// Set one key; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        if self.model.set(key, value)? || self.train.set(key, value)? {
            return Ok(());
        }
        let path = |v: &str| -> Option<PathBuf> { (v != "none").then(|| base.join(v)) };
        let number = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{}' for {}", v, key)))
        };
        match key {
            "corpus" => self.corpus = path(value),
            "embeddings" => self.embeddings = path(value),
            "out" => self.out = path(value),
            "embedding_seed" => self.embedding_seed = number(value)?,
            "pair_seed" => self.pair_seed = number(value)?,
            "pairs_per_document" => self.pairs_per_document = number(value)? as usize,
            "ppmi_top_k" => self.ppmi_top_k = number(value)? as usize,
            "ppmi_min_count" => self.ppmi.min_count = number(value)? as usize,
            "ppmi_smoothing" => {
                self.ppmi.smoothing = value
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid value '{}' for {}", value, key)))?
            }
            "analysis_split" => self.analysis_split = value.to_string(),
            "stats_file" => self.stats_file = value.to_string(),
            other => return Err(Error::Config(format!("unknown key '{}'", other))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.pairs_per_document == 0 {
            return Err(Error::Config("pairs_per_document must be at least 1".into()));
        }
        if !SPLITS.iter().any(|(name, _)| *name == self.analysis_split) {
            return Err(Error::Config(format!(
                "analysis_split must be train, dev or test, got '{}'",
                self.analysis_split
            )));
        }
        if !(self.ppmi.smoothing.is_finite() && self.ppmi.smoothing >= 0.0) {
            return Err(Error::Config("ppmi_smoothing must be nonnegative".into()));
        }
        if self.stats_file.is_empty() || self.stats_file.contains('/') {
            return Err(Error::Config("stats_file must be a plain file name".into()));
        }
        Ok(())
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.model.to_pairs().into_iter().chain(self.train.to_pairs()) {
            let _ = writeln!(out, "{} = {}", k, v);
        }
        let own = [
            ("corpus", optional_path(&self.corpus)),
            ("embeddings", optional_path(&self.embeddings)),
            ("embedding_seed", self.embedding_seed.to_string()),
            ("out", optional_path(&self.out)),
            ("pairs_per_document", self.pairs_per_document.to_string()),
            ("pair_seed", self.pair_seed.to_string()),
            ("analysis_split", self.analysis_split.clone()),
            ("ppmi_top_k", self.ppmi_top_k.to_string()),
            ("ppmi_smoothing", self.ppmi.smoothing.to_string()),
            ("ppmi_min_count", self.ppmi.min_count.to_string()),
            ("stats_file", self.stats_file.clone()),
        ];
        for (k, v) in own {
            let _ = writeln!(out, "{} = {}", k, v);
        }
        out
    }

    pub fn corpus_dir(&self) -> Result<&Path> {
        self.corpus
            .as_deref()
            .ok_or_else(|| Error::Config("no corpus directory configured".into()))
    }
}

/// Documents of every split of a corpus directory.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplits {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

impl CorpusSplits {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut loaded = Vec::with_capacity(3);
        for (_, file) in SPLITS {
            loaded.push(load_corpus(dir.join(file))?);
        }
        let test = loaded.pop().expect("three splits");
        let dev = loaded.pop().expect("three splits");
        let train = loaded.pop().expect("three splits");
        Ok(CorpusSplits { train, dev, test })
    }

    pub fn get(&self, split: &str) -> Option<&[Document]> {
        match split {
            "train" => Some(&self.train),
            "dev" => Some(&self.dev),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// The vocabulary a config asks for.
pub fn build_vocabulary(config: &ExperimentConfig, train: &[Document]) -> Result<Vocabulary> {
    match &config.embeddings {
        Some(path) => load_embeddings(path, config.model.embed_dim, config.embedding_seed),
        None => Ok(Vocabulary::from_corpus(train, config.model.embed_dim, config.embedding_seed)),
    }
}

/// Encode one split for the configured task. Ordering pairs for split `s`
/// are drawn with seed `pair_seed + s`.
pub fn encode_split(config: &ExperimentConfig, docs: &[Document], vocab: &Vocabulary, split_index: u64) -> Result<Split> {
    match config.model.task {
        Task::Classification => Split::classification(docs, vocab),
        Task::Ordering => {
            let pairs = corpus_pairs(docs, config.pairs_per_document, config.pair_seed.wrapping_add(split_index));
            if pairs.is_empty() {
                return Err(Error::InvalidInput("no document has two or more sentences".into()));
            }
            Ok(Split::ordering(&pairs, vocab))
        }
    }
}

/// Induced structure for one document.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentTree {
    pub id: String,
    /// Highest-scoring tree under the learned potentials.
    pub tree: DepTree,
    pub root_marginals: Vec<f64>,
    pub stats: TreeStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusAnalysis {
    pub documents: Vec<DocumentTree>,
    pub aggregate: AggregateStats,
}

impl CorpusAnalysis {
    pub fn trees(&self) -> Vec<(String, DepTree)> {
        self.documents.iter().map(|d| (d.id.clone(), d.tree.clone())).collect()
    }

    /// PPMI of words in root sentences; `docs` must be the analysed documents.
    pub fn ppmi(&self, docs: &[Document], config: PpmiConfig) -> Result<Vec<(String, f64)>> {
        if docs.len() != self.documents.len() {
            return Err(Error::InvalidInput(format!(
                "{} documents for {} trees",
                docs.len(),
                self.documents.len()
            )));
        }
        let pairs: Vec<(&[Vec<String>], &DepTree)> = docs
            .iter()
            .zip(&self.documents)
            .map(|(d, t)| (d.sentences.as_slice(), &t.tree))
            .collect();
        ppmi_root_words(&pairs, config)
    }
}

/// Decode the best tree of every document and collect its statistics.
pub fn analyze_corpus(model: &Model, params: &ParamStore, vocab: &Vocabulary, docs: &[Document]) -> Result<CorpusAnalysis> {
    if !model.config().doc_attention {
        return Err(Error::Config(
            "the model has no document-level attention, so there are no trees to extract".into(),
        ));
    }
    if docs.is_empty() {
        return Err(Error::InvalidInput("no documents to analyse".into()));
    }
    let documents = docs
        .par_iter()
        .map(|doc| {
            let padded = PaddedDoc::from_document(doc, vocab)?;
            let analysis = model.analyze(params, &padded)?;
            let potentials = analysis.potentials.expect("document attention yields potentials");
            let marginals = analysis.marginals.expect("document attention yields marginals");
            let tree = extract_tree(&potentials)?;
            let stats = tree_statistics(&tree, Some(&marginals))?;
            Ok(DocumentTree {
                id: doc.id.clone(),
                tree,
                root_marginals: marginals.root.to_vec(),
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stats: Vec<TreeStats> = documents.iter().map(|d| d.stats).collect();
    let aggregate = aggregate_stats(&stats)?;
    Ok(CorpusAnalysis { documents, aggregate })
}
