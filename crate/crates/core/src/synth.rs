//! Seeded synthetic corpora standing in for the real classification and
//! sentence-ordering datasets.
//!
//! * Root-cue: 6 to 12 sentences of shared filler words. Exactly one sentence,
//!   placed first or last, carries a cue token and the cue alone decides the
//!   binary label.
//! * Ordering: 5 to 9 sentences following a template chain. Sentence `t`
//!   mentions entities `t` and `t + 1` of a document-specific chain, and
//!   opener, connective and closer words mark the first, middle and last
//!   sentences.
//!
//! Each corpus comes with stand-in pretrained embeddings: one uniform row in
//! `[-PRETRAINED_SCALE, PRETRAINED_SCALE]` per word type, in the usual text
//! format.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Document;
use crate::error::{Error, Result};

/// Cue tokens for label 0 and label 1.
pub const NEGATIVE_CUES: [&str; 3] = ["dreadful", "awful", "bland"];
pub const POSITIVE_CUES: [&str; 3] = ["superb", "delightful", "stellar"];

/// Range of the stand-in pretrained embedding values.
pub const PRETRAINED_SCALE: f64 = 0.5;

const FILLER_WORDS: usize = 40;
const ENTITIES: usize = 30;
const OPENERS: [&str; 2] = ["initially", "first"];
const CONNECTIVES: [&str; 3] = ["then", "next", "afterwards"];
const CLOSERS: [&str; 2] = ["finally", "overall"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusKind {
    RootCue,
    Ordering,
}

impl fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusKind::RootCue => "root-cue",
            CorpusKind::Ordering => "ordering",
        })
    }
}

impl FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root-cue" => Ok(CorpusKind::RootCue),
            "ordering" => Ok(CorpusKind::Ordering),
            other => Err(Error::Config(format!(
                "unknown corpus kind '{}' (expected root-cue or ordering)",
                other
            ))),
        }
    }
}

/// All cue tokens, negative first.
pub fn cue_tokens() -> Vec<String> {
    NEGATIVE_CUES.iter().chain(POSITIVE_CUES.iter()).map(|s| s.to_string()).collect()
}

/// Label implied by a cue token.
pub fn cue_label(token: &str) -> Option<usize> {
    if NEGATIVE_CUES.contains(&token) {
        Some(0)
    } else if POSITIVE_CUES.contains(&token) {
        Some(1)
    } else {
        None
    }
}

fn filler(rng: &mut ChaCha8Rng) -> String {
    format!("w{:02}", rng.gen_range(0..FILLER_WORDS))
}

fn filler_sentence(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    (0..len).map(|_| filler(rng)).collect()
}

/// One root-cue document; also returns the 0-based cue sentence position.
pub fn root_cue_document(id: String, rng: &mut ChaCha8Rng) -> (Document, usize) {
    let n = rng.gen_range(6..=12);
    let label = rng.gen_range(0..2usize);
    let cues: &[&str] = if label == 0 { &NEGATIVE_CUES } else { &POSITIVE_CUES };
    let cue_position = if rng.gen_bool(0.5) { 0 } else { n - 1 };

    let mut sentences = Vec::with_capacity(n);
    for s in 0..n {
        let len = rng.gen_range(5..=9);
        let mut sentence = filler_sentence(rng, len);
        if s == cue_position {
            let slot = rng.gen_range(0..len);
            sentence[slot] = cues.choose(rng).expect("nonempty cue list").to_string();
        }
        sentences.push(sentence);
    }
    let doc = Document::new(id, sentences, Some(label)).expect("generated documents are valid");
    (doc, cue_position)
}

/// One coherent ordering document.
pub fn ordering_document(id: String, rng: &mut ChaCha8Rng) -> Document {
    let n = rng.gen_range(5..=9);
    let start = rng.gen_range(0..ENTITIES);
    let entity = |t: usize| format!("e{:02}", (start + t) % ENTITIES);
    let mut sentences = Vec::with_capacity(n);
    for t in 0..n {
        let marker = if t == 0 {
            OPENERS.choose(rng)
        } else if t == n - 1 {
            CLOSERS.choose(rng)
        } else {
            CONNECTIVES.choose(rng)
        }
        .expect("nonempty marker list")
        .to_string();
        let mut sentence = vec![marker, entity(t)];
        let inner = rng.gen_range(1..=3);
        sentence.extend(filler_sentence(rng, inner));
        sentence.push(entity(t + 1));
        let tail = rng.gen_range(0..=2);
        sentence.extend(filler_sentence(rng, tail));
        sentences.push(sentence);
    }
    Document::new(id, sentences, None).expect("generated documents are valid")
}

/// Train/dev/test documents of a synthetic corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

impl SynthCorpus {
    pub fn splits(&self) -> [(&'static str, &[Document]); 3] {
        [("train", &self.train), ("dev", &self.dev), ("test", &self.test)]
    }
}

/// `size` documents split 80/10/10, byte-identical for a given seed.
pub fn synthesize(kind: CorpusKind, size: usize, seed: u64) -> Result<SynthCorpus> {
    if size < 10 {
        return Err(Error::Config(format!("corpus size must be at least 10, got {}", size)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs: Vec<Document> = (0..size)
        .map(|i| {
            let id = format!("{}-{:05}", kind, i);
            match kind {
                CorpusKind::RootCue => root_cue_document(id, &mut rng).0,
                CorpusKind::Ordering => ordering_document(id, &mut rng),
            }
        })
        .collect();
    let dev_size = size / 10;
    let train_size = size - 2 * dev_size;
    let mut docs = docs.into_iter();
    Ok(SynthCorpus {
        train: docs.by_ref().take(train_size).collect(),
        dev: docs.by_ref().take(dev_size).collect(),
        test: docs.collect(),
    })
}

impl SynthCorpus {
    /// Word types across all splits, sorted.
    pub fn word_types(&self) -> Vec<String> {
        let mut types = BTreeSet::new();
        for (_, docs) in self.splits() {
            for token in docs.iter().flat_map(|d| d.sentences.iter().flatten()) {
                types.insert(token.clone());
            }
        }
        types.into_iter().collect()
    }

    /// Stand-in pretrained embeddings: `token v1 ... v_dim` per line.
    pub fn embeddings_text(&self, dim: usize, seed: u64) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = String::new();
        for token in self.word_types() {
            out.push_str(&token);
            for _ in 0..dim {
                let v: f64 = rng.gen_range(-PRETRAINED_SCALE..=PRETRAINED_SCALE);
                let _ = write!(out, " {}", v);
            }
            out.push('\n');
        }
        out
    }
}

/// Position of the cue sentence in a root-cue document.
pub fn cue_position(doc: &Document) -> Option<usize> {
    doc.sentences
        .iter()
        .position(|s| s.iter().any(|t| cue_label(t).is_some()))
}
