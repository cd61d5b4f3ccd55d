use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtt::{DepTree, Provenance};

/// A pre-tokenized document.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    pub label: Option<usize>,
    pub gold_tree: Option<DepTree>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    sentences: Vec<Vec<String>>,
    /// One-based heads, 0 = ROOT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_tree: Option<Vec<usize>>,
}

impl Document {
    pub fn new(id: impl Into<String>, sentences: Vec<Vec<String>>, label: Option<usize>) -> Result<Self> {
        let doc = Document {
            id: id.into(),
            sentences,
            label,
            gold_tree: None,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sentences.is_empty() {
            return Err(Error::InvalidInput(format!("document '{}' has no sentences", self.id)));
        }
        if let Some(i) = self.sentences.iter().position(Vec::is_empty) {
            return Err(Error::InvalidInput(format!(
                "document '{}': sentence {} is empty",
                self.id,
                i + 1
            )));
        }
        if let Some(tree) = &self.gold_tree {
            if tree.len() != self.sentences.len() {
                return Err(Error::InvalidInput(format!(
                    "document '{}': gold tree has {} nodes for {} sentences",
                    self.id,
                    tree.len(),
                    self.sentences.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> String {
        let record = Record {
            id: self.id.clone(),
            label: self.label,
            sentences: self.sentences.clone(),
            gold_tree: self.gold_tree.as_ref().map(DepTree::one_based_heads),
        };
        serde_json::to_string(&record).expect("documents always serialize")
    }

    pub fn from_json(line: &str) -> Result<Self> {
        let record: Record = serde_json::from_str(line).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let gold_tree = match record.gold_tree {
            Some(heads) => Some(DepTree::from_one_based(&heads, Provenance::ParsedRst)?),
            None => None,
        };
        let doc = Document {
            id: record.id,
            sentences: record.sentences,
            label: record.label,
            gold_tree,
        };
        doc.validate()?;
        Ok(doc)
    }
}

/// Read a JSONL corpus, one document per non-blank line.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = Document::from_json(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        docs.push(doc);
    }
    if docs.is_empty() {
        return Err(Error::parse(path, 0, "corpus is empty"));
    }
    Ok(docs)
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        writeln!(out, "{}", doc.to_json()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
