//! Text checkpoints of named tensors.
//!
//! ```text
//! docstruct-checkpoint v1
//! config <key> <value>          one line per ModelConfig field
//! meta <key> <value>            free-form run metadata
//! vocab <count>
//! "<token>"                     JSON-quoted, one per line
//! tensor <name> <rows> <cols>
//! <row-major values>            whitespace separated, shortest round-trip form
//! state <name> <rows> <cols>    optimizer accumulators, same layout as tensors
//! <values>
//! end
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::config::ModelConfig;
use super::Model;
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::params::ParamStore;

const MAGIC: &str = "docstruct-checkpoint v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vec<String>,
    pub params: ParamStore,
    /// Adagrad accumulators with the same layout as `params`.
    pub optimizer: Option<ParamStore>,
    pub meta: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// The model and the vocabulary with its trained embedding rows.
    pub fn restore(&self) -> Result<(Model, Vocabulary)> {
        let model = Model::from_store(self.config.clone(), &self.params)?;
        let embedding = self.params.get(model.embedding_id()).clone();
        let vocab = Vocabulary::from_parts(self.vocab.clone(), embedding)?;
        Ok((model, vocab))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for (k, v) in self.config.to_pairs() {
            out.push_str(&format!("config {} {}\n", k, v));
        }
        for (k, v) in &self.meta {
            out.push_str(&format!("meta {} {}\n", k, v));
        }
        out.push_str(&format!("vocab {}\n", self.vocab.len()));
        for token in &self.vocab {
            out.push_str(&serde_json::to_string(token).expect("strings serialize"));
            out.push('\n');
        }
        write_tensors(&mut out, "tensor", &self.params);
        if let Some(state) = &self.optimizer {
            write_tensors(&mut out, "state", state);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err((1, format!("missing '{}' header", MAGIC))),
        }

        let mut config = ModelConfig::default();
        let mut meta = Vec::new();
        let mut vocab = Vec::new();
        let mut params = ParamStore::new();
        let mut optimizer: Option<ParamStore> = None;
        let mut finished = false;

        while let Some((no, line)) = lines.next() {
            let mut fields = line.splitn(2, ' ');
            let kind = fields.next().unwrap_or("");
            let rest = fields.next().unwrap_or("");
            match kind {
                "config" => {
                    let (k, v) = rest.split_once(' ').ok_or((no, "malformed config line".to_string()))?;
                    match config.set(k, v) {
                        Ok(true) => {}
                        Ok(false) => return Err((no, format!("unknown config key '{}'", k))),
                        Err(e) => return Err((no, e.to_string())),
                    }
                }
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.push((k.to_string(), v.to_string()));
                }
                "vocab" => {
                    let count: usize = rest.parse().map_err(|_| (no, "bad vocab count".to_string()))?;
                    for _ in 0..count {
                        let (tno, tline) = lines.next().ok_or((no, "truncated vocabulary".to_string()))?;
                        let token: String =
                            serde_json::from_str(tline).map_err(|e| (tno, format!("bad token: {}", e)))?;
                        vocab.push(token);
                    }
                }
                "tensor" | "state" => {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    if parts.len() != 3 {
                        return Err((no, "expected '<name> <rows> <cols>'".into()));
                    }
                    let rows: usize = parts[1].parse().map_err(|_| (no, "bad row count".to_string()))?;
                    let cols: usize = parts[2].parse().map_err(|_| (no, "bad column count".to_string()))?;
                    let (vno, vline) = lines.next().ok_or((no, "missing tensor values".to_string()))?;
                    let values = vline
                        .split_whitespace()
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<Vec<f64>, _>>()
                        .map_err(|e| (vno, e.to_string()))?;
                    let value = Array2::from_shape_vec((rows, cols), values)
                        .map_err(|_| (vno, format!("expected {} values", rows * cols)))?;
                    let store = if kind == "tensor" {
                        &mut params
                    } else {
                        optimizer.get_or_insert_with(ParamStore::new)
                    };
                    store.insert(parts[0], value).map_err(|e| (no, e.to_string()))?;
                }
                "end" => {
                    finished = true;
                    break;
                }
                "" => {}
                other => return Err((no, format!("unknown record '{}'", other))),
            }
        }
        if !finished {
            return Err((text.lines().count(), "truncated checkpoint (no 'end')".into()));
        }
        if let Some(state) = &optimizer {
            if !state.same_layout(&params) {
                return Err((0, "optimizer state layout differs from parameters".into()));
            }
        }
        Ok(Checkpoint {
            config,
            vocab,
            params,
            optimizer,
            meta,
        })
    }
}

fn write_tensors(out: &mut String, kind: &str, store: &ParamStore) {
    for (name, value) in store.iter() {
        out.push_str(&format!("{} {} {} {}\n", kind, name, value.nrows(), value.ncols()));
        let mut first = true;
        for v in value.iter() {
            if !first {
                out.push(' ');
            }
            first = false;
            out.push_str(&format!("{:e}", v));
        }
        out.push('\n');
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_text(&text).map_err(|(line, message)| Error::parse(path, line, message))
}
