use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Document;
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Range of the uniform draw for embeddings not supplied by a file.
pub const OOV_SCALE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    embeddings: Array2<f64>,
}

impl Vocabulary {
    fn with_specials(dim: usize, rng: &mut ChaCha8Rng) -> (Vec<String>, HashMap<String, usize>, Vec<f64>) {
        let tokens = vec![PAD.to_string(), UNK.to_string()];
        let index = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let mut rows = vec![0.0; dim];
        rows.extend((0..dim).map(|_| rng.gen_range(-OOV_SCALE..=OOV_SCALE)));
        (tokens, index, rows)
    }

    /// Every token type in `docs`, in order of first appearance, with seeded
    /// random embeddings. No frequency threshold is applied.
    pub fn from_corpus(docs: &[Document], dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut tokens, mut index, mut rows) = Self::with_specials(dim, &mut rng);
        for token in docs.iter().flat_map(|d| d.sentences.iter().flatten()) {
            if !index.contains_key(token) {
                index.insert(token.clone(), tokens.len());
                tokens.push(token.clone());
                rows.extend((0..dim).map(|_| rng.gen_range(-OOV_SCALE..=OOV_SCALE)));
            }
        }
        let embeddings = Array2::from_shape_vec((tokens.len(), dim), rows).expect("row-major buffer");
        Vocabulary {
            tokens,
            index,
            embeddings,
        }
    }

    /// Rebuild from a token list and matching embedding rows.
    pub fn from_parts(tokens: Vec<String>, embeddings: Array2<f64>) -> Result<Self> {
        if tokens.len() != embeddings.nrows() {
            return Err(Error::InvalidInput(format!(
                "{} tokens for {} embedding rows",
                tokens.len(),
                embeddings.nrows()
            )));
        }
        if tokens.len() < 2 || tokens[PAD_INDEX] != PAD || tokens[UNK_INDEX] != UNK {
            return Err(Error::InvalidInput("vocabulary must start with PAD and UNK".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary token '{}'", t)));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn embeddings(&self) -> &Array2<f64> {
        &self.embeddings
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, falling back to UNK.
    pub fn lookup(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_INDEX)
    }

    pub fn encode(&self, doc: &Document) -> Vec<Vec<usize>> {
        doc.sentences
            .iter()
            .map(|s| s.iter().map(|t| self.lookup(t)).collect())
            .collect()
    }
}

/// Load whitespace-separated text embeddings (`token v1 ... v_dim` per line).
///
/// PAD is a zero row and UNK a seeded random row; corpus tokens missing from
/// the file map to UNK.
pub fn load_embeddings(path: impl AsRef<Path>, dim: usize, seed: u64) -> Result<Vocabulary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tokens, mut index, mut rows) = Vocabulary::with_specials(dim, &mut rng);

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let token = match fields.next() {
            Some(t) => t,
            None => continue,
        };
        let values = fields
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if values.len() != dim {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {} values, found {}", dim, values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, i + 1, "non-finite embedding value"));
        }
        if index.contains_key(token) {
            return Err(Error::parse(path, i + 1, format!("duplicate token '{}'", token)));
        }
        index.insert(token.to_string(), tokens.len());
        tokens.push(token.to_string());
        rows.extend(values);
    }

    let embeddings = Array2::from_shape_vec((tokens.len(), dim), rows).expect("row-major buffer");
    Ok(Vocabulary {
        tokens,
        index,
        embeddings,
    })
}
