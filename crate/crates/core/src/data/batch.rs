use ndarray::Array2;

use super::vocab::PAD_INDEX;
use super::{Document, Vocabulary};
use crate::error::{Error, Result};

/// Token indices of one document padded to `slots x token_slots`, with masks
/// marking real sentences and tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedDoc {
    pub tokens: Array2<usize>,
    pub token_mask: Array2<bool>,
    pub sentence_mask: Vec<bool>,
}

impl PaddedDoc {
    /// Pad encoded sentences to the given sizes.
    pub fn new(sentences: &[Vec<usize>], slots: usize, token_slots: usize) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::InvalidInput("document has no sentences".into()));
        }
        if sentences.len() > slots {
            return Err(Error::InvalidInput(format!(
                "{} sentences do not fit in {} slots",
                sentences.len(),
                slots
            )));
        }
        let mut tokens = Array2::from_elem((slots, token_slots), PAD_INDEX);
        let mut token_mask = Array2::from_elem((slots, token_slots), false);
        for (s, sentence) in sentences.iter().enumerate() {
            if sentence.is_empty() || sentence.len() > token_slots {
                return Err(Error::InvalidInput(format!(
                    "sentence {} has {} tokens for {} slots",
                    s + 1,
                    sentence.len(),
                    token_slots
                )));
            }
            for (t, &tok) in sentence.iter().enumerate() {
                tokens[[s, t]] = tok;
                token_mask[[s, t]] = true;
            }
        }
        let sentence_mask = (0..slots).map(|s| s < sentences.len()).collect();
        Ok(PaddedDoc {
            tokens,
            token_mask,
            sentence_mask,
        })
    }

    /// A document padded only as far as its own longest sentence.
    pub fn from_document(doc: &Document, vocab: &Vocabulary) -> Result<Self> {
        let encoded = vocab.encode(doc);
        let longest = encoded.iter().map(Vec::len).max().unwrap_or(0);
        PaddedDoc::new(&encoded, encoded.len(), longest)
    }

    pub fn num_slots(&self) -> usize {
        self.sentence_mask.len()
    }

    pub fn token_slots(&self) -> usize {
        self.tokens.ncols()
    }

    /// Number of real sentences.
    pub fn num_sentences(&self) -> usize {
        self.sentence_mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Corpus positions of the documents in this batch.
    pub indices: Vec<usize>,
    pub docs: Vec<PaddedDoc>,
}

/// Pad a group of documents to the group's sentence and token maxima.
pub fn pad_group(docs: &[&Document], vocab: &Vocabulary) -> Result<Vec<PaddedDoc>> {
    let encoded: Vec<Vec<Vec<usize>>> = docs.iter().map(|d| vocab.encode(d)).collect();
    let slots = encoded.iter().map(Vec::len).max().unwrap_or(0);
    let token_slots = encoded
        .iter()
        .flat_map(|d| d.iter().map(Vec::len))
        .max()
        .unwrap_or(0);
    encoded
        .iter()
        .map(|e| PaddedDoc::new(e, slots, token_slots))
        .collect()
}

/// Bucket documents by sentence count (stable), cut into batches of
/// `batch_size`, and pad each batch to its own maxima.
pub fn batch_and_mask(docs: &[Document], batch_size: usize, vocab: &Vocabulary) -> Result<Vec<Batch>> {
    let order: Vec<usize> = (0..docs.len()).collect();
    batch_indices(docs, &order, batch_size, vocab)
}

/// As [`batch_and_mask`] over a chosen subset/order of documents.
pub fn batch_indices(docs: &[Document], order: &[usize], batch_size: usize, vocab: &Vocabulary) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    let mut order = order.to_vec();
    order.sort_by_key(|&i| docs[i].len());
    order
        .chunks(batch_size)
        .map(|chunk| {
            let group: Vec<&Document> = chunk.iter().map(|&i| &docs[i]).collect();
            Ok(Batch {
                indices: chunk.to_vec(),
                docs: pad_group(&group, vocab)?,
            })
        })
        .collect()
}
