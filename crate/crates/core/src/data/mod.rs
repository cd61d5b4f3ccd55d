//! Corpora, vocabularies, sentence-order pairs, and padded batches.

mod batch;
mod corpus;
mod pairs;
mod vocab;

pub use batch::{batch_and_mask, batch_indices, pad_group, Batch, PaddedDoc};
pub use corpus::{load_corpus, write_corpus, Document};
pub use pairs::{corpus_pairs, document_seed, format_permutation, generate_permutation_pairs, OrderPair};
pub use vocab::{load_embeddings, Vocabulary, OOV_SCALE, PAD, PAD_INDEX, UNK, UNK_INDEX};
