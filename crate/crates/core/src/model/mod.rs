//! The hierarchical structured attention document model.
//!
//! Words are embedded and encoded per sentence with a biLSTM, optionally
//! refined with structured attention over a latent tree of words, and max
//! pooled into sentence vectors. Sentence vectors are encoded again (biLSTM,
//! or a per-sentence linear map), refined with structured attention over a
//! latent tree of sentences, pooled and mapped to class logits or a single
//! coherence score.

mod attention;
mod checkpoint;
mod config;
mod lstm;

use ndarray::{Array1, Array2};
use rand::Rng;

pub use attention::{pool, AttentionParams, Marginals, Scores, SequenceStates};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{ModelConfig, Pooling, Task, MAX_PERCOLATION_LEVELS};
pub use lstm::{BiLstm, Lstm};

use crate::autodiff::{Tape, Var};
use crate::data::PaddedDoc;
use crate::error::{Error, Result};
use crate::mtt::{MarginalTable, PotentialTable};
use crate::params::{Gradients, ParamId, ParamStore};
use lstm::lookup;

/// Half-width of the uniform initialization range for weight matrices.
pub const INIT_SCALE: f64 = 0.05;

#[derive(Clone, Debug)]
enum SequenceEncoder {
    BiLstm(BiLstm),
    /// Position-independent linear map, used when the document biLSTM is removed.
    Projection { weights: ParamId, bias: ParamId },
}

impl SequenceEncoder {
    /// Encode a single sequence given as `n x input` rows.
    fn encode_rows(&self, tape: &mut Tape, inputs: Var, mask: &[bool]) -> Var {
        match self {
            SequenceEncoder::BiLstm(lstm) => {
                let n = mask.len();
                let steps: Vec<Var> = (0..n).map(|t| tape.slice_rows(inputs, t, t + 1)).collect();
                let step_mask: Vec<Vec<bool>> = mask.iter().map(|&m| vec![m]).collect();
                let outputs = lstm.run(tape, &steps, &step_mask);
                tape.stack_rows(outputs)
            }
            SequenceEncoder::Projection { weights, bias } => {
                let w = tape.param(*weights);
                let b = tape.param(*bias);
                let z = tape.matmul(inputs, w);
                let z = tape.add_row(z, b);
                if mask.iter().all(|&m| m) {
                    z
                } else {
                    tape.mask_rows(z, mask)
                }
            }
        }
    }
}

/// Split `n x hidden` states into semantic and structure halves.
pub fn split_states(tape: &mut Tape, states: Var) -> SequenceStates {
    let hidden = tape.value(states).ncols();
    SequenceStates {
        semantic: tape.slice_cols(states, 0, hidden / 2),
        structure: tape.slice_cols(states, hidden / 2, hidden),
    }
}

/// Split `[forward; backward]` biLSTM states so that the semantic and the
/// structure part each take one half of every direction.
pub fn split_bidirectional(tape: &mut Tape, states: Var) -> SequenceStates {
    let hidden = tape.value(states).ncols();
    let q = hidden / 4;
    let fw_sem = tape.slice_cols(states, 0, q);
    let fw_str = tape.slice_cols(states, q, 2 * q);
    let bw_sem = tape.slice_cols(states, 2 * q, 3 * q);
    let bw_str = tape.slice_cols(states, 3 * q, 4 * q);
    SequenceStates {
        semantic: tape.concat_cols(fw_sem, bw_sem),
        structure: tape.concat_cols(fw_str, bw_str),
    }
}

/// Document-level structure recorded during a forward pass.
#[derive(Clone, Copy, Debug)]
pub struct DocStructure {
    pub scores: Scores,
    pub marginals: Marginals,
}

#[derive(Clone, Debug)]
pub struct Forward {
    /// `1 x output_dim`: class logits or a coherence score.
    pub output: Var,
    pub doc: Option<DocStructure>,
    pub sentence_mask: Vec<bool>,
    /// Number of matrix-tree evaluations performed (both levels).
    pub tree_layers: usize,
}

/// Plain values of one forward pass, restricted to the real sentences.
#[derive(Clone, Debug)]
pub struct DocumentAnalysis {
    pub output: Array1<f64>,
    pub potentials: Option<PotentialTable>,
    pub marginals: Option<MarginalTable>,
    pub tree_layers: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Loss {
    pub value: Var,
    pub correct: bool,
}

/// Index of the first maximum.
pub fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// One training example.
#[derive(Clone, Copy, Debug)]
pub enum Example<'a> {
    Labeled { doc: &'a PaddedDoc, label: usize },
    /// The original order should outscore the permuted one.
    Pair { original: &'a PaddedDoc, permuted: &'a PaddedDoc },
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    embedding: ParamId,
    word_encoder: BiLstm,
    word_attention: Option<AttentionParams>,
    doc_encoder: SequenceEncoder,
    doc_attention: Option<AttentionParams>,
    head_weights: ParamId,
    head_bias: ParamId,
}

impl Model {
    /// Fresh parameters around a given embedding matrix (`vocab x embed_dim`).
    pub fn init<R: Rng>(config: ModelConfig, embedding: Array2<f64>, rng: &mut R) -> Result<(Model, ParamStore)> {
        config.validate()?;
        if embedding.ncols() != config.embed_dim {
            return Err(Error::Config(format!(
                "embedding width {} does not match embed_dim {}",
                embedding.ncols(),
                config.embed_dim
            )));
        }
        let hidden = config.hidden_dim;
        let half = config.half_dim();
        let s = INIT_SCALE;

        let mut store = ParamStore::new();
        let embedding = store.insert("embedding", embedding)?;
        let word_encoder = BiLstm::init(&mut store, "word.lstm", config.embed_dim, hidden, s, rng)?;
        let word_attention = if config.sent_attention {
            Some(AttentionParams::init(&mut store, "word.attention", half, 0, s, rng)?)
        } else {
            None
        };
        let doc_encoder = if config.doc_bilstm {
            SequenceEncoder::BiLstm(BiLstm::init(&mut store, "doc.lstm", half, hidden, s, rng)?)
        } else {
            SequenceEncoder::Projection {
                weights: store.insert_uniform("doc.projection.w", (half, hidden), s, rng)?,
                bias: store.insert_zeros("doc.projection.bias", (1, hidden))?,
            }
        };
        let doc_attention = if config.doc_attention {
            Some(AttentionParams::init(
                &mut store,
                "doc.attention",
                half,
                config.percolation_levels,
                s,
                rng,
            )?)
        } else {
            None
        };
        let head_weights = store.insert_uniform("head.w", (half, config.output_dim()), s, rng)?;
        let head_bias = store.insert_zeros("head.bias", (1, config.output_dim()))?;

        let model = Model {
            config,
            embedding,
            word_encoder,
            word_attention,
            doc_encoder,
            doc_attention,
            head_weights,
            head_bias,
        };
        Ok((model, store))
    }

    /// Rebind a model to parameters loaded from a checkpoint.
    pub fn from_store(config: ModelConfig, store: &ParamStore) -> Result<Model> {
        config.validate()?;
        let doc_encoder = if config.doc_bilstm {
            SequenceEncoder::BiLstm(BiLstm::from_store(store, "doc.lstm")?)
        } else {
            SequenceEncoder::Projection {
                weights: lookup(store, "doc.projection.w")?,
                bias: lookup(store, "doc.projection.bias")?,
            }
        };
        let doc_attention = if config.doc_attention {
            let params = AttentionParams::from_store(store, "doc.attention")?;
            if params.max_levels() != config.percolation_levels {
                return Err(Error::Config(format!(
                    "checkpoint has {} percolation levels, config asks for {}",
                    params.max_levels(),
                    config.percolation_levels
                )));
            }
            Some(params)
        } else {
            None
        };
        let embedding = lookup(store, "embedding")?;
        if store.get(embedding).ncols() != config.embed_dim {
            return Err(Error::Config("checkpoint embedding width differs from embed_dim".into()));
        }
        Ok(Model {
            embedding,
            word_encoder: BiLstm::from_store(store, "word.lstm")?,
            word_attention: if config.sent_attention {
                Some(AttentionParams::from_store(store, "word.attention")?)
            } else {
                None
            },
            doc_encoder,
            doc_attention,
            head_weights: lookup(store, "head.w")?,
            head_bias: lookup(store, "head.bias")?,
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn embedding_id(&self) -> ParamId {
        self.embedding
    }

    pub fn vocab_size(&self, store: &ParamStore) -> usize {
        store.get(self.embedding).nrows()
    }

    pub fn doc_attention_params(&self) -> Option<&AttentionParams> {
        self.doc_attention.as_ref()
    }

    pub fn word_attention_params(&self) -> Option<&AttentionParams> {
        self.word_attention.as_ref()
    }

    /// Document-level encoding of `n x (hidden_dim / 2)` sentence vectors
    /// (biLSTM, or the per-sentence projection when `doc_bilstm` is off).
    pub fn encode_sequence(&self, tape: &mut Tape, inputs: Var, mask: &[bool]) -> Result<SequenceStates> {
        let (rows, cols) = tape.value(inputs).dim();
        if rows == 0 || rows != mask.len() {
            return Err(Error::InvalidInput(format!("{} inputs with a mask of {}", rows, mask.len())));
        }
        if cols != self.config.half_dim() {
            return Err(Error::InvalidInput(format!(
                "inputs have width {}, expected {}",
                cols,
                self.config.half_dim()
            )));
        }
        let encoded = self.doc_encoder.encode_rows(tape, inputs, mask);
        Ok(match self.doc_encoder {
            SequenceEncoder::BiLstm(_) => split_bidirectional(tape, encoded),
            SequenceEncoder::Projection { .. } => split_states(tape, encoded),
        })
    }

    /// Record the forward pass for one (possibly padded) document.
    pub fn forward(&self, tape: &mut Tape, doc: &PaddedDoc) -> Result<Forward> {
        let num_sentences = doc.num_slots();
        let num_tokens = doc.token_slots();
        if doc.num_sentences() == 0 {
            return Err(Error::InvalidInput("document has no sentences".into()));
        }
        let half = self.config.half_dim();
        let mut tree_layers = 0;

        // Word level: all sentences are encoded together, one row each.
        let embedding = tape.param(self.embedding);
        let steps: Vec<Var> = (0..num_tokens)
            .map(|t| tape.gather(embedding, doc.tokens.column(t).to_vec()))
            .collect();
        let step_mask: Vec<Vec<bool>> = (0..num_tokens).map(|t| doc.token_mask.column(t).to_vec()).collect();
        let word_states = self.word_encoder.run(tape, &steps, &step_mask);

        let mut sentence_vectors = Vec::with_capacity(num_sentences);
        for s in 0..num_sentences {
            if !doc.sentence_mask[s] {
                sentence_vectors.push(tape.constant(Array2::zeros((1, half))));
                continue;
            }
            let token_mask = doc.token_mask.row(s).to_vec();
            let states = tape.pick_row(word_states.clone(), s);
            let states = split_bidirectional(tape, states);
            let semantic = match &self.word_attention {
                Some(attention) => {
                    let scores = attention.structure_scores(tape, &states);
                    let m = tape.marginals(scores.arc, scores.root, &token_mask)?;
                    tree_layers += 1;
                    let m = Marginals::split(tape, m, num_tokens);
                    attention.attention_update(tape, &states, &m)
                }
                None => states.semantic,
            };
            sentence_vectors.push(pool(tape, semantic, None, Pooling::Max, &token_mask)?);
        }
        let sentences = tape.stack_rows(sentence_vectors);

        // Document level.
        let sentence_mask = doc.sentence_mask.clone();
        let states = self.encode_sequence(tape, sentences, &sentence_mask)?;

        let (pooled, structure) = match &self.doc_attention {
            Some(attention) => {
                let scores = attention.structure_scores(tape, &states);
                let m = tape.marginals(scores.arc, scores.root, &sentence_mask)?;
                tree_layers += 1;
                let marginals = Marginals::split(tape, m, num_sentences);
                let updated = attention.attention_update(tape, &states, &marginals);
                let updated = attention.percolate(tape, updated, &marginals, self.config.percolation_levels)?;
                let pooled = pool(tape, updated, Some(&marginals), self.config.pooling, &sentence_mask)?;
                (pooled, Some(DocStructure { scores, marginals }))
            }
            None => (pool(tape, states.semantic, None, Pooling::Max, &sentence_mask)?, None),
        };

        let w = tape.param(self.head_weights);
        let b = tape.param(self.head_bias);
        let output = tape.matmul(pooled, w);
        let output = tape.add_row(output, b);

        Ok(Forward {
            output,
            doc: structure,
            sentence_mask,
            tree_layers,
        })
    }

    /// Forward pass values for one document, without gradients.
    pub fn analyze(&self, params: &ParamStore, doc: &PaddedDoc) -> Result<DocumentAnalysis> {
        let mut tape = Tape::new(params);
        let fwd = self.forward(&mut tape, doc)?;
        let output = tape.value(fwd.output).row(0).to_owned();

        let (potentials, marginals) = match fwd.doc {
            Some(structure) => {
                let table = tape.potential_table(structure.scores.arc, structure.scores.root, &fwd.sentence_mask)?;
                let marginals = crate::mtt::marginals(&table)?;
                let table = table.compact();
                let valid: Vec<usize> = (0..fwd.sentence_mask.len()).filter(|&i| fwd.sentence_mask[i]).collect();
                let compact = MarginalTable {
                    arc: Array2::from_shape_fn((valid.len(), valid.len()), |(a, b)| {
                        marginals.arc[[valid[a], valid[b]]]
                    }),
                    root: Array1::from_shape_fn(valid.len(), |a| marginals.root[valid[a]]),
                    log_z: marginals.log_z,
                };
                (Some(table), Some(compact))
            }
            None => (None, None),
        };

        Ok(DocumentAnalysis {
            output,
            potentials,
            marginals,
            tree_layers: fwd.tree_layers,
        })
    }

    /// Task loss for one example, recorded on `tape`, and whether the model
    /// currently gets the example right.
    pub fn loss(&self, tape: &mut Tape, example: Example<'_>) -> Result<Loss> {
        match example {
            Example::Labeled { doc, label } => {
                if self.config.task != Task::Classification {
                    return Err(Error::InvalidInput("labeled example for an ordering model".into()));
                }
                if label >= self.config.num_classes {
                    return Err(Error::InvalidInput(format!(
                        "label {} outside 0..{}",
                        label, self.config.num_classes
                    )));
                }
                let fwd = self.forward(tape, doc)?;
                let correct = argmax(tape.value(fwd.output).row(0).iter().copied()) == label;
                Ok(Loss {
                    value: tape.cross_entropy(fwd.output, label),
                    correct,
                })
            }
            Example::Pair { original, permuted } => {
                if self.config.task != Task::Ordering {
                    return Err(Error::InvalidInput("ordering pair for a classification model".into()));
                }
                let pos = self.forward(tape, original)?.output;
                let neg = self.forward(tape, permuted)?.output;
                let correct = tape.scalar(pos) > tape.scalar(neg);
                Ok(Loss {
                    value: tape.hinge(pos, neg, self.config.margin),
                    correct,
                })
            }
        }
    }

    /// Loss value, correctness and parameter gradients for one example.
    pub fn loss_and_gradients(&self, params: &ParamStore, example: Example<'_>) -> Result<(f64, Gradients)> {
        self.evaluate_example(params, example, true)
            .map(|(loss, _, grads)| (loss, grads.expect("gradients requested")))
    }

    pub fn evaluate_example(
        &self,
        params: &ParamStore,
        example: Example<'_>,
        with_gradients: bool,
    ) -> Result<(f64, bool, Option<Gradients>)> {
        let mut tape = Tape::new(params);
        let loss = self.loss(&mut tape, example)?;
        let value = tape.scalar(loss.value);
        if !value.is_finite() {
            return Err(Error::Numerical(format!("loss is {}", value)));
        }
        let grads = if with_gradients {
            Some(tape.backward(loss.value)?)
        } else {
            None
        };
        Ok((value, loss.correct, grads))
    }

    /// Class logits, or the coherence score as a length-1 vector.
    pub fn predict(&self, params: &ParamStore, doc: &PaddedDoc) -> Result<Array1<f64>> {
        let mut tape = Tape::new(params);
        let fwd = self.forward(&mut tape, doc)?;
        Ok(tape.value(fwd.output).row(0).to_owned())
    }
}
