//! Structured attention over latent dependency trees.
//!
//! The same block is used over the words of a sentence and over the
//! sentences of a document: structure vectors score every parent/child
//! pair, the matrix-tree layer turns the scores into arc marginals, and each
//! node's semantic vector is updated with the marginal-weighted sum of its
//! possible children.

use rand::Rng;

use super::config::Pooling;
use super::lstm::lookup;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};

/// Semantic and structure halves of encoder states, each `n x dim`.
#[derive(Clone, Copy, Debug)]
pub struct SequenceStates {
    pub semantic: Var,
    pub structure: Var,
}

/// Arc scores (`n x n`, row = parent) and root scores (`1 x n`).
#[derive(Clone, Copy, Debug)]
pub struct Scores {
    pub arc: Var,
    pub root: Var,
}

/// Marginals as produced by [`Tape::marginals`]: rows `0..n` are arcs,
/// row `n` the root marginals.
#[derive(Clone, Copy, Debug)]
pub struct Marginals {
    pub arc: Var,
    pub root: Var,
}

impl Marginals {
    pub fn split(tape: &mut Tape, combined: Var, n: usize) -> Self {
        Marginals {
            arc: tape.slice_rows(combined, 0, n),
            root: tape.slice_rows(combined, n, n + 1),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AttentionParams {
    parent: ParamId,
    child: ParamId,
    bilinear: ParamId,
    root: ParamId,
    /// Update map and bias per level; index 0 is the base update.
    updates: Vec<(ParamId, ParamId)>,
}

impl AttentionParams {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        percolation_levels: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let parent = store.insert_uniform(format!("{}.w_parent", prefix), (dim, dim), scale, rng)?;
        let child = store.insert_uniform(format!("{}.w_child", prefix), (dim, dim), scale, rng)?;
        let bilinear = store.insert_uniform(format!("{}.w_bilinear", prefix), (dim, dim), scale, rng)?;
        let root = store.insert_uniform(format!("{}.w_root", prefix), (dim, 1), scale, rng)?;
        let mut updates = Vec::with_capacity(percolation_levels + 1);
        for level in 0..=percolation_levels {
            let w = store.insert_uniform(format!("{}.update{}.w", prefix, level), (2 * dim, dim), scale, rng)?;
            let b = store.insert_zeros(format!("{}.update{}.bias", prefix, level), (1, dim))?;
            updates.push((w, b));
        }
        Ok(AttentionParams {
            parent,
            child,
            bilinear,
            root,
            updates,
        })
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        let mut updates = Vec::new();
        while let Some(w) = store.id(&format!("{}.update{}.w", prefix, updates.len())) {
            let b = lookup(store, &format!("{}.update{}.bias", prefix, updates.len()))?;
            updates.push((w, b));
        }
        if updates.is_empty() {
            return Err(Error::InvalidInput(format!("missing parameter '{}.update0.w'", prefix)));
        }
        Ok(AttentionParams {
            parent: lookup(store, &format!("{}.w_parent", prefix))?,
            child: lookup(store, &format!("{}.w_child", prefix))?,
            bilinear: lookup(store, &format!("{}.w_bilinear", prefix))?,
            root: lookup(store, &format!("{}.w_root", prefix))?,
            updates,
        })
    }

    /// Number of extra percolation levels these parameters support.
    pub fn max_levels(&self) -> usize {
        self.updates.len() - 1
    }

    /// Bilinear arc scores between tanh-transformed structure vectors, and
    /// root scores as a linear functional of the parent transform.
    pub fn structure_scores(&self, tape: &mut Tape, states: &SequenceStates) -> Scores {
        let wp = tape.param(self.parent);
        let wc = tape.param(self.child);
        let wa = tape.param(self.bilinear);
        let wr = tape.param(self.root);

        let tp = tape.matmul(states.structure, wp);
        let tp = tape.tanh(tp);
        let tc = tape.matmul(states.structure, wc);
        let tc = tape.tanh(tc);

        let left = tape.matmul(tp, wa);
        let tc_t = tape.transpose(tc);
        let arc = tape.matmul(left, tc_t);

        let root = tape.matmul(tp, wr);
        let root = tape.transpose(root);
        Scores { arc, root }
    }

    /// `e'_i = tanh(W [e_i; c_i] + b)` with `c_i = sum_k a_ik e_k`.
    pub fn attention_update(&self, tape: &mut Tape, states: &SequenceStates, marginals: &Marginals) -> Var {
        self.update_level(tape, states.semantic, marginals, 0)
    }

    /// Apply `levels` further rounds of child aggregation, each with its own
    /// update parameters. Zero levels return `semantic` unchanged.
    pub fn percolate(&self, tape: &mut Tape, semantic: Var, marginals: &Marginals, levels: usize) -> Result<Var> {
        if levels > self.max_levels() {
            return Err(Error::InvalidInput(format!(
                "{} percolation levels requested, parameters support {}",
                levels,
                self.max_levels()
            )));
        }
        let mut current = semantic;
        for level in 1..=levels {
            current = self.update_level(tape, current, marginals, level);
        }
        Ok(current)
    }

    fn update_level(&self, tape: &mut Tape, semantic: Var, marginals: &Marginals, level: usize) -> Var {
        let (w, b) = self.updates[level];
        let context = tape.matmul(marginals.arc, semantic);
        let joined = tape.concat_cols(semantic, context);
        let w = tape.param(w);
        let b = tape.param(b);
        let z = tape.matmul(joined, w);
        let z = tape.add_row(z, b);
        tape.tanh(z)
    }
}

/// Collapse `n x dim` vectors to one `1 x dim` vector over the valid rows.
pub fn pool(tape: &mut Tape, vectors: Var, marginals: Option<&Marginals>, mode: Pooling, valid: &[bool]) -> Result<Var> {
    if !valid.iter().any(|&v| v) {
        return Err(Error::InvalidInput("pooling over zero valid positions".into()));
    }
    match mode {
        Pooling::Max => Ok(tape.max_pool(vectors, valid)),
        Pooling::RootWeighted => {
            let m = marginals.ok_or_else(|| {
                Error::InvalidInput("root-weighted pooling needs root marginals".into())
            })?;
            // Masked root marginals are exactly zero.
            Ok(tape.matmul(m.root, vectors))
        }
    }
}
