//! Single-root non-projective dependency tree distributions.
//!
//! The partition function and arc marginals are computed with the
//! matrix-tree theorem, following the single-root construction of Koo et
//! al. (2007): the Laplacian of the exponentiated arc scores has its first
//! row replaced by the exponentiated root scores, and its determinant sums
//! the weights of all spanning arborescences with exactly one ROOT child.
//!
//! Everything here is a pure function of its inputs.

mod cle;
mod enumerate;
mod partition;
mod tree;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub use cle::cle_best_tree;
pub use enumerate::{enumerate_trees, MAX_ENUMERATION_NODES};
pub use partition::{log_partition, marginals, marginals_backward, CONDITION_LIMIT};
pub use tree::{DepTree, Provenance};

/// Unnormalized arc and root scores for one sequence.
///
/// `arc[[i, j]]` scores `i` as the parent of `j`; `root[i]` scores `i` as
/// the single child of ROOT. The diagonal of `arc` is never read. Positions
/// with `mask[i] == false` carry no probability mass.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTable {
    arc: Array2<f64>,
    root: Array1<f64>,
    mask: Vec<bool>,
}

impl PotentialTable {
    pub fn new(arc: Array2<f64>, root: Array1<f64>) -> Result<Self> {
        let n = root.len();
        PotentialTable::with_mask(arc, root, vec![true; n])
    }

    pub fn with_mask(arc: Array2<f64>, root: Array1<f64>, mask: Vec<bool>) -> Result<Self> {
        let n = root.len();
        if arc.nrows() != n || arc.ncols() != n || mask.len() != n {
            return Err(Error::InvalidInput(format!(
                "potential shapes disagree: arc {:?}, root {}, mask {}",
                arc.shape(),
                n,
                mask.len()
            )));
        }
        for i in 0..n {
            if !mask[i] {
                continue;
            }
            if !root[i].is_finite() {
                return Err(Error::InvalidInput(format!("root score {} is not finite", i)));
            }
            for j in 0..n {
                if i != j && mask[j] && !arc[[i, j]].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "arc score ({}, {}) is not finite",
                        i, j
                    )));
                }
            }
        }
        Ok(PotentialTable { arc, root, mask })
    }

    pub fn len(&self) -> usize {
        self.root.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    pub fn arc(&self) -> &Array2<f64> {
        &self.arc
    }

    pub fn root(&self) -> &Array1<f64> {
        &self.root
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Indices of unmasked positions.
    pub fn valid_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn is_fully_valid(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// The table restricted to its unmasked positions.
    pub fn compact(&self) -> PotentialTable {
        let valid = self.valid_positions();
        let m = valid.len();
        let arc = Array2::from_shape_fn((m, m), |(a, b)| self.arc[[valid[a], valid[b]]]);
        let root = Array1::from_shape_fn(m, |a| self.root[valid[a]]);
        PotentialTable {
            arc,
            root,
            mask: vec![true; m],
        }
    }

    /// Total score of a tree: its arc scores plus the root score of each ROOT child.
    pub fn tree_score(&self, tree: &DepTree) -> f64 {
        tree.heads()
            .iter()
            .enumerate()
            .map(|(j, head)| match head {
                Some(h) => self.arc[[*h, j]],
                None => self.root[j],
            })
            .sum()
    }
}

/// Arc and root marginals plus the log-partition function.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalTable {
    /// `arc[[i, j]]`: probability that `i` is the parent of `j`.
    pub arc: Array2<f64>,
    /// `root[i]`: probability that `i` is the ROOT child.
    pub root: Array1<f64>,
    pub log_z: f64,
}

impl MarginalTable {
    pub fn len(&self) -> usize {
        self.root.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    /// Distribution over the parent of `child`: arc marginals followed by the
    /// root marginal.
    pub fn parent_distribution(&self, child: usize) -> Vec<f64> {
        let mut dist: Vec<f64> = (0..self.len())
            .filter(|&i| i != child)
            .map(|i| self.arc[[i, child]])
            .collect();
        dist.push(self.root[child]);
        dist
    }
}

/// Upstream gradients with respect to a [`MarginalTable`].
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalGrad {
    pub arc: Array2<f64>,
    pub root: Array1<f64>,
    pub log_z: f64,
}

impl MarginalGrad {
    pub fn zeros(n: usize) -> Self {
        MarginalGrad {
            arc: Array2::zeros((n, n)),
            root: Array1::zeros(n),
            log_z: 0.0,
        }
    }
}

/// Gradients with respect to a [`PotentialTable`].
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialGrad {
    pub arc: Array2<f64>,
    pub root: Array1<f64>,
}
