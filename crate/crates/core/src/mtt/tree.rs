use std::fmt;

use crate::error::{Error, Result};

/// Where a dependency tree came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Decoded from learned potentials.
    Induced,
    /// Converted from a parsed RST discourse tree.
    ParsedRst,
    Fixture,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Provenance::Induced => "induced",
            Provenance::ParsedRst => "parsed-rst",
            Provenance::Fixture => "fixture",
        };
        f.write_str(name)
    }
}

/// A rooted, unlabeled dependency tree over `n` nodes.
///
/// Nodes are 0-based. `heads[j] == None` means node `j` is attached to the
/// virtual ROOT.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DepTree {
    heads: Vec<Option<usize>>,
    provenance: Provenance,
}

impl DepTree {
    /// Construct a tree and check that it is an arborescence.
    ///
    /// Induced trees must additionally have exactly one ROOT child.
    pub fn new(heads: Vec<Option<usize>>, provenance: Provenance) -> Result<Self> {
        let tree = DepTree { heads, provenance };
        tree.validate()?;
        Ok(tree)
    }

    /// Build a tree from 1-based heads where 0 denotes ROOT.
    pub fn from_one_based(heads: &[usize], provenance: Provenance) -> Result<Self> {
        let heads = heads
            .iter()
            .map(|&h| if h == 0 { None } else { Some(h - 1) })
            .collect();
        DepTree::new(heads, provenance)
    }

    pub(crate) fn new_unchecked(heads: Vec<Option<usize>>, provenance: Provenance) -> Self {
        DepTree { heads, provenance }
    }

    fn validate(&self) -> Result<()> {
        let n = self.heads.len();
        if n == 0 {
            return Err(Error::InvalidInput("dependency tree has no nodes".into()));
        }

        for (child, head) in self.heads.iter().enumerate() {
            if let Some(h) = *head {
                if h >= n {
                    return Err(Error::InvalidInput(format!(
                        "node {} has head {} outside 0..{}",
                        child, h, n
                    )));
                }
                if h == child {
                    return Err(Error::InvalidInput(format!("node {} is its own head", child)));
                }
            }
        }

        if self.root_children().is_empty() {
            return Err(Error::InvalidInput("no node is attached to ROOT".into()));
        }
        if self.provenance == Provenance::Induced && self.root_children().len() != 1 {
            return Err(Error::InvalidInput(format!(
                "induced tree must have exactly one ROOT child, found {}",
                self.root_children().len()
            )));
        }

        // Every node must reach ROOT within n steps.
        for start in 0..n {
            let mut node = start;
            let mut steps = 0;
            while let Some(h) = self.heads[node] {
                node = h;
                steps += 1;
                if steps > n {
                    return Err(Error::InvalidInput(format!(
                        "node {} is on a cycle or does not reach ROOT",
                        start
                    )));
                }
            }
        }

        Ok(())
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn heads(&self) -> &[Option<usize>] {
        &self.heads
    }

    pub fn head(&self, node: usize) -> Option<usize> {
        self.heads[node]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Heads in 1-based form, 0 for ROOT.
    pub fn one_based_heads(&self) -> Vec<usize> {
        self.heads.iter().map(|h| h.map_or(0, |h| h + 1)).collect()
    }

    /// Nodes attached directly to ROOT, in position order.
    pub fn root_children(&self) -> Vec<usize> {
        self.heads
            .iter()
            .enumerate()
            .filter(|(_, h)| h.is_none())
            .map(|(j, _)| j)
            .collect()
    }

    /// Children of every node, in position order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.heads.len()];
        for (child, head) in self.heads.iter().enumerate() {
            if let Some(h) = *head {
                children[h].push(child);
            }
        }
        children
    }

    /// Number of edges from the virtual ROOT to each node (ROOT children have depth 1).
    pub fn depths(&self) -> Vec<usize> {
        let n = self.heads.len();
        let mut depth = vec![0usize; n];
        for start in 0..n {
            if depth[start] != 0 {
                continue;
            }
            let mut path = vec![start];
            let mut node = start;
            let mut base = 0;
            while let Some(h) = self.heads[node] {
                if depth[h] != 0 {
                    base = depth[h];
                    break;
                }
                path.push(h);
                node = h;
            }
            for (offset, &v) in path.iter().rev().enumerate() {
                depth[v] = base + offset + 1;
            }
        }
        depth
    }
}
