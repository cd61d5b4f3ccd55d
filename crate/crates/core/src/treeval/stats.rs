use crate::error::{Error, Result};
use crate::mtt::{cle_best_tree, DepTree, MarginalTable, PotentialTable, Provenance};

/// Highest-scoring single-root tree under the potentials, marked as induced.
pub fn extract_tree(potentials: &PotentialTable) -> Result<DepTree> {
    let (tree, _) = cle_best_tree(potentials)?;
    Ok(tree.with_provenance(Provenance::Induced))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeStats {
    /// Edges on the longest path from the virtual ROOT.
    pub height: f64,
    /// Share of sentence nodes without children.
    pub leaf_proportion: f64,
    /// Mean |parent - child| over sentence-to-sentence arcs, divided by n.
    pub norm_arc_length: f64,
    pub vacuous: bool,
    /// Mean parent entropy in nats; needs marginals.
    pub parent_entropy: Option<f64>,
}

/// Root sentence among the first two or last two sentences, with every other
/// sentence directly attached to it. Needs at least two sentences.
pub fn is_vacuous(tree: &DepTree) -> bool {
    let n = tree.len();
    let roots = tree.root_children();
    if n < 2 || roots.len() != 1 {
        return false;
    }
    let root = roots[0];
    let edge_position = root <= 1 || root + 2 >= n;
    edge_position && (0..n).all(|j| j == root || tree.head(j) == Some(root))
}

/// Shannon entropy (nats) of each node's parent distribution, averaged.
pub fn parent_entropy(marginals: &MarginalTable) -> f64 {
    let n = marginals.len();
    if n == 0 {
        return 0.0;
    }
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    let total: f64 = (0..n)
        .map(|j| marginals.parent_distribution(j).into_iter().map(h).sum::<f64>())
        .sum();
    total / n as f64
}

pub fn tree_statistics(tree: &DepTree, marginals: Option<&MarginalTable>) -> Result<TreeStats> {
    let n = tree.len();
    if n == 0 {
        return Err(Error::InvalidInput("statistics of an empty tree".into()));
    }
    if let Some(m) = marginals {
        if m.len() != n {
            return Err(Error::InvalidInput(format!(
                "marginals over {} nodes for a tree of {}",
                m.len(),
                n
            )));
        }
    }
    let height = tree.depths().into_iter().max().unwrap_or(0) as f64;
    let leaves = tree.children().iter().filter(|c| c.is_empty()).count();
    let arcs: Vec<f64> = (0..n)
        .filter_map(|j| tree.head(j).map(|h| (h as f64 - j as f64).abs()))
        .collect();
    let norm_arc_length = if arcs.is_empty() {
        0.0
    } else {
        arcs.iter().sum::<f64>() / arcs.len() as f64 / n as f64
    };
    Ok(TreeStats {
        height,
        leaf_proportion: leaves as f64 / n as f64,
        norm_arc_length,
        vacuous: is_vacuous(tree),
        parent_entropy: marginals.map(parent_entropy),
    })
}

/// Corpus-level means; `vacuous_percent` is in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateStats {
    pub count: usize,
    pub height: f64,
    pub leaf_proportion: f64,
    pub norm_arc_length: f64,
    pub vacuous_percent: f64,
    /// Mean over trees that have an entropy value.
    pub parent_entropy: Option<f64>,
}

impl AggregateStats {
    pub const COLUMNS: [&'static str; 5] = [
        "tree_height",
        "leaf_proportion",
        "norm_arc_length",
        "parent_entropy",
        "vacuous_percent",
    ];

    /// Values in [`AggregateStats::COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 5] {
        [
            Some(self.height),
            Some(self.leaf_proportion),
            Some(self.norm_arc_length),
            self.parent_entropy,
            Some(self.vacuous_percent),
        ]
    }
}

/// Pool statistics over documents (and runs) by plain averaging.
pub fn aggregate_stats(stats: &[TreeStats]) -> Result<AggregateStats> {
    if stats.is_empty() {
        return Err(Error::InvalidInput("no trees to aggregate".into()));
    }
    let n = stats.len() as f64;
    let mean = |f: fn(&TreeStats) -> f64| stats.iter().map(f).sum::<f64>() / n;
    let entropies: Vec<f64> = stats.iter().filter_map(|s| s.parent_entropy).collect();
    Ok(AggregateStats {
        count: stats.len(),
        height: mean(|s| s.height),
        leaf_proportion: mean(|s| s.leaf_proportion),
        norm_arc_length: mean(|s| s.norm_arc_length),
        vacuous_percent: 100.0 * stats.iter().filter(|s| s.vacuous).count() as f64 / n,
        parent_entropy: if entropies.is_empty() {
            None
        } else {
            Some(entropies.iter().sum::<f64>() / entropies.len() as f64)
        },
    })
}
