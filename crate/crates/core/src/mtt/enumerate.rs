use super::{DepTree, Provenance};
use crate::error::{Error, Result};

/// Largest node count accepted by [`enumerate_trees`].
pub const MAX_ENUMERATION_NODES: usize = 7;

/// Every single-root spanning arborescence over `n` nodes, each exactly once.
///
/// Intended as a brute-force oracle: the count grows as n^(n-1).
pub fn enumerate_trees(n: usize) -> Result<Vec<DepTree>> {
    if n == 0 || n > MAX_ENUMERATION_NODES {
        return Err(Error::InvalidInput(format!(
            "tree enumeration supports 1..={} nodes, got {}",
            MAX_ENUMERATION_NODES, n
        )));
    }

    // Head choice per node: 0 = ROOT, k = node k - 1.
    let mut choice = vec![0usize; n];
    let mut trees = Vec::new();
    loop {
        if choice.iter().filter(|&&c| c == 0).count() == 1
            && choice.iter().enumerate().all(|(j, &c)| c != j + 1)
        {
            let heads: Vec<Option<usize>> = choice
                .iter()
                .map(|&c| if c == 0 { None } else { Some(c - 1) })
                .collect();
            if is_acyclic(&heads) {
                trees.push(DepTree::new_unchecked(heads, Provenance::Fixture));
            }
        }

        // Odometer increment over {0..=n}^n.
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(trees);
            }
            choice[pos] += 1;
            if choice[pos] <= n {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

fn is_acyclic(heads: &[Option<usize>]) -> bool {
    let n = heads.len();
    (0..n).all(|start| {
        let mut node = start;
        let mut steps = 0;
        while let Some(h) = heads[node] {
            node = h;
            steps += 1;
            if steps > n {
                return false;
            }
        }
        true
    })
}
