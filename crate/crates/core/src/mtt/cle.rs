//! Maximum spanning arborescence with the single-root constraint.
//!
//! Chu-Liu-Edmonds is run over a graph with a virtual root (vertex 0) whose
//! outgoing arcs carry the root scores. If the unconstrained optimum attaches
//! more than one node to the root, the search is repeated once per candidate
//! root child with all other root arcs removed, and the best result is kept.

use super::{DepTree, PotentialTable, Provenance};
use crate::error::{Error, Result};

/// The highest-scoring single-root tree over the unmasked positions of
/// `table`, and its score.
///
/// The returned tree is indexed by compacted position: if `table` has masked
/// positions they are dropped and later positions shift down.
pub fn cle_best_tree(table: &PotentialTable) -> Result<(DepTree, f64)> {
    let table = if table.is_fully_valid() {
        table.clone()
    } else {
        table.compact()
    };
    let n = table.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot decode a tree over zero nodes".into()));
    }

    // Vertex 0 is the virtual root; sentence k is vertex k + 1.
    let mut scores = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    for j in 0..n {
        scores[0][j + 1] = table.root()[j];
        for i in 0..n {
            if i != j {
                scores[i + 1][j + 1] = table.arc()[[i, j]];
            }
        }
    }

    let mut best = to_tree(&max_arborescence(&scores));
    if best.root_children().len() != 1 {
        let mut best_score = f64::NEG_INFINITY;
        for r in 0..n {
            let mut constrained = scores.clone();
            for j in 0..n {
                if j != r {
                    constrained[0][j + 1] = f64::NEG_INFINITY;
                }
            }
            let candidate = to_tree(&max_arborescence(&constrained));
            let score = table.tree_score(&candidate);
            if score > best_score {
                best_score = score;
                best = candidate;
            }
        }
    }

    let tree = DepTree::new(best.heads().to_vec(), Provenance::Induced)?;
    let score = table.tree_score(&tree);
    Ok((tree, score))
}

fn to_tree(parents: &[Option<usize>]) -> DepTree {
    let heads = parents[1..]
        .iter()
        .map(|p| match p.expect("every non-root vertex has a parent") {
            0 => None,
            v => Some(v - 1),
        })
        .collect();
    DepTree::new_unchecked(heads, Provenance::Induced)
}

/// Maximum spanning arborescence rooted at vertex 0 of a dense score
/// matrix (`scores[parent][child]`), returning the parent of every vertex.
fn max_arborescence(scores: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = scores.len();

    // Best incoming arc per vertex; ties go to the lowest index.
    let mut parent = vec![None; n];
    for v in 1..n {
        let mut best: Option<usize> = None;
        for u in 0..n {
            if u == v {
                continue;
            }
            if best.map_or(true, |b| scores[u][v] > scores[b][v]) {
                best = Some(u);
            }
        }
        parent[v] = best;
    }

    let cycle = match find_cycle(&parent) {
        Some(cycle) => cycle,
        None => return parent,
    };

    let mut in_cycle = vec![false; n];
    for &v in &cycle {
        in_cycle[v] = true;
    }

    // Contracted graph: vertices outside the cycle keep their relative
    // order, the cycle becomes the last vertex.
    let outside: Vec<usize> = (0..n).filter(|&v| !in_cycle[v]).collect();
    let c = outside.len();
    let mut new_index = vec![usize::MAX; n];
    for (k, &v) in outside.iter().enumerate() {
        new_index[v] = k;
    }

    let mut contracted = vec![vec![f64::NEG_INFINITY; c + 1]; c + 1];
    let mut enter = vec![usize::MAX; c + 1];
    let mut leave = vec![usize::MAX; c + 1];

    for &u in &outside {
        for &v in &outside {
            if u != v {
                contracted[new_index[u]][new_index[v]] = scores[u][v];
            }
        }

        // u -> cycle: entering at v replaces v's cycle arc.
        for &v in &cycle {
            let cycle_arc = scores[parent[v].unwrap()][v];
            let adjusted = if scores[u][v] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                scores[u][v] - cycle_arc
            };
            if enter[new_index[u]] == usize::MAX || adjusted > contracted[new_index[u]][c] {
                contracted[new_index[u]][c] = adjusted;
                enter[new_index[u]] = v;
            }
        }

        // cycle -> u: best arc leaving any cycle vertex.
        if u != 0 {
            for &w in &cycle {
                if leave[new_index[u]] == usize::MAX || scores[w][u] > contracted[c][new_index[u]] {
                    contracted[c][new_index[u]] = scores[w][u];
                    leave[new_index[u]] = w;
                }
            }
        }
    }

    let sub = max_arborescence(&contracted);

    let mut result = vec![None; n];
    for &v in &cycle {
        result[v] = parent[v];
    }
    for &v in &outside {
        if v == 0 {
            continue;
        }
        let p = sub[new_index[v]].expect("contracted vertex has a parent");
        result[v] = Some(if p == c { leave[new_index[v]] } else { outside[p] });
    }
    let entering_from = sub[c].expect("contracted cycle has a parent");
    let entry = enter[entering_from];
    result[entry] = Some(outside[entering_from]);

    result
}

fn find_cycle(parent: &[Option<usize>]) -> Option<Vec<usize>> {
    let n = parent.len();
    // 0 = unvisited, 1 = on current path, 2 = done.
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        loop {
            if state[v] == 1 {
                let pos = path.iter().position(|&p| p == v).unwrap();
                return Some(path[pos..].to_vec());
            }
            if state[v] == 2 {
                break;
            }
            state[v] = 1;
            path.push(v);
            match parent[v] {
                Some(p) => v = p,
                None => break,
            }
        }
        for &p in &path {
            state[p] = 2;
        }
    }
    None
}
