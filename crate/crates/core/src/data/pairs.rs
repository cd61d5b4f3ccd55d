use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Document;
use crate::error::{Error, Result};

/// An original document and a copy with its sentences reordered.
///
/// `permuted.sentences[i] == original.sentences[permutation[i]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderPair {
    pub original: Document,
    pub permuted: Document,
    pub permutation: Vec<usize>,
}

impl OrderPair {
    pub fn new(original: Document, permutation: Vec<usize>) -> Result<Self> {
        let n = original.len();
        let mut seen = vec![false; n];
        if permutation.len() != n || permutation.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidInput(format!(
                "{:?} is not a permutation of {} sentences",
                permutation, n
            )));
        }
        if permutation.iter().enumerate().all(|(i, &p)| i == p) {
            return Err(Error::InvalidInput("identity permutation".into()));
        }
        let permuted = Document {
            id: format!("{}#{}", original.id, format_permutation(&permutation)),
            sentences: permutation.iter().map(|&p| original.sentences[p].clone()).collect(),
            label: None,
            gold_tree: None,
        };
        Ok(OrderPair {
            original,
            permuted,
            permutation,
        })
    }
}

/// Space-free rendering used in ids and pair listings, e.g. `2-0-1`.
pub fn format_permutation(permutation: &[usize]) -> String {
    permutation.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

/// `n!`, or any value above `cap + 1` once `n!` exceeds it.
fn factorial_capped(n: usize, cap: usize) -> usize {
    let mut acc = 1usize;
    for i in 2..=n {
        acc = acc.saturating_mul(i);
        if acc > cap.saturating_add(1) {
            return cap.saturating_add(2);
        }
    }
    acc
}

fn next_lexicographic(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Up to `k` distinct non-identity sentence orders of `doc`.
///
/// When `k` covers every non-identity order, all `n! - 1` are returned in
/// lexicographic order; otherwise `k` are sampled with the seeded generator.
/// Single-sentence documents yield no pairs.
pub fn generate_permutation_pairs(doc: &Document, k: usize, seed: u64) -> Vec<OrderPair> {
    let n = doc.len();
    if n < 2 {
        log::warn!("document '{}' has a single sentence; no permutation pairs", doc.id);
        return Vec::new();
    }
    let available = factorial_capped(n, k) - 1;
    let mut perms: Vec<Vec<usize>> = Vec::new();
    if available <= k {
        let mut p: Vec<usize> = (0..n).collect();
        while next_lexicographic(&mut p) {
            perms.push(p.clone());
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let identity: Vec<usize> = (0..n).collect();
        let mut seen = HashSet::new();
        while perms.len() < k {
            let mut p = identity.clone();
            p.shuffle(&mut rng);
            if p != identity && seen.insert(p.clone()) {
                perms.push(p);
            }
        }
    }
    perms
        .into_iter()
        .map(|p| OrderPair::new(doc.clone(), p).expect("generated permutations are valid"))
        .collect()
}

/// Pairs for a whole corpus; document `i` uses a seed derived from `(seed, i)`.
pub fn corpus_pairs(docs: &[Document], k: usize, seed: u64) -> Vec<OrderPair> {
    docs.iter()
        .enumerate()
        .flat_map(|(i, d)| generate_permutation_pairs(d, k, document_seed(seed, i)))
        .collect()
}

pub fn document_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
