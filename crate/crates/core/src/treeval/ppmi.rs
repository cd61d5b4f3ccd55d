use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mtt::DepTree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpmiConfig {
    /// Add-k smoothing applied to both the root and the corpus distributions.
    pub smoothing: f64,
    /// Words seen fewer times in the whole corpus are skipped.
    pub min_count: usize,
}

impl Default for PpmiConfig {
    fn default() -> Self {
        PpmiConfig {
            smoothing: 1.0,
            min_count: 5,
        }
    }
}

/// `max(0, ln P(w | root sentence) / P(w))` for every word type, highest
/// first (ties in word order).
///
/// Root sentences are the ROOT children of each document's tree.
pub fn ppmi_root_words(docs: &[(&[Vec<String>], &DepTree)], config: PpmiConfig) -> Result<Vec<(String, f64)>> {
    if docs.is_empty() {
        return Err(Error::InvalidInput("PPMI over an empty corpus".into()));
    }
    let mut total: BTreeMap<&str, usize> = BTreeMap::new();
    let mut in_root: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n_total = 0usize;
    let mut n_root = 0usize;
    for (sentences, tree) in docs {
        if tree.len() != sentences.len() {
            return Err(Error::InvalidInput(format!(
                "tree over {} nodes for {} sentences",
                tree.len(),
                sentences.len()
            )));
        }
        let roots = tree.root_children();
        for (s, sentence) in sentences.iter().enumerate() {
            let is_root = roots.contains(&s);
            for token in sentence {
                *total.entry(token.as_str()).or_default() += 1;
                n_total += 1;
                if is_root {
                    *in_root.entry(token.as_str()).or_default() += 1;
                    n_root += 1;
                }
            }
        }
    }
    if n_root == 0 {
        return Err(Error::InvalidInput("PPMI: root sentences contain no tokens".into()));
    }

    let k = config.smoothing;
    let types = total.len() as f64;
    let mut scores: Vec<(String, f64)> = total
        .iter()
        .filter(|(_, &c)| c >= config.min_count)
        .map(|(&w, &c)| {
            let r = in_root.get(w).copied().unwrap_or(0) as f64;
            let p_root = (r + k) / (n_root as f64 + k * types);
            let p = (c as f64 + k) / (n_total as f64 + k * types);
            let pmi = if p_root > 0.0 { (p_root / p).ln() } else { 0.0 };
            (w.to_string(), pmi.max(0.0))
        })
        .collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scores)
}
