//! RST trees, their nuclearity-based dependency conversion, and the collapse
//! of EDU-level dependencies to sentence level.
//!
//! Bracketed format: an internal node is a parenthesized list of children,
//! each tagged `N:` (nucleus) or `S:` (satellite); a leaf is `edu` or
//! `edu/sentence` with 1-based indices (sentence defaults to the EDU index).
//! Example: `(N:1 S:(N:2/1 S:3/2))`.

use std::fmt;

use crate::error::{Error, Result};
use crate::mtt::{DepTree, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nuclearity {
    Nucleus,
    Satellite,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RstNode {
    /// 0-based EDU and sentence indices.
    Leaf { edu: usize, sentence: usize },
    Internal { children: Vec<(Nuclearity, RstNode)> },
}

impl RstNode {
    pub fn leaf(edu: usize, sentence: usize) -> Self {
        RstNode::Leaf { edu, sentence }
    }

    pub fn internal(children: Vec<(Nuclearity, RstNode)>) -> Self {
        RstNode::Internal { children }
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<(usize, usize)>) {
        match self {
            RstNode::Leaf { edu, sentence } => out.push((*edu, *sentence)),
            RstNode::Internal { children } => children.iter().for_each(|(_, c)| c.collect_leaves(out)),
        }
    }

    /// Sentence of every EDU, indexed by EDU.
    pub fn edu_sentences(&self) -> Vec<usize> {
        self.leaves().into_iter().map(|(_, s)| s).collect()
    }

    /// Check the node invariants: nonempty internal nodes with a nucleus,
    /// EDUs numbered 0.. left to right.
    pub fn validate(&self) -> Result<()> {
        self.validate_nodes()?;
        for (i, (edu, _)) in self.leaves().into_iter().enumerate() {
            if edu != i {
                return Err(Error::InvalidInput(format!(
                    "EDU indices must run 1.. left to right; found {} at position {}",
                    edu + 1,
                    i + 1
                )));
            }
        }
        Ok(())
    }

    fn validate_nodes(&self) -> Result<()> {
        if let RstNode::Internal { children } = self {
            if children.is_empty() {
                return Err(Error::InvalidInput("internal RST node without children".into()));
            }
            if !children.iter().any(|(n, _)| *n == Nuclearity::Nucleus) {
                return Err(Error::InvalidInput("internal RST node without a nucleus".into()));
            }
            for (_, child) in children {
                child.validate_nodes()?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for RstNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RstNode::Leaf { edu, sentence } => write!(f, "{}/{}", edu + 1, sentence + 1),
            RstNode::Internal { children } => {
                f.write_str("(")?;
                for (i, (nuc, child)) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    let tag = match nuc {
                        Nuclearity::Nucleus => "N",
                        Nuclearity::Satellite => "S",
                    };
                    write!(f, "{}:{}", tag, child)?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::InvalidInput(format!("RST bracket offset {}: {}", self.pos, message.into()))
    }

    fn skip_space(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_space();
        self.text.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<usize> {
        let start = self.pos;
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.text[start..self.pos]).expect("ascii digits");
        match digits.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(self.error("expected a 1-based index")),
        }
    }

    fn node(&mut self) -> Result<RstNode> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let mut children = Vec::new();
                loop {
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            return Ok(RstNode::Internal { children });
                        }
                        Some(b'N') | Some(b'S') => {
                            let nuc = if self.text[self.pos] == b'N' {
                                Nuclearity::Nucleus
                            } else {
                                Nuclearity::Satellite
                            };
                            self.pos += 1;
                            if self.text.get(self.pos) != Some(&b':') {
                                return Err(self.error("expected ':' after nuclearity tag"));
                            }
                            self.pos += 1;
                            let child = self.node()?;
                            children.push((nuc, child));
                        }
                        Some(_) => return Err(self.error("expected N:, S: or ')'")),
                        None => return Err(self.error("unbalanced parentheses")),
                    }
                }
            }
            Some(c) if c.is_ascii_digit() => {
                let edu = self.number()?;
                let sentence = if self.text.get(self.pos) == Some(&b'/') {
                    self.pos += 1;
                    self.number()?
                } else {
                    edu
                };
                Ok(RstNode::leaf(edu - 1, sentence - 1))
            }
            Some(_) => Err(self.error("expected '(' or an EDU index")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

/// Parse a bracketed nuclearity tree.
pub fn parse_rst(text: &str) -> Result<RstNode> {
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
    };
    let node = parser.node()?;
    if parser.peek().is_some() {
        return Err(parser.error("trailing input"));
    }
    node.validate()?;
    Ok(node)
}

/// Head EDU of `node`, attaching every non-head child's head to it.
fn convert(node: &RstNode, heads: &mut [Option<usize>]) -> Result<usize> {
    match node {
        RstNode::Leaf { edu, .. } => Ok(*edu),
        RstNode::Internal { children } => {
            let child_heads = children
                .iter()
                .map(|(_, c)| convert(c, heads))
                .collect::<Result<Vec<usize>>>()?;
            let nucleus = children
                .iter()
                .position(|(n, _)| *n == Nuclearity::Nucleus)
                .ok_or_else(|| Error::InvalidInput("internal RST node without a nucleus".into()))?;
            let head = child_heads[nucleus];
            for (i, &h) in child_heads.iter().enumerate() {
                if i != nucleus {
                    heads[h] = Some(head);
                }
            }
            Ok(head)
        }
    }
}

/// Unlabeled EDU dependencies: a node's head is the head of its leftmost
/// nucleus child, and the heads of all other children depend on it.
pub fn rst_to_dependency(root: &RstNode) -> Result<DepTree> {
    root.validate()?;
    let n = root.leaves().len();
    let mut heads = vec![None; n];
    convert(root, &mut heads)?;
    DepTree::new(heads, Provenance::ParsedRst)
}

/// Collapse an EDU tree to sentences.
///
/// A sentence attaches through its EDUs whose head lies outside the sentence
/// (or is ROOT); when there are several, the one closest to ROOT wins, ties
/// going to the leftmost. Intra-sentence arcs are dropped.
pub fn collapse_to_sentences(edu_tree: &DepTree, edu_sentence: &[usize]) -> Result<DepTree> {
    let n = edu_tree.len();
    if edu_sentence.len() != n || n == 0 {
        return Err(Error::InvalidInput(format!(
            "sentence map covers {} EDUs, tree has {}",
            edu_sentence.len(),
            n
        )));
    }
    if edu_sentence[0] != 0 || edu_sentence.windows(2).any(|w| w[1] != w[0] && w[1] != w[0] + 1) {
        return Err(Error::InvalidInput(
            "EDU to sentence map must be monotone and cover sentences 1.. without gaps".into(),
        ));
    }
    let sentences = edu_sentence[n - 1] + 1;
    let depths = edu_tree.depths();
    let mut anchor: Vec<Option<usize>> = vec![None; sentences];
    for edu in 0..n {
        let s = edu_sentence[edu];
        let outward = edu_tree.head(edu).map_or(true, |h| edu_sentence[h] != s);
        if outward && anchor[s].map_or(true, |a| depths[edu] < depths[a]) {
            anchor[s] = Some(edu);
        }
    }
    let heads = anchor
        .iter()
        .map(|a| {
            let edu = a.expect("every sentence has an EDU leaving it");
            edu_tree.head(edu).map(|h| edu_sentence[h])
        })
        .collect();
    DepTree::new(heads, edu_tree.provenance())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let text = "(N:1/1 S:(N:2/1 S:3/2))";
        let node = parse_rst(text).unwrap();
        assert_eq!(node.to_string(), text);
        assert_eq!(node.edu_sentences(), vec![0, 0, 1]);
        assert_eq!(parse_rst("(N:1 N:2)").unwrap().edu_sentences(), vec![0, 1]);
    }

    #[test]
    fn parse_errors() {
        for bad in ["(N:1 S:2", "(S:1 S:2)", "(N:2 S:1)", "(X:1)", "(N:1) 2", "", "(N:0)"] {
            assert!(parse_rst(bad).is_err(), "{}", bad);
        }
    }
}
