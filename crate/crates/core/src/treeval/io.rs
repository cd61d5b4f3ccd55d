//! Tree files: TSV with `doc_id`, 1-based `position` and `head` (0 = ROOT).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use super::rst::{collapse_to_sentences, parse_rst, rst_to_dependency};
use crate::mtt::{DepTree, Provenance};

pub const TREE_HEADER: &str = "doc_id\tposition\thead";

pub fn trees_to_tsv(trees: &[(String, DepTree)]) -> String {
    let mut out = String::new();
    out.push_str(TREE_HEADER);
    out.push('\n');
    for (id, tree) in trees {
        for (i, h) in tree.one_based_heads().into_iter().enumerate() {
            writeln!(out, "{}\t{}\t{}", id, i + 1, h).expect("writing to a string");
        }
    }
    out
}

pub fn write_trees(path: impl AsRef<Path>, trees: &[(String, DepTree)]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trees_to_tsv(trees)).map_err(|e| Error::io(path, e))
}

/// Read trees in file order; positions of each document must run 1..n.
pub fn read_trees(path: impl AsRef<Path>, provenance: Provenance) -> Result<Vec<(String, DepTree)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut trees = Vec::new();
    let mut current: Option<(String, Vec<usize>, usize)> = None;

    let finish = |entry: (String, Vec<usize>, usize), trees: &mut Vec<(String, DepTree)>| -> Result<()> {
        let (id, heads, line) = entry;
        let tree = DepTree::from_one_based(&heads, provenance).map_err(|e| Error::parse(path, line, e.to_string()))?;
        trees.push((id, tree));
        Ok(())
    };

    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        if line.trim().is_empty() || (i == 0 && line == TREE_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, no, "expected doc_id, position and head"));
        }
        let position: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(path, no, "position is not an integer"))?;
        let head: usize = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, no, "head is not an integer"))?;
        let same_doc = current.as_ref().map_or(false, |(id, _, _)| id == fields[0]);
        if !same_doc {
            if let Some(entry) = current.take() {
                finish(entry, &mut trees)?;
            }
            if trees.iter().any(|(id, _)| id == fields[0]) {
                return Err(Error::parse(path, no, format!("document '{}' is not contiguous", fields[0])));
            }
            current = Some((fields[0].to_string(), Vec::new(), no));
        }
        let (_, heads, _) = current.as_mut().expect("set above");
        if position != heads.len() + 1 {
            return Err(Error::parse(path, no, format!("expected position {}", heads.len() + 1)));
        }
        heads.push(head);
    }
    if let Some(entry) = current.take() {
        finish(entry, &mut trees)?;
    }
    if trees.is_empty() {
        return Err(Error::parse(path, 0, "no trees"));
    }
    Ok(trees)
}

/// Read `doc_id<TAB>bracketed RST tree` lines and convert each tree to a
/// sentence-level dependency tree.
pub fn read_rst_trees(path: impl AsRef<Path>) -> Result<Vec<(String, DepTree)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut trees: Vec<(String, DepTree)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, bracket) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected doc_id and a bracketed tree"))?;
        if trees.iter().any(|(seen, _)| seen == id) {
            return Err(Error::parse(path, i + 1, format!("duplicate document '{}'", id)));
        }
        let convert = || -> Result<DepTree> {
            let rst = parse_rst(bracket.trim())?;
            let edus = rst_to_dependency(&rst)?;
            collapse_to_sentences(&edus, &rst.edu_sentences())
        };
        let tree = convert().map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        trees.push((id.to_string(), tree));
    }
    if trees.is_empty() {
        return Err(Error::parse(path, 0, "no trees"));
    }
    Ok(trees)
}
