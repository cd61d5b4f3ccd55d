//! Analysis of induced and reference trees: decoding, statistics, vacuity,
//! parent entropy, PPMI of root-sentence words, RST conversion, and reports.

mod io;
mod ppmi;
mod report;
mod rst;
mod stats;

pub use io::{read_rst_trees, read_trees, trees_to_tsv, write_trees, TREE_HEADER};
pub use ppmi::{ppmi_root_words, PpmiConfig};
pub use report::{compare_corpora, stats_table, Comparison};
pub use rst::{collapse_to_sentences, parse_rst, rst_to_dependency, Nuclearity, RstNode};
pub use stats::{
    aggregate_stats, extract_tree, is_vacuous, parent_entropy, tree_statistics, AggregateStats, TreeStats,
};
