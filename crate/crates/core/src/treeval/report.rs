use std::fmt::Write as _;

use super::stats::AggregateStats;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{:.4}", x))
}

/// One statistic per row, one corpus per column.
pub fn stats_table(columns: &[(&str, &AggregateStats)]) -> String {
    let mut out = String::from("statistic");
    for (name, _) in columns {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for (i, stat) in AggregateStats::COLUMNS.iter().enumerate() {
        out.push_str(stat);
        for (_, s) in columns {
            out.push('\t');
            out.push_str(&cell(s.values()[i]));
        }
        out.push('\n');
    }
    let _ = write!(out, "trees");
    for (_, s) in columns {
        let _ = write!(out, "\t{}", s.count);
    }
    out.push('\n');
    out
}

/// Induced against reference statistics with `reference - induced` deltas.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub induced: AggregateStats,
    pub reference: AggregateStats,
    pub deltas: [Option<f64>; 5],
}

impl Comparison {
    /// One corpus per row, one statistic per column.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("corpus");
        for c in AggregateStats::COLUMNS {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (name, values) in [
            ("induced", self.induced.values()),
            ("reference", self.reference.values()),
            ("delta", self.deltas),
        ] {
            out.push_str(name);
            for v in values {
                out.push('\t');
                out.push_str(&cell(v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn compare_corpora(induced: &AggregateStats, reference: &AggregateStats) -> Comparison {
    let a = induced.values();
    let b = reference.values();
    let mut deltas = [None; 5];
    for i in 0..5 {
        deltas[i] = match (a[i], b[i]) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        };
    }
    Comparison {
        induced: *induced,
        reference: *reference,
        deltas,
    }
}
