use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Extra percolation levels beyond which training became unstable.
pub const MAX_PERCOLATION_LEVELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    /// Coordinate-wise max over sentences.
    Max,
    /// Sum of sentence vectors weighted by their root marginals.
    RootWeighted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Classification,
    /// Pairwise sentence-order discrimination with a ranking loss.
    Ordering,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Max => "max",
            Pooling::RootWeighted => "root_weighted",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Pooling::Max),
            "root_weighted" => Ok(Pooling::RootWeighted),
            other => Err(Error::Config(format!(
                "unknown pooling '{}' (expected max or root_weighted)",
                other
            ))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Ordering => "ordering",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Task::Classification),
            "ordering" => Ok(Task::Ordering),
            other => Err(Error::Config(format!(
                "unknown task '{}' (expected classification or ordering)",
                other
            ))),
        }
    }
}

/// Architecture of the two-level structured attention model.
///
/// The base configuration (`Default`) has attention at both levels, a
/// document-level biLSTM, no extra percolation and max pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// biLSTM output size. Each direction contributes half of its state to the
    /// semantic part and half to the structure part.
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub sent_attention: bool,
    pub doc_attention: bool,
    pub doc_bilstm: bool,
    pub percolation_levels: usize,
    pub pooling: Pooling,
    pub task: Task,
    pub margin: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 24,
            hidden_dim: 64,
            num_classes: 2,
            sent_attention: true,
            doc_attention: true,
            doc_bilstm: true,
            percolation_levels: 0,
            pooling: Pooling::Max,
            task: Task::Classification,
            margin: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be positive".into()));
        }
        if self.hidden_dim < 4 || self.hidden_dim % 4 != 0 {
            return Err(Error::Config(format!(
                "hidden_dim must be a positive multiple of 4, got {}",
                self.hidden_dim
            )));
        }
        if self.percolation_levels > MAX_PERCOLATION_LEVELS {
            return Err(Error::Config(format!(
                "percolation_levels must be at most {}, got {}",
                MAX_PERCOLATION_LEVELS, self.percolation_levels
            )));
        }
        if self.pooling == Pooling::RootWeighted && !self.doc_attention {
            return Err(Error::Config(
                "root_weighted pooling needs document-level attention".into(),
            ));
        }
        if self.task == Task::Classification && self.num_classes < 2 {
            return Err(Error::Config("classification needs at least two classes".into()));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::Config(format!("margin must be non-negative, got {}", self.margin)));
        }
        Ok(())
    }

    /// Size of the semantic (and structure) half of a hidden state.
    pub fn half_dim(&self) -> usize {
        self.hidden_dim / 2
    }

    /// Width of the model output: class logits, or one coherence score.
    pub fn output_dim(&self) -> usize {
        match self.task {
            Task::Classification => self.num_classes,
            Task::Ordering => 1,
        }
    }

    pub const KEYS: [&'static str; 10] = [
        "embed_dim",
        "hidden_dim",
        "num_classes",
        "sent_attention",
        "doc_attention",
        "doc_bilstm",
        "percolation_levels",
        "pooling",
        "task",
        "margin",
    ];

    /// Every field as a `(key, value)` pair, in [`ModelConfig::KEYS`] order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("embed_dim", self.embed_dim.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("num_classes", self.num_classes.to_string()),
            ("sent_attention", self.sent_attention.to_string()),
            ("doc_attention", self.doc_attention.to_string()),
            ("doc_bilstm", self.doc_bilstm.to_string()),
            ("percolation_levels", self.percolation_levels.to_string()),
            ("pooling", self.pooling.to_string()),
            ("task", self.task.to_string()),
            ("margin", self.margin.to_string()),
        ]
    }

    /// Set one field from text. Returns `Ok(false)` for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "embed_dim" => self.embed_dim = parse_value(key, value)?,
            "hidden_dim" => self.hidden_dim = parse_value(key, value)?,
            "num_classes" => self.num_classes = parse_value(key, value)?,
            "sent_attention" => self.sent_attention = parse_value(key, value)?,
            "doc_attention" => self.doc_attention = parse_value(key, value)?,
            "doc_bilstm" => self.doc_bilstm = parse_value(key, value)?,
            "percolation_levels" => self.percolation_levels = parse_value(key, value)?,
            "pooling" => self.pooling = value.parse()?,
            "task" => self.task = value.parse()?,
            "margin" => self.margin = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{}' for {}", value, key)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let odd = ModelConfig {
            hidden_dim: 30,
            ..ModelConfig::default()
        };
        assert!(odd.validate().is_err());

        let deep = ModelConfig {
            percolation_levels: 5,
            ..ModelConfig::default()
        };
        assert!(deep.validate().is_err());

        let weighted_without_attention = ModelConfig {
            pooling: Pooling::RootWeighted,
            doc_attention: false,
            ..ModelConfig::default()
        };
        assert!(weighted_without_attention.validate().is_err());
    }

    #[test]
    fn pairs_round_trip() {
        let config = ModelConfig {
            doc_bilstm: false,
            percolation_levels: 4,
            pooling: Pooling::RootWeighted,
            task: Task::Ordering,
            margin: 0.5,
            ..ModelConfig::default()
        };
        let mut rebuilt = ModelConfig::default();
        for (k, v) in config.to_pairs() {
            assert!(rebuilt.set(k, &v).unwrap());
        }
        assert_eq!(rebuilt, config);
        assert!(!rebuilt.set("learning_rate", "0.1").unwrap());
        assert!(rebuilt.set("hidden_dim", "big").is_err());
    }
}
