//! Losses, the optimizer, and the seeded training and selection loop.

mod optim;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use optim::{
    adagrad_step, clip_global_norm, cross_entropy_loss, margin_ranking_loss, Adagrad, ADAGRAD_EPSILON,
};

use crate::data::{Document, OrderPair, PaddedDoc, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, Example, Model, ModelConfig};
use crate::params::{Gradients, ParamStore};

/// Batches are bucketed by sentence count inside pools of this many batches.
const BUCKET_POOL: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Global-norm clipping threshold; `None` disables clipping.
    pub clip_ratio: Option<f64>,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Optional wall-clock budget; runs stop at whichever limit comes first.
    pub max_wall_time: Option<Duration>,
    pub eval_interval: usize,
    pub seed: u64,
    pub num_runs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            clip_ratio: Some(1.0),
            batch_size: 32,
            max_steps: 1000,
            max_wall_time: None,
            eval_interval: 100,
            seed: 1,
            num_runs: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(r) = self.clip_ratio {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("clip_ratio must be positive, got {}", r)));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be at least 1".into()));
        }
        if self.num_runs == 0 {
            return Err(Error::Config("num_runs must be at least 1".into()));
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 8] = [
        "learning_rate",
        "clip_ratio",
        "batch_size",
        "max_steps",
        "max_wall_time",
        "eval_interval",
        "seed",
        "num_runs",
    ];

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let optional = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        vec![
            ("learning_rate", self.learning_rate.to_string()),
            ("clip_ratio", optional(self.clip_ratio)),
            ("batch_size", self.batch_size.to_string()),
            ("max_steps", self.max_steps.to_string()),
            ("max_wall_time", optional(self.max_wall_time.map(|d| d.as_secs_f64()))),
            ("eval_interval", self.eval_interval.to_string()),
            ("seed", self.seed.to_string()),
            ("num_runs", self.num_runs.to_string()),
        ]
    }

    /// Set one field from text (`max_wall_time` in seconds). Returns
    /// `Ok(false)` for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{}' for {}", v, key)))
        };
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{}' for {}", v, key)))
        };
        match key {
            "learning_rate" => self.learning_rate = parse_f64(value)?,
            "clip_ratio" => {
                self.clip_ratio = if value == "none" { None } else { Some(parse_f64(value)?) }
            }
            "batch_size" => self.batch_size = parse_usize(value)?,
            "max_steps" => self.max_steps = parse_usize(value)?,
            "max_wall_time" => {
                self.max_wall_time = if value == "none" {
                    None
                } else {
                    let secs = parse_f64(value)?;
                    if !(secs.is_finite() && secs >= 0.0) {
                        return Err(Error::Config(format!("invalid max_wall_time '{}'", value)));
                    }
                    Some(Duration::from_secs_f64(secs))
                }
            }
            "eval_interval" => self.eval_interval = parse_usize(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid value '{}' for seed", value)))?
            }
            "num_runs" => self.num_runs = parse_usize(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// An encoded training or evaluation item.
#[derive(Clone, Debug, PartialEq)]
pub enum Sample {
    Labeled { sentences: Vec<Vec<usize>>, label: usize },
    Pair { original: Vec<Vec<usize>>, permuted: Vec<Vec<usize>> },
}

impl Sample {
    fn sentences(&self) -> &[Vec<usize>] {
        match self {
            Sample::Labeled { sentences, .. } => sentences,
            Sample::Pair { original, .. } => original,
        }
    }

    fn num_sentences(&self) -> usize {
        self.sentences().len()
    }

    fn longest_sentence(&self) -> usize {
        self.sentences().iter().map(Vec::len).max().unwrap_or(0)
    }

    fn pad(&self, slots: usize, token_slots: usize) -> Result<PaddedSample> {
        Ok(match self {
            Sample::Labeled { sentences, label } => PaddedSample::Labeled {
                doc: PaddedDoc::new(sentences, slots, token_slots)?,
                label: *label,
            },
            Sample::Pair { original, permuted } => PaddedSample::Pair {
                original: PaddedDoc::new(original, slots, token_slots)?,
                permuted: PaddedDoc::new(permuted, slots, token_slots)?,
            },
        })
    }

    fn pad_alone(&self) -> Result<PaddedSample> {
        self.pad(self.num_sentences(), self.longest_sentence())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PaddedSample {
    Labeled { doc: PaddedDoc, label: usize },
    Pair { original: PaddedDoc, permuted: PaddedDoc },
}

impl PaddedSample {
    pub fn example(&self) -> Example<'_> {
        match self {
            PaddedSample::Labeled { doc, label } => Example::Labeled { doc, label: *label },
            PaddedSample::Pair { original, permuted } => Example::Pair { original, permuted },
        }
    }
}

/// One data split encoded against a vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub ids: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Split {
    pub fn classification(docs: &[Document], vocab: &Vocabulary) -> Result<Split> {
        let mut samples = Vec::with_capacity(docs.len());
        for doc in docs {
            let label = doc
                .label
                .ok_or_else(|| Error::InvalidInput(format!("document '{}' has no label", doc.id)))?;
            samples.push(Sample::Labeled {
                sentences: vocab.encode(doc),
                label,
            });
        }
        Ok(Split {
            ids: docs.iter().map(|d| d.id.clone()).collect(),
            samples,
        })
    }

    pub fn ordering(pairs: &[OrderPair], vocab: &Vocabulary) -> Split {
        Split {
            ids: pairs.iter().map(|p| p.permuted.id.clone()).collect(),
            samples: pairs
                .iter()
                .map(|p| Sample::Pair {
                    original: vocab.encode(&p.original),
                    permuted: vocab.encode(&p.permuted),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Pad a group of samples to the group's maxima.
    pub fn padded_batch(&self, indices: &[usize]) -> Result<Vec<PaddedSample>> {
        let slots = indices.iter().map(|&i| self.samples[i].num_sentences()).max().unwrap_or(0);
        let tokens = indices
            .iter()
            .map(|&i| self.samples[i].longest_sentence())
            .max()
            .unwrap_or(0);
        indices.iter().map(|&i| self.samples[i].pad(slots, tokens)).collect()
    }
}

/// Batches for one epoch: a seeded shuffle, length bucketing inside pools,
/// then a shuffle of the batch order.
pub fn epoch_batches(split: &Split, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..split.len()).collect();
    order.shuffle(&mut rng);
    let mut batches = Vec::new();
    for pool in order.chunks(batch_size * BUCKET_POOL) {
        let mut pool = pool.to_vec();
        pool.sort_by_key(|&i| split.samples[i].num_sentences());
        batches.extend(pool.chunks(batch_size).map(<[usize]>::to_vec));
    }
    batches.shuffle(&mut rng);
    batches
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: f64,
    pub count: usize,
}

/// Mean loss and accuracy over a split; parameters are only read.
pub fn evaluate(model: &Model, params: &ParamStore, split: &Split) -> Result<Metrics> {
    if split.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty split".into()));
    }
    let results: Vec<Result<(f64, bool)>> = split
        .samples
        .par_iter()
        .map(|sample| {
            let padded = sample.pad_alone()?;
            let (loss, correct, _) = model.evaluate_example(params, padded.example(), false)?;
            Ok((loss, correct))
        })
        .collect();
    let mut loss = 0.0;
    let mut correct = 0usize;
    for r in results {
        let (l, c) = r?;
        loss += l;
        correct += c as usize;
    }
    let n = split.len();
    Ok(Metrics {
        loss: loss / n as f64,
        accuracy: correct as f64 / n as f64,
        count: n,
    })
}

/// One row of the metrics log.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub step: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
}

impl MetricRecord {
    pub const HEADER: &'static str = "step\tsplit\tloss\taccuracy";

    pub fn to_tsv(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.step, self.split, self.loss, self.accuracy)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Best {
    pub step: usize,
    pub dev_accuracy: f64,
    pub dev_loss: f64,
    pub params: ParamStore,
}

impl Best {
    /// Higher dev accuracy wins; equal accuracy falls back to lower dev loss.
    pub fn beaten_by(&self, accuracy: f64, loss: f64) -> bool {
        accuracy > self.dev_accuracy || (accuracy == self.dev_accuracy && loss < self.dev_loss)
    }
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub seed: u64,
    pub step: usize,
    pub params: ParamStore,
    pub optimizer: Adagrad,
    pub best: Option<Best>,
    pub metrics: Vec<MetricRecord>,
}

impl RunState {
    pub fn fresh(seed: u64, params: ParamStore, learning_rate: f64) -> Self {
        RunState {
            seed,
            step: 0,
            optimizer: Adagrad::new(&params, learning_rate),
            params,
            best: None,
            metrics: Vec::new(),
        }
    }

    /// Per-step training losses in order.
    pub fn loss_trace(&self) -> Vec<f64> {
        self.metrics
            .iter()
            .filter(|m| m.split == "train")
            .map(|m| m.loss)
            .collect()
    }

    /// Checkpoint of the latest parameters with optimizer state.
    pub fn last_checkpoint(&self, config: &ModelConfig, vocab: &Vocabulary) -> Checkpoint {
        let mut meta = vec![
            ("seed".to_string(), self.seed.to_string()),
            ("step".to_string(), self.step.to_string()),
        ];
        if let Some(best) = &self.best {
            meta.push(("best_step".to_string(), best.step.to_string()));
            meta.push(("best_dev_accuracy".to_string(), best.dev_accuracy.to_string()));
            meta.push(("best_dev_loss".to_string(), best.dev_loss.to_string()));
        }
        Checkpoint {
            config: config.clone(),
            vocab: vocab.tokens().to_vec(),
            params: self.params.clone(),
            optimizer: Some(self.optimizer.accumulators.clone()),
            meta,
        }
    }

    /// Rebuild a run from its last checkpoint, the dev-best parameters (if
    /// any) and the metrics logged so far.
    pub fn resume(
        last: &Checkpoint,
        best_params: Option<ParamStore>,
        metrics: Vec<MetricRecord>,
        learning_rate: f64,
    ) -> Result<Self> {
        let number = |key: &str| -> Result<Option<f64>> {
            last.meta(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad checkpoint metadata {}={}", key, v)))
                })
                .transpose()
        };
        let accumulators = last
            .optimizer
            .clone()
            .ok_or_else(|| Error::Config("checkpoint has no optimizer state".into()))?;
        let seed = last
            .meta("seed")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Config("checkpoint has no seed".into()))?;
        let step = number("step")?.ok_or_else(|| Error::Config("checkpoint has no step".into()))? as usize;
        let best = match (number("best_step")?, number("best_dev_accuracy")?, number("best_dev_loss")?, best_params) {
            (Some(s), Some(a), Some(l), Some(params)) => Some(Best {
                step: s as usize,
                dev_accuracy: a,
                dev_loss: l,
                params,
            }),
            (None, _, _, _) => None,
            _ => return Err(Error::Config("checkpoint names a best step but no best parameters".into())),
        };
        Ok(RunState {
            seed,
            step,
            params: last.params.clone(),
            optimizer: Adagrad::with_state(accumulators, learning_rate),
            best,
            metrics,
        })
    }
}

fn at_step(step: usize, err: Error) -> Error {
    match err {
        Error::Numerical(m) => Error::Numerical(format!("step {}: {}", step, m)),
        other => other,
    }
}

/// Continue `state` until `config.max_steps` (or the wall-time budget),
/// evaluating on `dev` every `eval_interval` steps and at the end.
pub fn train_run(model: &Model, state: &mut RunState, train: &Split, dev: &Split, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::InvalidInput("training needs nonempty train and dev splits".into()));
    }
    let started = Instant::now();
    let batches_per_epoch = epoch_batches(train, config.batch_size, state.seed, 0).len();
    let mut plan: Option<(u64, Vec<Vec<usize>>)> = None;

    while state.step < config.max_steps {
        if let Some(limit) = config.max_wall_time {
            if started.elapsed() >= limit {
                log::info!("seed {}: wall-time budget reached at step {}", state.seed, state.step);
                break;
            }
        }
        let epoch = (state.step / batches_per_epoch) as u64;
        if plan.as_ref().map(|(e, _)| *e) != Some(epoch) {
            plan = Some((epoch, epoch_batches(train, config.batch_size, state.seed, epoch)));
        }
        let indices = &plan.as_ref().expect("plan built above").1[state.step % batches_per_epoch];
        let step = state.step + 1;

        let batch = train.padded_batch(indices)?;
        let params = &state.params;
        let results: Vec<Result<(f64, bool, Option<Gradients>)>> = batch
            .par_iter()
            .map(|s| model.evaluate_example(params, s.example(), true))
            .collect();
        let mut grads = Gradients::new(params.len());
        let mut loss = 0.0;
        let mut correct = 0usize;
        for r in results {
            let (l, c, g) = r.map_err(|e| at_step(step, e))?;
            loss += l;
            correct += c as usize;
            grads.merge(&g.expect("gradients requested"));
        }
        let n = batch.len() as f64;
        loss /= n;
        grads.scale(1.0 / n);
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::Numerical(format!("step {}: non-finite loss or gradient", step)));
        }
        if let Some(ratio) = config.clip_ratio {
            clip_global_norm(&mut grads, ratio);
        }
        state.optimizer.step(&mut state.params, &grads);
        state.step = step;
        state.metrics.push(MetricRecord {
            step,
            split: "train".into(),
            loss,
            accuracy: correct as f64 / n,
        });

        if step % config.eval_interval == 0 || step == config.max_steps {
            record_dev(model, state, dev)?;
        }
    }
    let evaluated_last = state
        .metrics
        .last()
        .map_or(false, |m| m.split == "dev" && m.step == state.step);
    if !evaluated_last {
        record_dev(model, state, dev)?;
    }
    Ok(())
}

fn record_dev(model: &Model, state: &mut RunState, dev: &Split) -> Result<()> {
    let metrics = evaluate(model, &state.params, dev).map_err(|e| at_step(state.step, e))?;
    log::info!(
        "seed {} step {}: dev loss {:.4} accuracy {:.4}",
        state.seed,
        state.step,
        metrics.loss,
        metrics.accuracy
    );
    state.metrics.push(MetricRecord {
        step: state.step,
        split: "dev".into(),
        loss: metrics.loss,
        accuracy: metrics.accuracy,
    });
    let improved = state
        .best
        .as_ref()
        .map_or(true, |b| b.beaten_by(metrics.accuracy, metrics.loss));
    if improved {
        state.best = Some(Best {
            step: state.step,
            dev_accuracy: metrics.accuracy,
            dev_loss: metrics.loss,
            params: state.params.clone(),
        });
    }
    Ok(())
}

/// Outcome of one seeded run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed: u64,
    pub best_step: usize,
    pub best_dev_accuracy: f64,
    pub best_dev_loss: f64,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub state: RunState,
}

impl RunResult {
    pub fn best_params(&self) -> &ParamStore {
        &self.state.best.as_ref().expect("finished runs have a best step").params
    }

    /// Checkpoint of the dev-best parameters, without optimizer state.
    pub fn best_checkpoint(&self, config: &ModelConfig, vocab: &Vocabulary) -> Checkpoint {
        Checkpoint {
            config: config.clone(),
            vocab: vocab.tokens().to_vec(),
            params: self.best_params().clone(),
            optimizer: None,
            meta: vec![
                ("seed".to_string(), self.seed.to_string()),
                ("step".to_string(), self.best_step.to_string()),
                ("dev_accuracy".to_string(), self.best_dev_accuracy.to_string()),
                ("dev_loss".to_string(), self.best_dev_loss.to_string()),
            ],
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
    pub numerical: bool,
}

/// Max, mean and sample standard deviation of per-run test accuracies.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub accuracies: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub stddev: f64,
}

impl Summary {
    pub fn new(accuracies: Vec<f64>) -> Option<Summary> {
        if accuracies.is_empty() {
            return None;
        }
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let max = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let stddev = if accuracies.len() > 1 {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            accuracies,
            max,
            mean,
            stddev,
        })
    }

    /// `max | mean (stddev)` in percent.
    pub fn display(&self) -> String {
        format!("{:.2} | {:.2} ({:.2})", 100.0 * self.max, 100.0 * self.mean, 100.0 * self.stddev)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub runs: Vec<std::result::Result<RunResult, RunFailure>>,
    pub summary: Option<Summary>,
}

impl TrainOutcome {
    pub fn successes(&self) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter_map(|r| r.as_ref().ok())
    }

    /// The successful run with the best dev score, earliest seed on ties.
    pub fn best_run(&self) -> Option<&RunResult> {
        let mut best: Option<&RunResult> = None;
        for run in self.successes() {
            let better = best.map_or(true, |b| {
                run.best_dev_accuracy > b.best_dev_accuracy
                    || (run.best_dev_accuracy == b.best_dev_accuracy && run.best_dev_loss < b.best_dev_loss)
            });
            if better {
                best = Some(run);
            }
        }
        best
    }
}

/// Seed for run `r` of a multi-run experiment.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_add(run as u64)
}

/// Fresh model parameters for one run.
pub fn init_run(model_config: &ModelConfig, vocab: &Vocabulary, seed: u64) -> Result<(Model, ParamStore)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Model::init(model_config.clone(), vocab.embeddings().clone(), &mut rng)
}

/// One complete seeded run: train, pick the dev-best step, score it on test.
pub fn run_once(
    model_config: &ModelConfig,
    vocab: &Vocabulary,
    train: &Split,
    dev: &Split,
    test: &Split,
    config: &TrainConfig,
    seed: u64,
) -> Result<(Model, RunResult)> {
    let (model, params) = init_run(model_config, vocab, seed)?;
    let mut state = RunState::fresh(seed, params, config.learning_rate);
    train_run(&model, &mut state, train, dev, config)?;
    let best = state.best.as_ref().expect("train_run always evaluates dev");
    let test_metrics = evaluate(&model, &best.params, test)?;
    let result = RunResult {
        seed,
        best_step: best.step,
        best_dev_accuracy: best.dev_accuracy,
        best_dev_loss: best.dev_loss,
        test_accuracy: test_metrics.accuracy,
        test_loss: test_metrics.loss,
        state,
    };
    Ok((model, result))
}

/// `num_runs` independent runs with seeds `seed, seed + 1, ...`. A failing
/// run is recorded and does not stop the others.
pub fn train(
    model_config: &ModelConfig,
    vocab: &Vocabulary,
    train: &Split,
    dev: &Split,
    test: &Split,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    model_config.validate()?;
    config.validate()?;
    if train.is_empty() || dev.is_empty() || test.is_empty() {
        return Err(Error::InvalidInput("train, dev and test splits must be nonempty".into()));
    }
    let (model, _) = init_run(model_config, vocab, config.seed)?;
    let mut runs = Vec::with_capacity(config.num_runs);
    for r in 0..config.num_runs {
        let seed = run_seed(config.seed, r);
        match run_once(model_config, vocab, train, dev, test, config, seed) {
            Ok((_, result)) => {
                log::info!(
                    "seed {}: best dev {:.4} at step {}, test {:.4}",
                    seed,
                    result.best_dev_accuracy,
                    result.best_step,
                    result.test_accuracy
                );
                runs.push(Ok(result));
            }
            Err(e) => {
                log::error!("seed {}: run aborted: {}", seed, e);
                runs.push(Err(RunFailure {
                    seed,
                    numerical: e.is_numerical(),
                    error: e.to_string(),
                }));
            }
        }
    }
    let accuracies: Vec<f64> = runs.iter().filter_map(|r| r.as_ref().ok()).map(|r| r.test_accuracy).collect();
    Ok(TrainOutcome {
        model,
        summary: Summary::new(accuracies),
        runs,
    })
}
