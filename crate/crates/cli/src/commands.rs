use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use docstruct::data::{corpus_pairs, format_permutation, load_corpus, write_corpus, Document};
use docstruct::experiment::{
    analyze_corpus, build_vocabulary, encode_split, CorpusSplits, ExperimentConfig, EMBEDDINGS_FILE, SPLITS,
};
use docstruct::model::{load_checkpoint, save_checkpoint, Task};
use docstruct::mtt::Provenance;
use docstruct::synth::{synthesize, CorpusKind};
use docstruct::training::{self, evaluate, MetricRecord, RunFailure};
use docstruct::treeval::{
    aggregate_stats, compare_corpora, ppmi_root_words, read_rst_trees, read_trees, stats_table, tree_statistics,
    write_trees, AggregateStats, TreeStats,
};
use docstruct::{Error, Result};

use crate::{Cli, Command, GlobalArgs};

const RESOLVED_CONFIG: &str = "config.resolved";
const MANIFEST: &str = "manifest.tsv";

pub fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli.global)?;
    match cli.command {
        Command::Synthesize { kind, size } => cmd_synthesize(&config, &kind, size, cli.global.seed.unwrap_or(1)),
        Command::Train => cmd_train(&config),
        Command::Eval { checkpoint, corpus } => cmd_eval(&config, &checkpoint, corpus.as_deref()),
        Command::Analyze { checkpoint, corpus } => cmd_analyze(&config, &checkpoint, corpus.as_deref()),
        Command::Compare {
            induced,
            gold,
            gold_format,
        } => cmd_compare(&config, &induced, &gold, &gold_format),
        Command::Ppmi { trees, corpus, top_k } => cmd_ppmi(&config, &trees, &corpus, top_k),
    }
}

fn resolve_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.train.seed = seed;
    }
    if let Some(runs) = global.runs {
        config.train.num_runs = runs;
    }
    if let Some(out) = &global.out {
        config.out = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn out_path(config: &ExperimentConfig) -> Result<&Path> {
    config
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("no output location: pass --out or set out in the config".into()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Creation time and file list; the only artifact that differs between
/// identical invocations.
fn write_manifest(dir: &Path, files: &[String]) -> Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut text = format!("created_unix\t{}\n", secs);
    for f in files {
        let _ = writeln!(text, "file\t{}", f);
    }
    write(&dir.join(MANIFEST), &text)
}

fn cmd_synthesize(config: &ExperimentConfig, kind: &str, size: usize, seed: u64) -> Result<()> {
    let kind: CorpusKind = kind.parse()?;
    let out = out_path(config)?;
    let corpus = synthesize(kind, size, seed)?;
    create_dir(out)?;
    let mut files = Vec::new();
    for ((_, file), (_, docs)) in SPLITS.iter().zip(corpus.splits()) {
        write_corpus(out.join(file), docs)?;
        files.push(file.to_string());
    }
    write(&out.join(EMBEDDINGS_FILE), &corpus.embeddings_text(config.model.embed_dim, seed))?;
    files.push(EMBEDDINGS_FILE.to_string());
    if kind == CorpusKind::Ordering {
        let mut text = String::from("split\toriginal\tpermuted\tpermutation\n");
        for (i, (name, docs)) in corpus.splits().into_iter().enumerate() {
            for pair in corpus_pairs(docs, config.pairs_per_document, config.pair_seed.wrapping_add(i as u64)) {
                let _ = writeln!(
                    text,
                    "{}\t{}\t{}\t{}",
                    name,
                    pair.original.id,
                    pair.permuted.id,
                    format_permutation(&pair.permutation)
                );
            }
        }
        write(&out.join("pairs.tsv"), &text)?;
        files.push("pairs.tsv".to_string());
    }
    write_manifest(out, &files)?;
    println!(
        "{} corpus: {} train, {} dev, {} test documents in {}",
        kind,
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        out.display()
    );
    Ok(())
}

fn metrics_tsv(records: &[MetricRecord]) -> String {
    let mut text = String::from(MetricRecord::HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.to_tsv());
        text.push('\n');
    }
    text
}

fn cmd_train(config: &ExperimentConfig) -> Result<()> {
    let out = out_path(config)?;
    let corpus = CorpusSplits::load(config.corpus_dir()?)?;
    let vocab = build_vocabulary(config, &corpus.train)?;
    let train_split = encode_split(config, &corpus.train, &vocab, 0)?;
    let dev_split = encode_split(config, &corpus.dev, &vocab, 1)?;
    let test_split = encode_split(config, &corpus.test, &vocab, 2)?;

    create_dir(out)?;
    write(&out.join(RESOLVED_CONFIG), &config.to_text())?;
    let mut files = vec![RESOLVED_CONFIG.to_string()];

    let outcome = training::train(&config.model, &vocab, &train_split, &dev_split, &test_split, &config.train)?;

    let mut summary = String::from("run\tseed\tstatus\tbest_step\tdev_accuracy\tdev_loss\ttest_accuracy\ttest_loss\n");
    let mut failures: Vec<&RunFailure> = Vec::new();
    for (r, run) in outcome.runs.iter().enumerate() {
        let name = format!("run-{}", r + 1);
        match run {
            Ok(result) => {
                let dir = out.join(&name);
                create_dir(&dir)?;
                save_checkpoint(dir.join("best.ckpt"), &result.best_checkpoint(&config.model, &vocab))?;
                save_checkpoint(dir.join("last.ckpt"), &result.state.last_checkpoint(&config.model, &vocab))?;
                write(&dir.join("metrics.tsv"), &metrics_tsv(&result.state.metrics))?;
                for f in ["best.ckpt", "last.ckpt", "metrics.tsv"] {
                    files.push(format!("{}/{}", name, f));
                }
                let _ = writeln!(
                    summary,
                    "{}\t{}\tok\t{}\t{}\t{}\t{}\t{}",
                    name,
                    result.seed,
                    result.best_step,
                    result.best_dev_accuracy,
                    result.best_dev_loss,
                    result.test_accuracy,
                    result.test_loss
                );
            }
            Err(failure) => {
                let _ = writeln!(summary, "{}\t{}\tfailed\tNA\tNA\tNA\tNA\tNA", name, failure.seed);
                failures.push(failure);
            }
        }
    }
    if let Some(s) = &outcome.summary {
        let _ = writeln!(summary, "# test accuracy max | mean (std): {}", s.display());
    }
    write(&out.join("summary.tsv"), &summary)?;
    files.push("summary.tsv".to_string());

    if let Some(best) = outcome.best_run() {
        save_checkpoint(out.join("best.ckpt"), &best.best_checkpoint(&config.model, &vocab))?;
        files.push("best.ckpt".to_string());
        println!("best run: seed {} (dev accuracy {:.4})", best.seed, best.best_dev_accuracy);
    }
    write_manifest(out, &files)?;
    if let Some(s) = &outcome.summary {
        println!("test accuracy max | mean (std): {}", s.display());
    }

    for f in &failures {
        eprintln!("seed {} failed: {}", f.seed, f.error);
    }
    if let Some(f) = failures.iter().find(|f| f.numerical) {
        return Err(Error::Numerical(format!(
            "{} of {} runs failed (first numerical failure, seed {}: {})",
            failures.len(),
            outcome.runs.len(),
            f.seed,
            f.error
        )));
    }
    if outcome.summary.is_none() {
        return Err(Error::InvalidInput("every run failed".into()));
    }
    Ok(())
}

/// Documents from `--corpus`, or the configured analysis split.
fn documents(config: &ExperimentConfig, corpus: Option<&Path>) -> Result<(Vec<Document>, u64)> {
    match corpus {
        Some(path) => Ok((load_corpus(path)?, 0)),
        None => {
            let index = SPLITS
                .iter()
                .position(|(name, _)| *name == config.analysis_split)
                .expect("validated split name");
            let file = config.corpus_dir()?.join(SPLITS[index].1);
            Ok((load_corpus(file)?, index as u64))
        }
    }
}

fn cmd_eval(config: &ExperimentConfig, checkpoint: &Path, corpus: Option<&Path>) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let (model, vocab) = ckpt.restore()?;
    let (docs, split_index) = documents(config, corpus)?;
    let mut eval_config = config.clone();
    eval_config.model = ckpt.config.clone();
    let split = encode_split(&eval_config, &docs, &vocab, split_index)?;
    let metrics = evaluate(&model, &ckpt.params, &split)?;
    let text = format!(
        "loss\taccuracy\tcount\n{}\t{}\t{}\n",
        metrics.loss, metrics.accuracy, metrics.count
    );
    if let Some(out) = &config.out {
        write(out, &text)?;
    }
    print!("{}", text);
    Ok(())
}

fn per_document_tsv(rows: &[(String, usize, TreeStats)]) -> String {
    let mut text = String::from("doc_id\tsentences\ttree_height\tleaf_proportion\tnorm_arc_length\tparent_entropy\tvacuous\n");
    for (id, n, s) in rows {
        let entropy = s.parent_entropy.map_or_else(|| "NA".to_string(), |e| e.to_string());
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            id, n, s.height, s.leaf_proportion, s.norm_arc_length, entropy, s.vacuous
        );
    }
    text
}

fn ppmi_tsv(scores: &[(String, f64)], k: usize) -> String {
    let mut text = String::from("rank\tword\tppmi\n");
    for (i, (w, s)) in scores.iter().take(k).enumerate() {
        let _ = writeln!(text, "{}\t{}\t{:.6}", i + 1, w, s);
    }
    text
}

fn cmd_analyze(config: &ExperimentConfig, checkpoint: &Path, corpus: Option<&Path>) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    if !ckpt.config.doc_attention {
        return Err(Error::Config(format!(
            "{} was trained with doc_attention = false; there are no document trees to analyse",
            checkpoint.display()
        )));
    }
    if ckpt.config.task == Task::Ordering {
        log::info!("analysing an ordering model on its original documents");
    }
    let out = out_path(config)?.to_path_buf();
    let (model, vocab) = ckpt.restore()?;
    let (docs, _) = documents(config, corpus)?;
    let analysis = analyze_corpus(&model, &ckpt.params, &vocab, &docs)?;

    create_dir(&out)?;
    write(&out.join(RESOLVED_CONFIG), &config.to_text())?;
    write_trees(out.join("trees.tsv"), &analysis.trees())?;
    let rows: Vec<(String, usize, TreeStats)> = analysis
        .documents
        .iter()
        .map(|d| (d.id.clone(), d.tree.len(), d.stats))
        .collect();
    write(&out.join("per_document.tsv"), &per_document_tsv(&rows))?;

    let mut columns: Vec<(&str, AggregateStats)> = vec![("induced", analysis.aggregate)];
    if docs.iter().all(|d| d.gold_tree.is_some()) {
        let gold: Vec<TreeStats> = docs
            .iter()
            .map(|d| tree_statistics(d.gold_tree.as_ref().expect("checked above"), None))
            .collect::<Result<_>>()?;
        columns.push(("gold", aggregate_stats(&gold)?));
    }
    let refs: Vec<(&str, &AggregateStats)> = columns.iter().map(|(n, s)| (*n, s)).collect();
    let table = stats_table(&refs);
    write(&out.join(&config.stats_file), &table)?;

    let scores = analysis.ppmi(&docs, config.ppmi)?;
    let ppmi = ppmi_tsv(&scores, config.ppmi_top_k);
    write(&out.join("ppmi.tsv"), &ppmi)?;
    write_manifest(
        &out,
        &[
            RESOLVED_CONFIG.to_string(),
            "trees.tsv".to_string(),
            "per_document.tsv".to_string(),
            config.stats_file.clone(),
            "ppmi.tsv".to_string(),
        ],
    )?;
    print!("{}\n{}", table, ppmi);
    Ok(())
}

fn aggregate_file(trees: &[(String, docstruct::mtt::DepTree)]) -> Result<AggregateStats> {
    let stats: Vec<TreeStats> = trees
        .iter()
        .map(|(_, t)| tree_statistics(t, None))
        .collect::<Result<_>>()?;
    aggregate_stats(&stats)
}

fn cmd_compare(config: &ExperimentConfig, induced: &Path, gold: &Path, gold_format: &str) -> Result<()> {
    let induced_trees = read_trees(induced, Provenance::Induced)?;
    let gold_trees = match gold_format {
        "tsv" => read_trees(gold, Provenance::ParsedRst)?,
        "rst" => read_rst_trees(gold)?,
        other => {
            return Err(Error::Config(format!(
                "unknown gold format '{}' (expected tsv or rst)",
                other
            )))
        }
    };
    let missing = induced_trees
        .iter()
        .filter(|(id, _)| !gold_trees.iter().any(|(g, _)| g == id))
        .count();
    if missing > 0 {
        log::warn!("{} induced documents have no reference tree", missing);
    }
    let comparison = compare_corpora(&aggregate_file(&induced_trees)?, &aggregate_file(&gold_trees)?);
    let text = comparison.to_tsv();
    if let Some(out) = &config.out {
        write(out, &text)?;
    }
    print!("{}", text);
    Ok(())
}

fn cmd_ppmi(config: &ExperimentConfig, trees: &Path, corpus: &Path, top_k: Option<usize>) -> Result<()> {
    let trees = read_trees(trees, Provenance::Induced)?;
    let docs = load_corpus(corpus)?;
    let mut pairs = Vec::with_capacity(trees.len());
    for (id, tree) in &trees {
        let doc = docs
            .iter()
            .find(|d| &d.id == id)
            .ok_or_else(|| Error::InvalidInput(format!("tree for unknown document '{}'", id)))?;
        pairs.push((doc.sentences.as_slice(), tree));
    }
    let scores = ppmi_root_words(&pairs, config.ppmi)?;
    let text = ppmi_tsv(&scores, top_k.unwrap_or(config.ppmi_top_k));
    if let Some(out) = &config.out {
        write(out, &text)?;
    }
    print!("{}", text);
    Ok(())
}
