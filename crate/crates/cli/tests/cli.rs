use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn docstruct(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docstruct"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Every file under `dir` except manifests, with its contents.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "manifest.tsv" {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn synthesize(dir: &Path, kind: &str, size: &str, out: &str) {
    let o = docstruct(dir, &["synthesize", kind, "--size", size, "--seed", "5", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn write_config(dir: &Path, name: &str, extra: &str) {
    let text = format!(
        "corpus = corpus\nembeddings = corpus/embeddings.txt\nhidden_dim = 8\nembed_dim = 24\nmax_steps = 6\neval_interval = 3\nbatch_size = 8\n{}",
        extra
    );
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn synthesize_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    synthesize(tmp.path(), "root-cue", "60", "a");
    synthesize(tmp.path(), "root-cue", "60", "b");
    let a = snapshot(&tmp.path().join("a"));
    assert_eq!(a.len(), 4);
    assert!(a == snapshot(&tmp.path().join("b")), "corpora differ");
    assert!(tmp.path().join("a/manifest.tsv").exists());
}

#[test]
fn ordering_pairs_are_valid_permutations() {
    let tmp = TempDir::new().unwrap();
    synthesize(tmp.path(), "ordering", "30", "o");
    let text = fs::read_to_string(tmp.path().join("o/pairs.tsv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 4);
        let perm: Vec<usize> = f[3].split('-').map(|x| x.parse().unwrap()).collect();
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..perm.len()).collect::<Vec<_>>());
        assert_ne!(perm, sorted, "identity permutation in {}", line);
        assert_eq!(f[2], format!("{}#{}", f[1], f[3]));
        rows += 1;
    }
    assert!(rows > 30);
}

#[test]
fn train_emits_one_checkpoint_per_run_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synthesize(dir, "root-cue", "40", "corpus");
    write_config(dir, "run.cfg", "num_runs = 1\n");

    let o = docstruct(dir, &["train", "--config", "run.cfg", "--runs", "2", "--out", "t1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for r in 1..=2 {
        for f in ["best.ckpt", "last.ckpt", "metrics.tsv"] {
            assert!(dir.join(format!("t1/run-{}/{}", r, f)).exists());
        }
    }
    assert!(!dir.join("t1/run-3").exists());
    let summary = fs::read_to_string(dir.join("t1/summary.tsv")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.starts_with("run-")).count(), 2);
    let resolved = fs::read_to_string(dir.join("t1/config.resolved")).unwrap();
    assert!(resolved.contains("num_runs = 2"));

    let o = docstruct(dir, &["train", "--config", "run.cfg", "--runs", "2", "--out", "t2"]);
    assert_eq!(code(&o), 0);
    let strip = |files: Vec<(PathBuf, Vec<u8>)>| -> Vec<(PathBuf, Vec<u8>)> {
        files.into_iter().filter(|(p, _)| p != Path::new("config.resolved")).collect()
    };
    assert!(
        strip(snapshot(&dir.join("t1"))) == strip(snapshot(&dir.join("t2"))),
        "training outputs differ between identical runs"
    );
}

#[test]
fn full_pipeline_on_root_cue_corpus() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synthesize(dir, "root-cue", "40", "corpus");
    write_config(dir, "run.cfg", "num_runs = 1\nppmi_top_k = 4\n");

    let o = docstruct(dir, &["train", "--config", "run.cfg", "--out", "model"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = docstruct(dir, &["eval", "--config", "run.cfg", "--checkpoint", "model/best.ckpt", "--out", "eval.tsv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let eval = fs::read_to_string(dir.join("eval.tsv")).unwrap();
    assert!(eval.starts_with("loss\taccuracy\tcount\n"));
    assert!(eval.lines().nth(1).unwrap().ends_with("\t4"));

    let analyze = |out: &str| {
        let o = docstruct(
            dir,
            &["analyze", "--config", "run.cfg", "--checkpoint", "model/best.ckpt", "--out", out],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    analyze("a1");
    analyze("a2");
    let outputs = |d: &str| -> Vec<(PathBuf, String)> {
        snapshot(&dir.join(d))
            .into_iter()
            .filter(|(p, _)| p != Path::new("config.resolved"))
            .map(|(p, b)| (p, String::from_utf8(b).unwrap()))
            .collect()
    };
    assert_eq!(outputs("a1").len(), 4);
    assert!(outputs("a1") == outputs("a2"), "analysis differs between identical runs");
    let trees = fs::read_to_string(dir.join("a1/trees.tsv")).unwrap();
    assert!(trees.starts_with("doc_id\tposition\thead\n"));
    let stats = fs::read_to_string(dir.join("a1/tree_stats.tsv")).unwrap();
    assert!(stats.starts_with("statistic\tinduced\n"));
    assert!(stats.contains("vacuous_percent\t"));
    let ppmi = fs::read_to_string(dir.join("a1/ppmi.tsv")).unwrap();
    assert_eq!(ppmi.lines().count(), 5);

    let o = docstruct(dir, &["ppmi", "--trees", "a1/trees.tsv", "--corpus", "corpus/dev.jsonl", "--top-k", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout), ppmi);

    let o = docstruct(dir, &["compare", "--induced", "a1/trees.tsv", "--gold", "a1/trees.tsv", "--out", "cmp.tsv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cmp = fs::read_to_string(dir.join("cmp.tsv")).unwrap();
    let delta = cmp.lines().find(|l| l.starts_with("delta")).unwrap();
    assert_eq!(delta, "delta\t0.0000\t0.0000\t0.0000\tNA\t0.0000");
}

#[test]
fn analyze_refuses_models_without_document_attention() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synthesize(dir, "root-cue", "20", "corpus");
    write_config(dir, "flat.cfg", "num_runs = 1\ndoc_attention = false\n");
    let o = docstruct(dir, &["train", "--config", "flat.cfg", "--out", "flat"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = docstruct(
        dir,
        &["analyze", "--config", "flat.cfg", "--checkpoint", "flat/best.ckpt", "--out", "an"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("doc_attention = false"), "{}", stderr(&o));
    assert!(!dir.join("an").exists());
}

#[test]
fn compare_reads_bracketed_rst_references() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("induced.tsv"), "doc_id\tposition\thead\nd1\t1\t0\nd1\t2\t1\nd1\t3\t1\n").unwrap();
    fs::write(dir.join("gold.rst"), "d1\t(N:1/1 S:(N:2/2 S:3/3))\n").unwrap();
    let o = docstruct(dir, &["compare", "--induced", "induced.tsv", "--gold", "gold.rst", "--gold-format", "rst"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    // Star of height 2 against the chain 1 <- 2 <- 3 of height 3.
    assert!(text.contains("induced\t2.0000\t0.6667\t0.5000\tNA\t100.0000"), "{}", text);
    assert!(text.contains("reference\t3.0000\t0.3333\t0.3333\tNA\t0.0000"), "{}", text);
    assert!(text.contains("delta\t1.0000\t-0.3333\t-0.1667\tNA\t-100.0000"), "{}", text);

    let o = docstruct(dir, &["compare", "--induced", "induced.tsv", "--gold", "gold.rst", "--gold-format", "xml"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&docstruct(dir, &["--help"])), 0);
    assert_eq!(code(&docstruct(dir, &["--version"])), 0);
    assert_eq!(code(&docstruct(dir, &["frobnicate"])), 1);
    assert_eq!(code(&docstruct(dir, &["synthesize", "poetry", "--out", "x"])), 1);
    assert_eq!(code(&docstruct(dir, &["synthesize", "root-cue"])), 1);

    fs::write(dir.join("bad.cfg"), "hidden_dimension = 8\n").unwrap();
    let o = docstruct(dir, &["train", "--config", "bad.cfg", "--out", "x"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.cfg:1"), "{}", stderr(&o));

    assert_eq!(code(&docstruct(dir, &["train", "--config", "missing.cfg", "--out", "x"])), 2);
    fs::create_dir(dir.join("corpus")).unwrap();
    fs::write(dir.join("corpus/train.jsonl"), "{\"id\": 1}\n").unwrap();
    fs::write(dir.join("c.cfg"), "corpus = corpus\n").unwrap();
    let o = docstruct(dir, &["train", "--config", "c.cfg", "--out", "x"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("train.jsonl:1"), "{}", stderr(&o));
}

#[test]
fn numerical_failure_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synthesize(dir, "root-cue", "20", "corpus");
    write_config(dir, "nan.cfg", "num_runs = 1\nlearning_rate = 1e300\n");
    let o = docstruct(dir, &["train", "--config", "nan.cfg", "--out", "nan"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let summary = fs::read_to_string(dir.join("nan/summary.tsv")).unwrap();
    assert!(summary.contains("\tfailed\t"));
}
