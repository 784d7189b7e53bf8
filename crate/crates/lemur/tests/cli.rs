//! End-to-end tests of the `lemur` binary: the full experiment flow,
//! error reporting, exit codes, and the documented flag defaults.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lemur() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lemur"));
    c.env_remove("LEMUR_SEED");
    c
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn lemur");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, name: &str, m: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    run_ok(lemur().args([
        "synth",
        "--m",
        &m.to_string(),
        "--d",
        "8",
        "--t-min",
        "2",
        "--t-max",
        "5",
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]));
    path
}

/// Small-but-real training settings shared by the flow tests.
const TRAIN_ARGS: [&str; 14] = [
    "--d-prime", "16", "--m-prime", "32", "--n", "512", "--n-prime", "128", "--epochs", "4",
    "--batch-size", "64", "--seed", "9",
];

#[test]
fn full_flow_reaches_exact_recall_at_full_enumeration() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(dir.path(), "corpus.mvec", 120, 1);
    let queries = synth(dir.path(), "queries.mvec", 15, 2);
    let truth = dir.path().join("truth.bin");
    run_ok(lemur().args([
        "oracle",
        "--corpus",
        corpus.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--k",
        "10",
        "--out",
        truth.to_str().unwrap(),
    ]));

    let idx = dir.path().join("idx");
    let mut cmd = lemur();
    cmd.args(["index", "--corpus", corpus.to_str().unwrap(), "--mips", "exact", "--out", idx.to_str().unwrap()]);
    cmd.args(TRAIN_ARGS);
    run_ok(&mut cmd);
    assert!(idx.join("model.bin").is_file());
    assert!(idx.join("mips.bin").is_file());
    assert!(idx.join("manifest.txt").is_file());

    // query with k' = m (full enumeration) and dump results
    let results = dir.path().join("results.bin");
    run_ok(lemur().args([
        "query",
        "--index",
        idx.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--k",
        "10",
        "--k-prime",
        "120",
        "--out",
        results.to_str().unwrap(),
    ]));

    // dumped ids must equal the oracle ids exactly
    let truth_bytes = std::fs::read(&truth).unwrap();
    let result_bytes = std::fs::read(&results).unwrap();
    assert_eq!(truth_bytes, result_bytes, "full enumeration must reproduce the oracle file");
}

#[test]
fn bench_csv_recall_recounts_from_dumps() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(dir.path(), "corpus.mvec", 100, 3);
    let queries = synth(dir.path(), "queries.mvec", 10, 4);
    let truth = dir.path().join("truth.bin");
    run_ok(lemur().args([
        "oracle",
        "--corpus",
        corpus.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--k",
        "5",
        "--out",
        truth.to_str().unwrap(),
    ]));
    let idx = dir.path().join("idx");
    let mut cmd = lemur();
    cmd.args(["index", "--corpus", corpus.to_str().unwrap(), "--mips", "exact", "--out", idx.to_str().unwrap()]);
    cmd.args(TRAIN_ARGS);
    run_ok(&mut cmd);

    let csv = dir.path().join("bench.csv");
    let dumps = dir.path().join("dumps");
    run_ok(lemur().args([
        "bench",
        "--index",
        idx.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--k",
        "5",
        "--k-prime",
        "10,100",
        "--repetitions",
        "1",
        "--out",
        csv.to_str().unwrap(),
        "--dump-dir",
        dumps.to_str().unwrap(),
    ]));

    let rows = lemur::bench::read_csv(&csv).unwrap();
    let truth_data = lemur::format::read_ground_truth(&truth).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let dump = lemur::format::read_ground_truth(
            &dumps.join(format!("cell_ef{}_kp{}.bin", row.ef_search, row.k_prime)),
        )
        .unwrap();
        let mut total = 0.0;
        for (qi, list) in dump.lists.iter().enumerate() {
            let got: Vec<usize> = list.iter().map(|s| s.doc_id).collect();
            let want: Vec<usize> = truth_data.lists[qi].iter().map(|s| s.doc_id).collect();
            total += lemur_core::maxsim::recall(&got, &want).unwrap();
        }
        let recounted = total / dump.lists.len() as f64;
        assert_eq!(row.mean_recall, recounted, "CSV recall must recount from dumps");
    }
    // the exhaustive cell is exact
    assert_eq!(rows[1].k_prime, 100);
    assert_eq!(rows[1].mean_recall, 1.0);
}

#[test]
fn missing_corpus_reports_path_with_io_exit_code() {
    let dir = TempDir::new().unwrap();
    let queries = synth(dir.path(), "queries.mvec", 5, 5);
    let out = dir.path().join("t.bin");
    let missing = dir.path().join("nope.mvec");
    let output = lemur()
        .args([
            "oracle",
            "--corpus",
            missing.to_str().unwrap(),
            "--queries",
            queries.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(5), "I/O errors exit with 5");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("nope.mvec"), "message must name the file: {stderr}");
}

#[test]
fn argument_and_format_errors_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(dir.path(), "corpus.mvec", 20, 6);

    // argument error: m' larger than the corpus
    let output = lemur()
        .args([
            "train",
            "--corpus",
            corpus.to_str().unwrap(),
            "--m-prime",
            "500",
            "--out",
            dir.path().join("m.bin").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--m-prime"), "message must name the flag: {stderr}");

    // format error: corrupted input
    let bad = dir.path().join("bad.mvec");
    let mut bytes = std::fs::read(&corpus).unwrap();
    bytes.truncate(bytes.len() - 2);
    std::fs::write(&bad, bytes).unwrap();
    let output = lemur()
        .args([
            "oracle",
            "--corpus",
            bad.to_str().unwrap(),
            "--queries",
            corpus.to_str().unwrap(),
            "--out",
            dir.path().join("t.bin").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn seed_env_var_is_honored() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.mvec");
    let b = dir.path().join("b.mvec");
    let c = dir.path().join("c.mvec");
    let base = ["synth", "--m", "10", "--d", "4"];
    run_ok(lemur().args(base).args(["--seed", "123", "--out", a.to_str().unwrap()]));
    run_ok(lemur().env("LEMUR_SEED", "123").args(base).args(["--out", b.to_str().unwrap()]));
    run_ok(lemur().args(base).args(["--out", c.to_str().unwrap()])); // default seed 42
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn training_flags_carry_reference_defaults() {
    let help = |args: &[&str]| {
        let out = run_ok(lemur().args(args));
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    let train_help = help(&["train", "--help"]);
    for (flag, default) in [
        ("--d-prime", "2048"),
        ("--m-prime", "8192"),
        ("--n", "100000"),
        ("--n-prime", "16384"),
        ("--lr", "0.003"),
        ("--epochs", "100"),
        ("--batch-size", "512"),
        ("--grad-clip", "0.5"),
    ] {
        let needle = format!("{flag} ");
        assert!(train_help.contains(&needle), "missing flag {flag}");
        let section = train_help.split(&needle).nth(1).unwrap();
        let tail = &section[..section.find("--").unwrap_or(section.len())];
        assert!(
            tail.contains(&format!("[default: {default}]")),
            "{flag} default mismatch; help section: {tail}"
        );
    }
    let index_help = help(&["index", "--help"]);
    for (flag, default) in [("--degree", "64"), ("--l-build", "800")] {
        let section = index_help.split(&format!("{flag} ")).nth(1).unwrap();
        let tail = &section[..section.find("--").unwrap_or(section.len())];
        assert!(
            tail.contains(&format!("[default: {default}]")),
            "{flag} default mismatch; help section: {tail}"
        );
    }
}

#[test]
fn training_token_source_is_interchangeable() {
    // The engine must accept any embedding file as the training-token
    // source; nothing downstream branches on where the tokens came from.
    let dir = TempDir::new().unwrap();
    let corpus = synth(dir.path(), "corpus.mvec", 80, 21);
    let alt_source = synth(dir.path(), "alt.mvec", 40, 22);
    let from_corpus = dir.path().join("a.model");
    let from_alt = dir.path().join("b.model");
    let mut cmd = lemur();
    cmd.args(["train", "--corpus", corpus.to_str().unwrap(), "--out", from_corpus.to_str().unwrap()]);
    cmd.args(TRAIN_ARGS);
    run_ok(&mut cmd);
    let mut cmd = lemur();
    cmd.args([
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--train-tokens",
        alt_source.to_str().unwrap(),
        "--out",
        from_alt.to_str().unwrap(),
    ]);
    cmd.args(TRAIN_ARGS);
    run_ok(&mut cmd);

    let a = lemur::format::read_model(&from_corpus).unwrap();
    let b = lemur::format::read_model(&from_alt).unwrap();
    assert_eq!(a.d(), b.d());
    assert_eq!(a.m_out(), b.m_out());
    // different token distributions train different weights
    assert_ne!(std::fs::read(&from_corpus).unwrap(), std::fs::read(&from_alt).unwrap());
}

#[test]
fn query_rejects_k_above_k_prime() {
    let dir = TempDir::new().unwrap();
    let corpus = synth(dir.path(), "corpus.mvec", 60, 7);
    let idx = dir.path().join("idx");
    let mut cmd = lemur();
    cmd.args(["index", "--corpus", corpus.to_str().unwrap(), "--mips", "exact", "--out", idx.to_str().unwrap()]);
    cmd.args(TRAIN_ARGS);
    run_ok(&mut cmd);
    let output = lemur()
        .args([
            "query",
            "--index",
            idx.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
            "--queries",
            corpus.to_str().unwrap(),
            "--k",
            "20",
            "--k-prime",
            "10",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}
