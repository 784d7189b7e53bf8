//! `lemur` command-line front end: synthetic data, exact ground truth,
//! model training, index construction, querying, and the benchmark /
//! ablation harness. Every command writes its artifact plus a manifest
//! recording the configuration, seeds, and input digests.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lemur::bench::{
    ablate_anns, ablate_latent_dim, run_grid, write_csv, write_dim_csv, GridSpec,
};
use lemur::error::Result;
use lemur::format::{
    read_corpus, read_ground_truth, read_index_dir, read_model, write_corpus, write_ground_truth,
    write_index_dir, write_model, INDEX_MANIFEST_FILE,
};
use lemur::manifest::Manifest;
use lemur::pipeline::{
    batch_query, corpus_as_queries, exact_ground_truth, LemurIndex, MipsMode,
};
use lemur::synth::{synth_corpus, SynthSpec};
use lemur_core::corpus::{sample_training_tokens, Corpus, MultiVectorDoc};
use lemur_core::linalg::Mat;
use lemur_core::maxsim::{GroundTruth, ScoredDoc};
use lemur_core::mips::{BuildParams, MipsIndex, SearchParams};
use lemur_core::model::{build_training_set, TrainConfig};
use lemur_core::ols::{fit_full_head, OlsConfig};
use lemur_core::rng::{derive_seed, streams};
use lemur_core::train::train;
use lemur_core::Error as CoreError;

#[derive(Parser)]
#[command(
    name = "lemur",
    version,
    about = "Multi-vector similarity search via learned single-vector reduction"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic embedding file (Gaussian cluster per document)
    Synth(SynthArgs),
    /// Compute exact MaxSim ground truth for a query set
    Oracle(OracleArgs),
    /// Train a model (gradient pre-training + closed-form head over all documents)
    Train(TrainArgs),
    /// Build a queryable index directory (model + MIPS structure)
    Index(IndexArgs),
    /// Run queries against an index directory
    Query(QueryArgs),
    /// Grid-search query hyperparameters and measure recall / QPS
    Bench(BenchArgs),
    /// Sweep the latent width and measure candidate recall per k'
    AblateDim(AblateDimArgs),
    /// Compare graph search against the exact scan on one shared model
    AblateAnns(AblateAnnsArgs),
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Training hyperparameters (shared by train/index/ablate commands).
#[derive(Args, Clone)]
struct TrainFlags {
    /// Hidden (latent) layer width d'
    #[arg(long, default_value_t = 2048)]
    d_prime: usize,
    /// Documents sampled as phase-1 training targets (m')
    #[arg(long, default_value_t = 8192)]
    m_prime: usize,
    /// Token embeddings sampled as the training set (n)
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Token embeddings sampled for the closed-form head fit (n')
    #[arg(long, default_value_t = 16_384)]
    n_prime: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = 0.003)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    /// Global-norm gradient clip
    #[arg(long, default_value_t = 0.5)]
    grad_clip: f64,
    /// Diagonal regularizer for the head fit
    #[arg(long, default_value_t = 1e-6)]
    ridge_eps: f64,
    /// Master seed (falls back to the LEMUR_SEED environment variable)
    #[arg(long, env = "LEMUR_SEED", default_value_t = 42)]
    seed: u64,
    /// Embedding file to sample training tokens from (defaults to the corpus itself)
    #[arg(long)]
    train_tokens: Option<PathBuf>,
}

impl TrainFlags {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            d_prime: self.d_prime,
            m_prime: self.m_prime,
            n: self.n,
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            grad_clip: self.grad_clip,
            seed: self.seed,
        }
    }

    fn ols_config(&self) -> OlsConfig {
        OlsConfig { n_prime: self.n_prime, ridge_eps: self.ridge_eps, seed: self.seed }
    }

    fn record(&self, man: &mut Manifest) {
        man.push("d_prime", self.d_prime);
        man.push("m_prime", self.m_prime);
        man.push("n", self.n);
        man.push("n_prime", self.n_prime);
        man.push("lr", self.lr);
        man.push("epochs", self.epochs);
        man.push("batch_size", self.batch_size);
        man.push("grad_clip", self.grad_clip);
        man.push("ridge_eps", self.ridge_eps);
        man.push("seed", self.seed);
        if let Some(p) = &self.train_tokens {
            man.push("train_tokens", p.display());
        }
    }

    /// Validate flags against the corpus and warn about risky settings.
    fn check(&self, corpus: &Corpus) -> Result<()> {
        if self.m_prime > corpus.len() {
            return Err(CoreError::Argument(format!(
                "--m-prime {} exceeds the corpus document count {}",
                self.m_prime,
                corpus.len()
            ))
            .into());
        }
        if self.batch_size > self.n {
            return Err(CoreError::Argument(format!(
                "--batch-size {} exceeds --n {}",
                self.batch_size, self.n
            ))
            .into());
        }
        if self.n_prime < self.d_prime {
            eprintln!(
                "warning: --n-prime {} is below --d-prime {}; the head fit relies on the ridge term",
                self.n_prime, self.d_prime
            );
        }
        Ok(())
    }

    /// Sample phase-1 and head-fit tokens from the configured source.
    fn sample_tokens(&self, corpus: &Corpus) -> Result<(Mat<f32>, Mat<f32>)> {
        let source_owned;
        let source = match &self.train_tokens {
            Some(path) => {
                source_owned = read_corpus(path)?;
                if source_owned.dim() != corpus.dim() {
                    return Err(CoreError::DimMismatch {
                        expected: corpus.dim(),
                        got: source_owned.dim(),
                    }
                    .into());
                }
                &source_owned
            }
            None => corpus,
        };
        let train = sample_training_tokens(
            source,
            self.n,
            derive_seed(self.seed, streams::TRAIN_TOKENS),
        )?;
        let ols = sample_training_tokens(
            source,
            self.n_prime,
            derive_seed(self.seed, streams::OLS_TOKENS),
        )?;
        Ok((train, ols))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MipsKind {
    Exact,
    Graph,
}

#[derive(Args, Clone)]
struct MipsFlags {
    #[arg(long, value_enum, default_value_t = MipsKind::Graph)]
    mips: MipsKind,
    /// Graph degree bound R
    #[arg(long, default_value_t = 64)]
    degree: usize,
    /// Insertion-time beam width L
    #[arg(long, default_value_t = 800)]
    l_build: usize,
}

impl MipsFlags {
    fn mode(&self) -> MipsMode {
        match self.mips {
            MipsKind::Exact => MipsMode::Exact,
            MipsKind::Graph => {
                MipsMode::Graph(BuildParams { r: self.degree, l_build: self.l_build })
            }
        }
    }

    fn record(&self, man: &mut Manifest) {
        man.push("mips", if self.mips == MipsKind::Exact { "exact" } else { "graph" });
        man.push("degree", self.degree);
        man.push("l_build", self.l_build);
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Number of documents
    #[arg(long)]
    m: usize,
    /// Embedding dimension
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    t_min: usize,
    #[arg(long, default_value_t = 8)]
    t_max: usize,
    #[arg(long, env = "LEMUR_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Reuse an existing model file instead of training
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    mips: MipsFlags,
    /// Output index directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Index directory produced by `lemur index`
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Candidates retrieved before reranking
    #[arg(long, default_value_t = 1000)]
    k_prime: usize,
    /// Beam width (defaults to k')
    #[arg(long)]
    ef_search: Option<usize>,
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    /// Optional result dump (ground-truth binary layout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ground-truth file from `lemur oracle`
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Candidate counts k' (comma separated)
    #[arg(long, value_delimiter = ',', default_values_t = [200usize, 500, 1000, 2000, 5000])]
    k_prime: Vec<usize>,
    /// Beam widths (comma separated); defaults to {1,2,4} x k' per cell
    #[arg(long, value_delimiter = ',')]
    ef_search: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    /// Results CSV
    #[arg(long)]
    out: PathBuf,
    /// If set, write per-cell result dumps here for recall recounting
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AblateDimArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Latent widths to sweep (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Candidate counts k' (comma separated)
    #[arg(long, value_delimiter = ',', default_values_t = [200usize, 500, 1000, 2000, 5000])]
    k_prime: Vec<usize>,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateAnnsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
    /// Graph degree bound R
    #[arg(long, default_value_t = 64)]
    degree: usize,
    /// Insertion-time beam width L
    #[arg(long, default_value_t = 800)]
    l_build: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [200usize, 500, 1000, 2000, 5000])]
    k_prime: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    ef_search: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    #[arg(long)]
    out_exact: PathBuf,
    #[arg(long)]
    out_graph: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Index(a) => cmd_index(a),
        Cmd::Query(a) => cmd_query(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::AblateDim(a) => cmd_ablate_dim(a),
        Cmd::AblateAnns(a) => cmd_ablate_anns(a),
    }
}

fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    artifact.with_file_name(name)
}

fn load_queries(path: &Path) -> Result<Vec<MultiVectorDoc>> {
    Ok(corpus_as_queries(&read_corpus(path)?))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec { m: a.m, d: a.d, t_min: a.t_min, t_max: a.t_max, seed: a.seed };
    let corpus = synth_corpus(&spec)?;
    write_corpus(&corpus, &a.out)?;
    let mut man = Manifest::new("synth");
    man.push("m", a.m);
    man.push("d", a.d);
    man.push("t_min", a.t_min);
    man.push("t_max", a.t_max);
    man.push("seed", a.seed);
    man.push("out", a.out.display());
    man.write(&manifest_path(&a.out))?;
    println!(
        "wrote {} documents ({} tokens, d={}) to {}",
        corpus.len(),
        corpus.total_tokens(),
        corpus.dim(),
        a.out.display()
    );
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let queries = load_queries(&a.queries)?;
    let truth = exact_ground_truth(&corpus, &queries, a.k, a.threads)?;
    write_ground_truth(&truth, &a.out)?;
    let mut man = Manifest::new("oracle");
    man.push_input("corpus", &a.corpus)?;
    man.push_input("queries", &a.queries)?;
    man.push("k", a.k);
    man.push("threads", a.threads);
    man.push("out", a.out.display());
    man.write(&manifest_path(&a.out))?;
    println!("wrote exact top-{} for {} queries to {}", truth.k, queries.len(), a.out.display());
    Ok(())
}

/// Two-phase training against a corpus: returns the full-head model.
fn train_full_model(corpus: &Arc<Corpus>, flags: &TrainFlags) -> Result<lemur_core::LemurModel> {
    flags.check(corpus)?;
    let (train_tokens, ols_tokens) = flags.sample_tokens(corpus)?;
    let cfg = flags.train_config();
    let training = build_training_set(corpus, &train_tokens, &cfg)?;
    let (phase1, report) = train(&training, &cfg)?;
    if let (Some(first), Some(last)) = (report.epoch_losses.first(), report.epoch_losses.last()) {
        println!("phase-1 loss: {first:.6} -> {last:.6} over {} epochs", cfg.epochs);
    }
    Ok(fit_full_head(&phase1, corpus, &ols_tokens, &flags.ols_config())?)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let corpus = Arc::new(read_corpus(&a.corpus)?);
    let model = train_full_model(&corpus, &a.train)?;
    write_model(&model, &a.out)?;
    let mut man = Manifest::new("train");
    man.push_input("corpus", &a.corpus)?;
    if let Some(t) = &a.train.train_tokens {
        man.push_input("train_tokens", t)?;
    }
    a.train.record(&mut man);
    man.push("out", a.out.display());
    man.write(&manifest_path(&a.out))?;
    println!(
        "wrote model (d={}, d'={}, rows={}) to {}",
        model.d(),
        model.d_prime(),
        model.m_out(),
        a.out.display()
    );
    Ok(())
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    let corpus = Arc::new(read_corpus(&a.corpus)?);
    let model = match &a.model {
        Some(path) => {
            let model = read_model(path)?;
            if model.m_out() != corpus.len() {
                return Err(CoreError::Argument(format!(
                    "--model {} has {} rows but the corpus holds {} documents",
                    path.display(),
                    model.m_out(),
                    corpus.len()
                ))
                .into());
            }
            model
        }
        None => train_full_model(&corpus, &a.train)?,
    };
    let mips = match a.mips.mode() {
        MipsMode::Exact => MipsIndex::build_exact(model.w_out.clone())?,
        MipsMode::Graph(p) => MipsIndex::build_graph(model.w_out.clone(), &p)?,
    };
    let index = LemurIndex::from_parts(model, mips, corpus)?;
    write_index_dir(&index, &a.out)?;
    let mut man = Manifest::new("index");
    man.push_input("corpus", &a.corpus)?;
    if let Some(m) = &a.model {
        man.push_input("model", m)?;
    } else {
        a.train.record(&mut man);
    }
    a.mips.record(&mut man);
    man.push("out", a.out.display());
    man.write(&a.out.join(INDEX_MANIFEST_FILE))?;
    println!(
        "wrote index ({} docs, d'={}, {}) to {}",
        index.corpus.len(),
        index.model.d_prime(),
        if index.mips.is_graph() { "graph" } else { "exact scan" },
        a.out.display()
    );
    Ok(())
}

fn cmd_query(a: QueryArgs) -> Result<()> {
    let corpus = Arc::new(read_corpus(&a.corpus)?);
    let index = read_index_dir(&a.index, corpus)?;
    let queries = load_queries(&a.queries)?;
    let ef = a.ef_search.unwrap_or(a.k_prime);
    let params = SearchParams { ef_search: ef, k_prime: a.k_prime };
    let t = std::time::Instant::now();
    let results = batch_query(&index, &queries, a.k, &params, a.threads)?;
    let wall = t.elapsed().as_secs_f64();

    let nq = queries.len() as f64;
    let mean_ms = |f: fn(&lemur::QueryTiming) -> u64| {
        results.iter().map(|r| f(&r.timing) as f64).sum::<f64>() / nq / 1e6
    };
    println!(
        "{} queries, k={}, k'={}, ef={} | qps {:.1} | mean encode {:.3} ms, anns {:.3} ms, rerank {:.3} ms",
        queries.len(),
        a.k,
        a.k_prime,
        ef,
        nq / wall,
        mean_ms(|t| t.encode_ns),
        mean_ms(|t| t.anns_ns),
        mean_ms(|t| t.rerank_ns),
    );

    if let Some(out) = &a.out {
        let dump = GroundTruth {
            k: a.k,
            lists: results
                .iter()
                .map(|r| {
                    r.hits
                        .iter()
                        .map(|h| ScoredDoc { doc_id: h.doc_id, score: h.score })
                        .collect()
                })
                .collect(),
        };
        write_ground_truth(&dump, out)?;
        let mut man = Manifest::new("query");
        man.push_input("corpus", &a.corpus)?;
        man.push_input("queries", &a.queries)?;
        man.push("index", a.index.display());
        man.push("k", a.k);
        man.push("k_prime", a.k_prime);
        man.push("ef_search", ef);
        man.push("threads", a.threads);
        man.push("out", out.display());
        man.write(&manifest_path(out))?;
        println!("wrote result dump to {}", out.display());
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let corpus = Arc::new(read_corpus(&a.corpus)?);
    let index = read_index_dir(&a.index, corpus)?;
    let queries = load_queries(&a.queries)?;
    let truth = read_ground_truth(&a.truth)?;
    let grid = GridSpec {
        ef_search: a.ef_search.clone(),
        k_prime: a.k_prime.clone(),
        k: a.k,
        repetitions: a.repetitions,
    };
    let (results, dumps) = run_grid(&index, &queries, &truth, &grid, a.threads)?;
    for r in &results {
        println!(
            "ef={:6} k'={:6} | recall {:.4} | qps {:10.1} | p50 {:.3} ms | p99 {:.3} ms",
            r.ef_search, r.k_prime, r.mean_recall, r.qps, r.p50_ms, r.p99_ms
        );
    }
    write_csv(&results, &a.out)?;
    if let Some(dir) = &a.dump_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| lemur::Error::Io { path: dir.clone(), source: e })?;
        for d in &dumps {
            let p = dir.join(format!("cell_ef{}_kp{}.bin", d.ef_search, d.k_prime));
            write_ground_truth(&d.results, &p)?;
        }
        println!("wrote {} result dumps to {}", dumps.len(), dir.display());
    }
    let mut man = Manifest::new("bench");
    man.push_input("corpus", &a.corpus)?;
    man.push_input("queries", &a.queries)?;
    man.push_input("truth", &a.truth)?;
    man.push("index", a.index.display());
    man.push("k", a.k);
    man.push("k_prime", join(&a.k_prime));
    man.push("ef_search", join(&a.ef_search));
    man.push("repetitions", a.repetitions);
    man.push("threads", a.threads);
    man.push("out", a.out.display());
    man.write(&manifest_path(&a.out))?;
    println!("wrote {} grid cells to {}", results.len(), a.out.display());
    Ok(())
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn cmd_ablate_dim(a: AblateDimArgs) -> Result<()> {
    let corpus = Arc::new(read_corpus(&a.corpus)?);
    let queries = load_queries(&a.queries)?;
    let truth = read_ground_truth(&a.truth)?;
    // the sweep overrides --d-prime, so validate against the widest dim
    let widest = TrainFlags { d_prime: a.dims.iter().copied().max().unwrap_or(1), ..a.train.clone() };
    widest.check(&corpus)?;
    let (train_tokens, ols_tokens) = a.train.sample_tokens(&corpus)?;
    let rows = ablate_latent_dim(
        corpus,
        &train_tokens,
        &ols_tokens,
        &queries,
        &truth,
        &a.dims,
        &a.train.train_config(),
        &a.train.ols_config(),
        &a.k_prime,
        a.threads,
    )?;
    for r in &rows {
        println!("d'={:6} k'={:6} | recall {:.4}", r.d_prime, r.k_prime, r.recall);
    }
    write_dim_csv(&rows, &a.out)?;
    let mut man = Manifest::new("ablate-dim");
    man.push_input("corpus", &a.corpus)?;
    man.push_input("queries", &a.queries)?;
    man.push_input("truth", &a.truth)?;
    man.push("dims", join(&a.dims));
    man.push("k_prime", join(&a.k_prime));
    a.train.record(&mut man);
    man.push("threads", a.threads);
    man.push("out", a.out.display());
    man.write(&manifest_path(&a.out))?;
    println!("wrote {} ablation rows to {}", rows.len(), a.out.display());
    Ok(())
}

fn cmd_ablate_anns(a: AblateAnnsArgs) -> Result<()> {
    let corpus = Arc::new(read_corpus(&a.corpus)?);
    let queries = load_queries(&a.queries)?;
    let truth = read_ground_truth(&a.truth)?;
    let model = train_full_model(&corpus, &a.train)?;
    let exact = LemurIndex::from_parts(
        model.clone(),
        MipsIndex::build_exact(model.w_out.clone())?,
        corpus.clone(),
    )?;
    let graph = LemurIndex::from_parts(
        model.clone(),
        MipsIndex::build_graph(
            model.w_out.clone(),
            &BuildParams { r: a.degree, l_build: a.l_build },
        )?,
        corpus.clone(),
    )?;
    let grid = GridSpec {
        ef_search: a.ef_search.clone(),
        k_prime: a.k_prime.clone(),
        k: a.k,
        repetitions: a.repetitions,
    };
    let (exact_front, graph_front) =
        ablate_anns(&exact, &graph, &queries, &truth, &grid, a.threads)?;
    println!("exact-scan Pareto front:");
    for r in &exact_front {
        println!("  k'={:6} | recall {:.4} | qps {:10.1}", r.k_prime, r.mean_recall, r.qps);
    }
    println!("graph-search Pareto front:");
    for r in &graph_front {
        println!(
            "  ef={:6} k'={:6} | recall {:.4} | qps {:10.1}",
            r.ef_search, r.k_prime, r.mean_recall, r.qps
        );
    }
    write_csv(&exact_front, &a.out_exact)?;
    write_csv(&graph_front, &a.out_graph)?;
    let mut man = Manifest::new("ablate-anns");
    man.push_input("corpus", &a.corpus)?;
    man.push_input("queries", &a.queries)?;
    man.push_input("truth", &a.truth)?;
    a.train.record(&mut man);
    man.push("degree", a.degree);
    man.push("l_build", a.l_build);
    man.push("k", a.k);
    man.push("k_prime", join(&a.k_prime));
    man.push("ef_search", join(&a.ef_search));
    man.push("repetitions", a.repetitions);
    man.push("threads", a.threads);
    man.push("out_exact", a.out_exact.display());
    man.push("out_graph", a.out_graph.display());
    man.write(&manifest_path(&a.out_exact))?;
    println!(
        "wrote Pareto fronts to {} and {}",
        a.out_exact.display(),
        a.out_graph.display()
    );
    Ok(())
}
