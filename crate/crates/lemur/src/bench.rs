//! Evaluation harness: recall/QPS measurement over a query-parameter
//! grid, Pareto-frontier extraction, and the two standard ablations
//! (latent width sweep, graph search vs. exact scan).

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use lemur_core::corpus::{Corpus, MultiVectorDoc};
use lemur_core::linalg::Mat;
use lemur_core::maxsim::{recall, GroundTruth, ScoredDoc};
use lemur_core::mips::SearchParams;
use lemur_core::model::TrainConfig;
use lemur_core::ols::OlsConfig;
use lemur_core::Error as CoreError;

use crate::error::{io_err, Error, Result};
use crate::pipeline::{batch_query, build_index, candidates, parallel_map, query, LemurIndex, MipsMode};

/// Query-hyperparameter grid. When `ef_search` is empty, each k' cell
/// uses beams of k', 2k', and 4k'.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub ef_search: Vec<usize>,
    pub k_prime: Vec<usize>,
    pub k: usize,
    /// Timing repetitions; QPS is the best of these runs.
    pub repetitions: usize,
}

pub const DEFAULT_EF_MULTIPLIERS: [usize; 3] = [1, 2, 4];

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.repetitions == 0 || self.k_prime.is_empty() {
            return Err(CoreError::Argument(
                "grid requires k >= 1, repetitions >= 1, and at least one k_prime".into(),
            )
            .into());
        }
        if self.k_prime.iter().any(|&kp| kp < self.k) {
            return Err(CoreError::Argument(format!(
                "every k_prime must be >= k={}",
                self.k
            ))
            .into());
        }
        Ok(())
    }

    /// Concrete (ef_search, k_prime) cells. Exact-scan indexes ignore the
    /// beam width, so they get one cell per k'.
    pub fn cells(&self, graph: bool) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &kp in &self.k_prime {
            if !graph {
                out.push((kp, kp));
                continue;
            }
            if self.ef_search.is_empty() {
                for mult in DEFAULT_EF_MULTIPLIERS {
                    out.push((kp * mult, kp));
                }
            } else {
                for &ef in &self.ef_search {
                    if ef >= kp {
                        out.push((ef, kp));
                    }
                }
            }
        }
        out
    }
}

/// One measured grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub ef_search: usize,
    pub k_prime: usize,
    pub mean_recall: f64,
    pub qps: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
}

/// Per-query result ids and exact scores for one cell, in the
/// ground-truth layout so recall can be recounted independently.
#[derive(Debug, Clone)]
pub struct CellDump {
    pub ef_search: usize,
    pub k_prime: usize,
    pub results: GroundTruth,
}

fn percentile_ms(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((p * n as f64).ceil() as usize).saturating_sub(1).min(n - 1);
    sorted[idx]
}

/// Measure every grid cell: recall of the reranked top-k against the
/// exact truth, batch QPS with `threads` workers (best of
/// `repetitions`), and single-threaded per-query latency percentiles.
pub fn run_grid(
    index: &LemurIndex,
    queries: &[MultiVectorDoc],
    truth: &GroundTruth,
    grid: &GridSpec,
    threads: usize,
) -> Result<(Vec<BenchResult>, Vec<CellDump>)> {
    grid.validate()?;
    if truth.query_count() != queries.len() {
        return Err(CoreError::Argument(format!(
            "truth holds {} queries but {} were supplied",
            truth.query_count(),
            queries.len()
        ))
        .into());
    }
    if truth.k != grid.k {
        return Err(CoreError::Argument(format!(
            "truth was computed for k={} but the grid uses k={}",
            truth.k, grid.k
        ))
        .into());
    }
    let mut results = Vec::new();
    let mut dumps = Vec::new();
    for (ef, kp) in grid.cells(index.mips.is_graph()) {
        if kp > index.corpus.len() {
            continue; // cell does not fit this corpus
        }
        let params = SearchParams { ef_search: ef, k_prime: kp };

        let mut best_qps = 0.0f64;
        let mut first_lists: Vec<Vec<ScoredDoc>> = Vec::new();
        for rep in 0..grid.repetitions {
            let t = Instant::now();
            let run = batch_query(index, queries, grid.k, &params, threads)?;
            let secs = t.elapsed().as_secs_f64();
            let qps = queries.len() as f64 / secs.max(1e-12);
            if qps > best_qps {
                best_qps = qps;
            }
            if rep == 0 {
                first_lists = run.into_iter().map(|r| r.hits).collect();
            }
        }

        let mut total = 0.0;
        for (qi, hits) in first_lists.iter().enumerate() {
            let got: Vec<usize> = hits.iter().map(|h| h.doc_id).collect();
            let want: Vec<usize> = truth.lists[qi]
                .iter()
                .take(got.len())
                .map(|s| s.doc_id)
                .collect();
            total += recall(&got, &want)?;
        }
        let mean_recall = total / queries.len() as f64;

        // Separate single-threaded pass for latency percentiles.
        let mut lat_ms: Vec<f64> = queries
            .iter()
            .map(|q| {
                let t = Instant::now();
                let _ = query(index, q, grid.k, &params)?;
                Ok(t.elapsed().as_secs_f64() * 1e3)
            })
            .collect::<Result<Vec<f64>>>()?;
        lat_ms.sort_by(f64::total_cmp);

        results.push(BenchResult {
            ef_search: ef,
            k_prime: kp,
            mean_recall,
            qps: best_qps,
            p50_ms: percentile_ms(&lat_ms, 0.50),
            p99_ms: percentile_ms(&lat_ms, 0.99),
        });
        dumps.push(CellDump {
            ef_search: ef,
            k_prime: kp,
            results: GroundTruth { k: grid.k, lists: first_lists },
        });
    }
    Ok((results, dumps))
}

/// Keep the measurements no other measurement dominates: a result is
/// dropped when another has (>= recall and > qps) or (> recall and
/// >= qps). Output sorted by recall ascending.
pub fn pareto_front(results: &[BenchResult]) -> Vec<BenchResult> {
    let mut kept: Vec<BenchResult> = results
        .iter()
        .filter(|r| {
            !results.iter().any(|s| {
                (s.mean_recall >= r.mean_recall && s.qps > r.qps)
                    || (s.mean_recall > r.mean_recall && s.qps >= r.qps)
            })
        })
        .cloned()
        .collect();
    kept.sort_by(|a, b| {
        a.mean_recall
            .total_cmp(&b.mean_recall)
            .then(a.qps.total_cmp(&b.qps))
            .then(a.k_prime.cmp(&b.k_prime))
            .then(a.ef_search.cmp(&b.ef_search))
    });
    kept
}

/// One row of the latent-width ablation: candidate recall (share of the
/// true top-k found among the top-k' candidates under exact inference).
#[derive(Debug, Clone, PartialEq)]
pub struct DimRecall {
    pub d_prime: usize,
    pub k_prime: usize,
    pub recall: f64,
}

/// Train one model per latent width (shared seeds and data) and measure
/// candidate recall at each k' with exact inference (no graph index).
#[allow(clippy::too_many_arguments)]
pub fn ablate_latent_dim(
    corpus: Arc<Corpus>,
    train_tokens: &Mat<f32>,
    ols_tokens: &Mat<f32>,
    queries: &[MultiVectorDoc],
    truth: &GroundTruth,
    dims: &[usize],
    base_cfg: &TrainConfig,
    ols_cfg: &OlsConfig,
    k_primes: &[usize],
    threads: usize,
) -> Result<Vec<DimRecall>> {
    if dims.is_empty() {
        return Err(CoreError::Argument("at least one latent width is required".into()).into());
    }
    if truth.query_count() != queries.len() {
        return Err(CoreError::Argument("truth/query count mismatch".into()).into());
    }
    let mut rows = Vec::new();
    for &dp in dims {
        let cfg = TrainConfig { d_prime: dp, ..base_cfg.clone() };
        let index = build_index(
            corpus.clone(),
            train_tokens,
            ols_tokens,
            &cfg,
            ols_cfg,
            MipsMode::Exact,
        )?;
        for &kp in k_primes {
            let kp = kp.min(corpus.len());
            let params = SearchParams { ef_search: kp, k_prime: kp };
            let per_query =
                parallel_map(queries, threads, |q| candidates(&index, q, &params))?;
            let mut total = 0.0;
            for (qi, cand) in per_query.iter().enumerate() {
                let want: Vec<usize> = truth.lists[qi].iter().map(|s| s.doc_id).collect();
                let hits = cand.iter().filter(|id| want.contains(id)).count();
                total += hits as f64 / want.len() as f64;
            }
            rows.push(DimRecall { d_prime: dp, k_prime: kp, recall: total / queries.len() as f64 });
        }
    }
    Ok(rows)
}

/// Paired Pareto curves for the same model served by an exact scan and
/// by the graph index.
pub fn ablate_anns(
    index_exact: &LemurIndex,
    index_graph: &LemurIndex,
    queries: &[MultiVectorDoc],
    truth: &GroundTruth,
    grid: &GridSpec,
    threads: usize,
) -> Result<(Vec<BenchResult>, Vec<BenchResult>)> {
    if index_exact.model != index_graph.model {
        return Err(CoreError::Argument(
            "the exact and graph indexes must share one model".into(),
        )
        .into());
    }
    let (exact, _) = run_grid(index_exact, queries, truth, grid, threads)?;
    let (graph, _) = run_grid(index_graph, queries, truth, grid, threads)?;
    Ok((pareto_front(&exact), pareto_front(&graph)))
}

/// Write grid results as CSV with a header row.
pub fn write_csv(results: &[BenchResult], path: &Path) -> Result<()> {
    let mut out = String::from("ef_search,k_prime,recall,qps,p50_ms,p99_ms\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.ef_search, r.k_prime, r.mean_recall, r.qps, r.p50_ms, r.p99_ms
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Parse a results CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<BenchResult>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "ef_search,k_prime,recall,qps,p50_ms,p99_ms" {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("line {}: expected 6 fields", ln + 2),
            });
        }
        let parse_err = |what: &str| Error::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: bad {what}", ln + 2),
        };
        out.push(BenchResult {
            ef_search: fields[0].parse().map_err(|_| parse_err("ef_search"))?,
            k_prime: fields[1].parse().map_err(|_| parse_err("k_prime"))?,
            mean_recall: fields[2].parse().map_err(|_| parse_err("recall"))?,
            qps: fields[3].parse().map_err(|_| parse_err("qps"))?,
            p50_ms: fields[4].parse().map_err(|_| parse_err("p50_ms"))?,
            p99_ms: fields[5].parse().map_err(|_| parse_err("p99_ms"))?,
        });
    }
    Ok(out)
}

/// Write the latent-width ablation table as CSV.
pub fn write_dim_csv(rows: &[DimRecall], path: &Path) -> Result<()> {
    let mut out = String::from("d_prime,k_prime,recall\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.d_prime, r.k_prime, r.recall));
    }
    std::fs::write(path, out).map_err(io_err(path))
}
