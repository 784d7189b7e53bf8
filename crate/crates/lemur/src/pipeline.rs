//! End-to-end retrieval: encode query tokens, pool, retrieve k'
//! candidates by MIPS, rerank with exact MaxSim, return the top k.
//! Also owns index lifecycle (two-phase training then MIPS build) and
//! query-parallel execution.

use std::sync::Arc;
use std::time::Instant;

use lemur_core::corpus::{Corpus, MultiVectorDoc};
use lemur_core::maxsim::{brute_force_topk_single, maxsim, sort_ranked, GroundTruth, ScoredDoc};
use lemur_core::mips::{BuildParams, MipsIndex, SearchParams};
use lemur_core::model::{build_training_set, LemurModel, TrainConfig};
use lemur_core::ols::{fit_full_head, OlsConfig};
use lemur_core::train::train;
use lemur_core::linalg::Mat;
use lemur_core::Error as CoreError;

use crate::error::Result;

/// Which MIPS structure the index builds over the learned vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipsMode {
    Exact,
    Graph(BuildParams),
}

/// A fully built retrieval index: model, MIPS structure over its output
/// rows, and a handle to the corpus for reranking.
#[derive(Debug)]
pub struct LemurIndex {
    pub model: LemurModel,
    pub mips: MipsIndex,
    pub corpus: Arc<Corpus>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryTiming {
    pub encode_ns: u64,
    pub anns_ns: u64,
    pub rerank_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// Top-k documents by exact MaxSim, score descending, ties by
    /// ascending id.
    pub hits: Vec<ScoredDoc>,
    /// Candidates retrieved by MIPS before reranking.
    pub candidates_examined: usize,
    pub timing: QueryTiming,
}

impl LemurIndex {
    pub fn from_parts(model: LemurModel, mips: MipsIndex, corpus: Arc<Corpus>) -> Result<Self> {
        if mips.len() != corpus.len() || model.m_out() != corpus.len() {
            return Err(CoreError::Argument(format!(
                "index pieces disagree: corpus m={}, model rows={}, mips rows={}",
                corpus.len(),
                model.m_out(),
                mips.len()
            ))
            .into());
        }
        if mips.dim() != model.d_prime() {
            return Err(CoreError::DimMismatch {
                expected: model.d_prime(),
                got: mips.dim(),
            }
            .into());
        }
        Ok(LemurIndex { model, mips, corpus })
    }
}

/// Build an index end to end: phase-1 gradient training on sampled
/// target documents, closed-form head fit over the whole corpus, then
/// the MIPS structure over the learned rows. Deterministic given the
/// config seeds.
pub fn build_index(
    corpus: Arc<Corpus>,
    train_tokens: &Mat<f32>,
    ols_tokens: &Mat<f32>,
    train_cfg: &TrainConfig,
    ols_cfg: &OlsConfig,
    mode: MipsMode,
) -> Result<LemurIndex> {
    let training = build_training_set(&corpus, train_tokens, train_cfg)?;
    let (phase1, _) = train(&training, train_cfg)?;
    let model = fit_full_head(&phase1, &corpus, ols_tokens, ols_cfg)?;
    let mips = match mode {
        MipsMode::Exact => MipsIndex::build_exact(model.w_out.clone())?,
        MipsMode::Graph(params) => MipsIndex::build_graph(model.w_out.clone(), &params)?,
    };
    LemurIndex::from_parts(model, mips, corpus)
}

/// Answer one query: pool, retrieve k' candidates, rerank by exact
/// MaxSim. Requires k <= k' <= m.
pub fn query(
    index: &LemurIndex,
    x: &MultiVectorDoc,
    k: usize,
    params: &SearchParams,
) -> Result<QueryResult> {
    let m = index.corpus.len();
    if k == 0 || k > params.k_prime {
        return Err(CoreError::Argument(format!(
            "k={k} must satisfy 1 <= k <= k_prime={}",
            params.k_prime
        ))
        .into());
    }
    if params.k_prime > m {
        return Err(CoreError::Argument(format!(
            "k_prime={} exceeds corpus size m={m}",
            params.k_prime
        ))
        .into());
    }

    let t0 = Instant::now();
    let pooled = index.model.pool_query(x.view())?;
    let t1 = Instant::now();
    let outcome = index.mips.search(&pooled, params)?;
    let t2 = Instant::now();

    let mut reranked = Vec::with_capacity(outcome.hits.len());
    for hit in &outcome.hits {
        let score = maxsim(x.view(), index.corpus.doc(hit.doc_id))?;
        reranked.push(ScoredDoc { doc_id: hit.doc_id, score });
    }
    sort_ranked(&mut reranked);
    reranked.truncate(k);
    let t3 = Instant::now();

    Ok(QueryResult {
        hits: reranked,
        candidates_examined: outcome.hits.len(),
        timing: QueryTiming {
            encode_ns: (t1 - t0).as_nanos() as u64,
            anns_ns: (t2 - t1).as_nanos() as u64,
            rerank_ns: (t3 - t2).as_nanos() as u64,
        },
    })
}

/// MIPS candidate ids for one query, without reranking. Used by the
/// candidate-recall ablations.
pub fn candidates(
    index: &LemurIndex,
    x: &MultiVectorDoc,
    params: &SearchParams,
) -> Result<Vec<usize>> {
    let pooled = index.model.pool_query(x.view())?;
    let outcome = index.mips.search(&pooled, params)?;
    Ok(outcome.hits.iter().map(|h| h.doc_id).collect())
}

/// Split `items` into `threads` contiguous chunks, map in parallel, and
/// return the results in input order. Each item's result is independent
/// of the thread count.
pub fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    if threads == 0 {
        return Err(CoreError::Argument("threads must be >= 1".into()).into());
    }
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let workers = threads.min(items.len());
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let chunk_results: Vec<Result<Vec<R>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|slice| scope.spawn(|| slice.iter().map(&f).collect::<Result<Vec<R>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for r in chunk_results {
        out.extend(r?);
    }
    Ok(out)
}

/// Batch variant of [`query`]: identical results to sequential calls, in
/// input order, for any thread count.
pub fn batch_query(
    index: &LemurIndex,
    queries: &[MultiVectorDoc],
    k: usize,
    params: &SearchParams,
    threads: usize,
) -> Result<Vec<QueryResult>> {
    parallel_map(queries, threads, |q| query(index, q, k, params))
}

/// Exact MaxSim ground truth, parallelized over queries.
pub fn exact_ground_truth(
    corpus: &Corpus,
    queries: &[MultiVectorDoc],
    k: usize,
    threads: usize,
) -> Result<GroundTruth> {
    if k == 0 {
        return Err(CoreError::Argument("k must be >= 1".into()).into());
    }
    let lists = parallel_map(queries, threads, |q| {
        Ok(brute_force_topk_single(q.view(), corpus, k)?)
    })?;
    Ok(GroundTruth { k, lists })
}

/// Load every document of a corpus-format file as an owned query list.
pub fn corpus_as_queries(corpus: &Corpus) -> Vec<MultiVectorDoc> {
    (0..corpus.len())
        .map(|j| {
            MultiVectorDoc::new(corpus.dim(), corpus.doc(j).data.to_vec())
                .expect("corpus documents are valid")
        })
        .collect()
}
