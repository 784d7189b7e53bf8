//! Exact MaxSim (Chamfer) similarity: the scoring kernel, per-token
//! target evaluation used to build training sets, and the brute-force
//! top-k oracle that defines ground truth for every recall measurement.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{Corpus, MultiVectorDoc, TokenView};
use crate::error::{Error, Result};
use crate::linalg::{gemm_f32, Mat, Trans};

/// Document tokens are scanned in blocks of this many rows so the hot
/// loop stays in cache for long documents.
const DOC_BLOCK: usize = 64;

/// One ranked document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: usize,
    pub score: f32,
}

/// Exact top-k results for a batch of queries, each list sorted by score
/// descending with ties broken by ascending doc id.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub k: usize,
    pub lists: Vec<Vec<ScoredDoc>>,
}

impl GroundTruth {
    pub fn query_count(&self) -> usize {
        self.lists.len()
    }

    /// Doc ids of one query's list.
    pub fn ids(&self, q: usize) -> Vec<usize> {
        self.lists[q].iter().map(|s| s.doc_id).collect()
    }
}

/// `a` ranks before `b` under score-descending order with ascending-id
/// tie-break. This single comparator defines result order everywhere:
/// oracle, MIPS search, and reranking.
#[inline]
pub fn ranks_before(a: (f32, usize), b: (f32, usize)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.1 < b.1,
    }
}

/// Sort scored docs by score descending, ties by ascending id.
pub fn sort_ranked(items: &mut [ScoredDoc]) {
    items.sort_unstable_by(|x, y| {
        y.score.total_cmp(&x.score).then_with(|| x.doc_id.cmp(&y.doc_id))
    });
}

// Min-heap entry: the heap top is the currently worst-ranked element.
#[derive(PartialEq)]
struct WorstFirst(f32, usize);

impl Eq for WorstFirst {}

impl Ord for WorstFirst {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert "ranks before" so the worst
        // element surfaces at the top.
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| self.1.cmp(&other.1))
    }
}

impl PartialOrd for WorstFirst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded top-k selector sharing the global tie-break.
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<WorstFirst>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        TopK { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.heap.len()
    }

    /// Currently worst-ranked entry, if any.
    #[inline]
    pub fn worst(&self) -> Option<(f32, usize)> {
        self.heap.peek().map(|w| (w.0, w.1))
    }

    #[inline]
    pub fn push(&mut self, score: f32, id: usize) {
        if self.heap.len() < self.k {
            self.heap.push(WorstFirst(score, id));
        } else if let Some(worst) = self.heap.peek() {
            if ranks_before((score, id), (worst.0, worst.1)) {
                self.heap.pop();
                self.heap.push(WorstFirst(score, id));
            }
        }
    }

    pub fn into_sorted(self) -> Vec<ScoredDoc> {
        let mut out: Vec<ScoredDoc> = self
            .heap
            .into_iter()
            .map(|WorstFirst(score, doc_id)| ScoredDoc { doc_id, score })
            .collect();
        sort_ranked(&mut out);
        out
    }
}

#[inline]
fn max_ip_block<T: Float>(x: &[T], doc: &[T], dim: usize) -> T {
    let mut best = T::NEG_INF;
    for block in doc.chunks(DOC_BLOCK * dim) {
        for c in block.chunks_exact(dim) {
            let mut acc = T::ZERO;
            for (a, b) in x.iter().zip(c) {
                acc = acc + *a * *b;
            }
            if acc > best {
                best = acc;
            }
        }
    }
    best
}

/// Minimal float abstraction so the kernel can run in f32 (serving) and
/// f64 (high-precision checks).
pub trait Float:
    Copy + PartialOrd + core::ops::Add<Output = Self> + core::ops::Mul<Output = Self>
{
    const ZERO: Self;
    const NEG_INF: Self;
}

impl Float for f32 {
    const ZERO: f32 = 0.0;
    const NEG_INF: f32 = f32::NEG_INFINITY;
}

impl Float for f64 {
    const ZERO: f64 = 0.0;
    const NEG_INF: f64 = f64::NEG_INFINITY;
}

/// MaxSim over raw token slices: sum over query tokens of the maximum
/// inner product against the document's tokens. Query tokens are summed
/// in index order; document token order does not affect the result.
pub fn maxsim_flat<T: Float>(query: &[T], doc: &[T], dim: usize) -> T {
    debug_assert!(dim > 0 && query.len() % dim == 0 && doc.len() % dim == 0);
    let mut total = T::ZERO;
    for x in query.chunks_exact(dim) {
        total = total + max_ip_block(x, doc, dim);
    }
    total
}

/// MaxSim similarity between a query and a document.
pub fn maxsim(query: TokenView<'_>, doc: TokenView<'_>) -> Result<f32> {
    if query.dim != doc.dim {
        return Err(Error::DimMismatch { expected: query.dim, got: doc.dim });
    }
    Ok(maxsim_flat(query.data, doc.data, query.dim))
}

/// Per-token targets: for each listed document, the maximum inner
/// product between `x` and that document's tokens. Summing these values
/// over a query's tokens reproduces MaxSim exactly.
pub fn per_token_targets(x: &[f32], corpus: &Corpus, doc_ids: &[usize]) -> Result<Vec<f32>> {
    if x.len() != corpus.dim() {
        return Err(Error::DimMismatch { expected: corpus.dim(), got: x.len() });
    }
    let m = corpus.len();
    let mut out = Vec::with_capacity(doc_ids.len());
    for &j in doc_ids {
        if j >= m {
            return Err(Error::Argument(format!("doc id {j} out of range (m={m})")));
        }
        out.push(max_ip_block(x, corpus.doc(j).data, corpus.dim()));
    }
    Ok(out)
}

/// Batched per-token targets: an (n x |doc_ids|) matrix whose (i, j)
/// entry is the maximum inner product of token row i against document
/// `doc_ids[j]`. GEMM against tiles of concatenated document tokens, then
/// a segmented row max. Scratch is bounded regardless of corpus size.
pub fn per_token_targets_batch(
    tokens: &Mat<f32>,
    corpus: &Corpus,
    doc_ids: &[usize],
) -> Result<Mat<f32>> {
    let d = corpus.dim();
    if tokens.cols() != d {
        return Err(Error::DimMismatch { expected: d, got: tokens.cols() });
    }
    let m = corpus.len();
    if let Some(&bad) = doc_ids.iter().find(|&&j| j >= m) {
        return Err(Error::Argument(format!("doc id {bad} out of range (m={m})")));
    }
    let n = tokens.rows();
    let mut out = Mat::zeros(n, doc_ids.len());

    const ROW_TILE: usize = 512;
    const COL_BUDGET: usize = 8192; // concatenated doc tokens per tile

    // Partition doc_ids into tiles whose concatenated token counts stay
    // within the scratch budget.
    let mut col = 0usize;
    while col < doc_ids.len() {
        let mut cols_here = 0usize;
        let mut end = col;
        while end < doc_ids.len() {
            let t = corpus.doc(doc_ids[end]).token_count();
            if cols_here + t > COL_BUDGET && cols_here > 0 {
                break;
            }
            cols_here += t;
            end += 1;
        }
        // Gather this tile's document tokens and segment boundaries.
        let mut seg = Vec::with_capacity(end - col + 1);
        seg.push(0usize);
        let mut tile = Mat::zeros(cols_here, d);
        let mut at = 0usize;
        for &j in &doc_ids[col..end] {
            let dv = corpus.doc(j);
            tile.as_mut_slice()[at * d..(at + dv.token_count()) * d].copy_from_slice(dv.data);
            at += dv.token_count();
            seg.push(at);
        }

        let mut scores = Mat::zeros(ROW_TILE.min(n), cols_here);
        let mut row = 0usize;
        while row < n {
            let rows_here = ROW_TILE.min(n - row);
            let block = Mat::from_vec(
                rows_here,
                d,
                tokens.as_slice()[row * d..(row + rows_here) * d].to_vec(),
            );
            if scores.rows() != rows_here {
                scores = Mat::zeros(rows_here, cols_here);
            }
            gemm_f32(1.0, &block, Trans::No, &tile, Trans::Yes, 0.0, &mut scores);
            for r in 0..rows_here {
                let srow = scores.row(r);
                let orow = out.row_mut(row + r);
                for (dj, w) in seg.windows(2).enumerate() {
                    let mut best = f32::NEG_INFINITY;
                    for &s in &srow[w[0]..w[1]] {
                        if s > best {
                            best = s;
                        }
                    }
                    orow[col + dj] = best;
                }
            }
            row += rows_here;
        }
        col = end;
    }
    Ok(out)
}

/// Exact top-k by MaxSim for one query.
pub fn brute_force_topk_single(
    query: TokenView<'_>,
    corpus: &Corpus,
    k: usize,
) -> Result<Vec<ScoredDoc>> {
    if query.dim != corpus.dim() {
        return Err(Error::DimMismatch { expected: corpus.dim(), got: query.dim });
    }
    let mut top = TopK::new(k.min(corpus.len()));
    for j in 0..corpus.len() {
        let s = maxsim_flat(query.data, corpus.doc(j).data, corpus.dim());
        top.push(s, j);
    }
    Ok(top.into_sorted())
}

/// Exact top-k by MaxSim for a batch of queries. Single-threaded; the
/// companion crate parallelizes over queries.
pub fn brute_force_topk(
    queries: &[MultiVectorDoc],
    corpus: &Corpus,
    k: usize,
) -> Result<GroundTruth> {
    if k == 0 {
        return Err(Error::Argument("k must be >= 1".into()));
    }
    let lists = queries
        .iter()
        .map(|q| brute_force_topk_single(q.view(), corpus, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruth { k, lists })
}

/// Fraction of `truth` recovered by `approx`; both are id sets of equal
/// size k.
pub fn recall(approx: &[usize], truth: &[usize]) -> Result<f64> {
    if approx.len() != truth.len() {
        return Err(Error::Argument(format!(
            "recall requires equal-size sets, got {} vs {}",
            approx.len(),
            truth.len()
        )));
    }
    if approx.is_empty() {
        return Err(Error::Argument("recall of empty sets is undefined".into()));
    }
    let mut a: Vec<usize> = approx.to_vec();
    let mut t: Vec<usize> = truth.to_vec();
    a.sort_unstable();
    t.sort_unstable();
    let (mut i, mut j, mut hits) = (0usize, 0usize, 0usize);
    while i < a.len() && j < t.len() {
        match a[i].cmp(&t[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                hits += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(hits as f64 / truth.len() as f64)
}
