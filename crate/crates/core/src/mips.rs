//! Maximum-inner-product search over the learned document vectors:
//! an exact scan for small corpora and a deterministic single-layer
//! navigable graph with best-first beam search for large ones.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{dot_f32, Mat};
use crate::maxsim::{ranks_before, ScoredDoc, TopK};

/// Graph construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildParams {
    /// Maximum out-degree R.
    pub r: usize,
    /// Insertion-time beam width L.
    pub l_build: usize,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams { r: 64, l_build: 800 }
    }
}

/// Query-time parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    /// Beam width; must be at least `k_prime`.
    pub ef_search: usize,
    /// Number of candidates to return.
    pub k_prime: usize,
}

/// Search output. `clamped` flags that `k_prime` exceeded the corpus and
/// was reduced to m.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub hits: Vec<ScoredDoc>,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Graph {
    adjacency: Vec<Vec<u32>>,
    entry: usize,
    r: usize,
}

/// Searchable index over m latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MipsIndex {
    vectors: Mat<f32>,
    graph: Option<Graph>,
}

// Frontier entry: max-heap by score, ties prefer the smaller id.
#[derive(PartialEq)]
struct BestFirst(f32, usize);

impl Eq for BestFirst {}

impl Ord for BestFirst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for BestFirst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first beam search over `adjacency` starting at `entry`,
/// returning the `ef` best-scoring visited nodes sorted by score
/// descending (id ascending on ties). `stamps`/`epoch` implement an
/// O(1)-reset visited set shared across calls.
fn beam_search(
    vectors: &Mat<f32>,
    adjacency: &[Vec<u32>],
    entry: usize,
    q: &[f32],
    ef: usize,
    stamps: &mut [u32],
    epoch: u32,
) -> Vec<ScoredDoc> {
    let mut results = TopK::new(ef);
    let mut frontier = BinaryHeap::new();

    let s = dot_f32(vectors.row(entry), q);
    stamps[entry] = epoch;
    results.push(s, entry);
    frontier.push(BestFirst(s, entry));

    while let Some(BestFirst(score, id)) = frontier.pop() {
        if results.len() == ef {
            if let Some(worst) = results.worst() {
                if !ranks_before((score, id), worst) {
                    break;
                }
            }
        }
        for &nb in &adjacency[id] {
            let nb = nb as usize;
            if stamps[nb] == epoch {
                continue;
            }
            stamps[nb] = epoch;
            let s = dot_f32(vectors.row(nb), q);
            let admit = results.len() < ef
                || results.worst().map(|w| ranks_before((s, nb), w)).unwrap_or(true);
            if admit {
                results.push(s, nb);
                frontier.push(BestFirst(s, nb));
            }
        }
    }
    results.into_sorted()
}

fn squared_norm(v: &[f32]) -> f32 {
    dot_f32(v, v)
}

impl MipsIndex {
    /// Exact-scan index: no graph, queries score every vector.
    pub fn build_exact(vectors: Mat<f32>) -> Result<Self> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(Error::Argument("index requires at least one non-empty vector".into()));
        }
        Ok(MipsIndex { vectors, graph: None })
    }

    /// Navigable-graph index built by incremental insertion: each node
    /// links to up to R inner-product-nearest already-inserted nodes
    /// found by a width-`l_build` beam search, with reciprocal edges and
    /// lowest-inner-product pruning on overflow. Deterministic for the
    /// fixed insertion order 0..m-1. The entry point tracks the
    /// max-norm vector, which keeps greedy inner-product descent out of
    /// low-norm starts.
    pub fn build_graph(vectors: Mat<f32>, params: &BuildParams) -> Result<Self> {
        let m = vectors.rows();
        if m < 2 {
            return Err(Error::Argument("graph index requires at least two vectors".into()));
        }
        if params.r < 2 {
            return Err(Error::Argument(format!("graph degree R={} must be >= 2", params.r)));
        }
        if params.l_build == 0 {
            return Err(Error::Argument("l_build must be positive".into()));
        }
        let r = params.r;
        let ef = params.l_build.max(r);
        let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); m];
        let mut stamps = vec![0u32; m];
        let mut entry = 0usize;
        let mut entry_norm = squared_norm(vectors.row(0));

        for i in 1..m {
            let found = beam_search(
                &vectors,
                &adjacency,
                entry,
                vectors.row(i),
                ef,
                &mut stamps,
                i as u32,
            );
            let take = r.min(found.len());
            adjacency[i] = found[..take].iter().map(|s| s.doc_id as u32).collect();
            for t in 0..take {
                let j = found[t].doc_id;
                adjacency[j].push(i as u32);
                if adjacency[j].len() > r {
                    prune_lowest_ip(&vectors, j, &mut adjacency[j]);
                }
            }
            let norm = squared_norm(vectors.row(i));
            if norm > entry_norm {
                entry_norm = norm;
                entry = i;
            }
        }

        let mut index = MipsIndex { vectors, graph: Some(Graph { adjacency, entry, r }) };
        index.repair_connectivity()?;
        Ok(index)
    }

    /// Reattach nodes unreachable from the entry point. Raw-inner-product
    /// pruning can orphan low-norm nodes, so each repair edge is pinned
    /// against later eviction; evictions then only remove unpinned
    /// edges, which bounds the loop (every round either consumes an
    /// unpinned edge or grows the reachable set).
    fn repair_connectivity(&mut self) -> Result<()> {
        let m = self.vectors.rows();
        let graph = self.graph.as_ref().expect("repair on graph index");
        let r = graph.r;
        let mut pinned: Vec<Vec<u32>> = vec![Vec::new(); m];
        let max_rounds = m * r + m + 1;
        for _ in 0..max_rounds {
            let graph = self.graph.as_ref().expect("repair on graph index");
            let reach = reachable_from(&graph.adjacency, graph.entry);
            let Some(u) = (0..m).find(|&i| !reach[i]) else {
                return Ok(());
            };
            let qu = self.vectors.row(u).to_vec();
            // Best reachable host by inner product that still has an
            // unpinned edge to give up (or spare capacity).
            let mut best: Option<(f32, usize)> = None;
            for v in 0..m {
                if !reach[v] {
                    continue;
                }
                let adj_len = graph.adjacency[v].len();
                if adj_len >= r && pinned[v].len() >= adj_len {
                    continue; // fully pinned, cannot host another edge
                }
                let s = dot_f32(self.vectors.row(v), &qu);
                if best.map(|b| ranks_before((s, v), b)).unwrap_or(true) {
                    best = Some((s, v));
                }
            }
            let Some((_, v)) = best else {
                return Err(Error::Argument(
                    "graph connectivity repair exhausted all pinned hosts".into(),
                ));
            };
            let graph = self.graph.as_mut().expect("repair on graph index");
            graph.adjacency[v].push(u as u32);
            pinned[v].push(u as u32);
            if graph.adjacency[v].len() > r {
                let vrow = self.vectors.row(v);
                let list = &mut graph.adjacency[v];
                let mut worst: Option<(f32, usize, usize)> = None;
                for (pos, &e) in list.iter().enumerate() {
                    if pinned[v].contains(&e) {
                        continue;
                    }
                    let s = dot_f32(self.vectors.row(e as usize), vrow);
                    if worst
                        .map(|(ws, wid, _)| !ranks_before((s, e as usize), (ws, wid)))
                        .unwrap_or(true)
                    {
                        worst = Some((s, e as usize, pos));
                    }
                }
                let (_, _, pos) = worst.expect("host had an unpinned edge");
                list.swap_remove(pos);
            }
        }
        Err(Error::Argument("graph connectivity repair did not converge".into()))
    }

    /// Rebuild from serialized parts, revalidating every invariant.
    pub fn from_parts(
        vectors: Mat<f32>,
        graph: Option<(Vec<Vec<u32>>, usize, usize)>,
    ) -> Result<Self> {
        let m = vectors.rows();
        if m == 0 || vectors.cols() == 0 {
            return Err(Error::Argument("index requires at least one non-empty vector".into()));
        }
        match graph {
            None => Ok(MipsIndex { vectors, graph: None }),
            Some((adjacency, entry, r)) => {
                if adjacency.len() != m {
                    return Err(Error::Argument("adjacency size differs from vector count".into()));
                }
                if entry >= m {
                    return Err(Error::Argument("entry point out of range".into()));
                }
                for (i, list) in adjacency.iter().enumerate() {
                    if list.len() > r {
                        return Err(Error::Argument(format!(
                            "node {i} exceeds the degree bound {r}"
                        )));
                    }
                    if list.iter().any(|&e| e as usize >= m) {
                        return Err(Error::Argument(format!("node {i} has an out-of-range edge")));
                    }
                }
                let reach = reachable_from(&adjacency, entry);
                if reach.iter().any(|&r| !r) {
                    return Err(Error::Argument(
                        "graph is not connected from its entry point".into(),
                    ));
                }
                Ok(MipsIndex { vectors, graph: Some(Graph { adjacency, entry, r }) })
            }
        }
    }

    /// Number of indexed vectors m.
    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // m >= 1 by construction
    }

    /// Latent dimension.
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn is_graph(&self) -> bool {
        self.graph.is_some()
    }

    pub fn vectors(&self) -> &Mat<f32> {
        &self.vectors
    }

    /// (adjacency, entry, R) of the graph index, if any.
    pub fn graph_parts(&self) -> Option<(&[Vec<u32>], usize, usize)> {
        self.graph.as_ref().map(|g| (g.adjacency.as_slice(), g.entry, g.r))
    }

    pub fn max_degree(&self) -> usize {
        self.graph
            .as_ref()
            .map(|g| g.adjacency.iter().map(Vec::len).max().unwrap_or(0))
            .unwrap_or(0)
    }

    /// True when every node is reachable from the entry point (always
    /// true for exact indexes).
    pub fn is_connected(&self) -> bool {
        match &self.graph {
            None => true,
            Some(g) => reachable_from(&g.adjacency, g.entry).iter().all(|&r| r),
        }
    }

    /// Top-`k_prime` vectors by inner product with `q`, score descending,
    /// ties by ascending id. The exact path scores every vector; the
    /// graph path runs a best-first beam of width `ef_search`.
    pub fn search(&self, q: &[f32], params: &SearchParams) -> Result<SearchOutcome> {
        if q.len() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), got: q.len() });
        }
        if params.k_prime == 0 || params.ef_search < params.k_prime {
            return Err(Error::Argument(format!(
                "search params require ef_search >= k_prime >= 1, got ef={} k'={}",
                params.ef_search, params.k_prime
            )));
        }
        let m = self.len();
        let clamped = params.k_prime > m;
        let k = params.k_prime.min(m);
        let hits = match &self.graph {
            None => {
                let mut top = TopK::new(k);
                for j in 0..m {
                    top.push(dot_f32(self.vectors.row(j), q), j);
                }
                top.into_sorted()
            }
            Some(g) => {
                let ef = params.ef_search.min(m).max(k);
                let mut stamps = vec![0u32; m];
                let mut hits =
                    beam_search(&self.vectors, &g.adjacency, g.entry, q, ef, &mut stamps, 1);
                hits.truncate(k);
                hits
            }
        };
        Ok(SearchOutcome { hits, clamped })
    }
}

/// Drop the lowest-inner-product edge (w.r.t. node `j`'s vector) from an
/// overflowing adjacency list; ties evict the higher id.
fn prune_lowest_ip(vectors: &Mat<f32>, j: usize, list: &mut Vec<u32>) {
    let vj = vectors.row(j);
    let mut worst_pos = 0usize;
    let mut worst: Option<(f32, usize)> = None;
    for (pos, &e) in list.iter().enumerate() {
        let s = dot_f32(vectors.row(e as usize), vj);
        if worst.map(|w| !ranks_before((s, e as usize), w)).unwrap_or(true) {
            worst = Some((s, e as usize));
            worst_pos = pos;
        }
    }
    list.swap_remove(worst_pos);
}

fn reachable_from(adjacency: &[Vec<u32>], entry: usize) -> Vec<bool> {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![entry];
    seen[entry] = true;
    while let Some(v) = stack.pop() {
        for &e in &adjacency[v] {
            let e = e as usize;
            if !seen[e] {
                seen[e] = true;
                stack.push(e);
            }
        }
    }
    seen
}
