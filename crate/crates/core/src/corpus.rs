//! Multi-vector data model: documents and queries as variable-size sets
//! of fixed-dimension token embeddings, plus the sampling utilities used
//! to assemble training sets.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::Rng;

/// Borrowed view of one document's (or query's) token embeddings,
/// row-major with `dim` columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenView<'a> {
    pub dim: usize,
    pub data: &'a [f32],
}

impl<'a> TokenView<'a> {
    #[inline]
    pub fn token_count(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn token(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn tokens(&self) -> impl Iterator<Item = &'a [f32]> {
        self.data.chunks_exact(self.dim)
    }
}

/// One document or query: t >= 1 token embeddings of dimension d,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVectorDoc {
    dim: usize,
    data: Vec<f32>,
}

impl MultiVectorDoc {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Argument(format!(
                "token data length {} is not a positive multiple of dim {}",
                data.len(),
                dim
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(MultiVectorDoc { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn token_count(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn view(&self) -> TokenView<'_> {
        TokenView { dim: self.dim, data: &self.data }
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// An ordered collection of documents sharing one embedding dimension.
/// Token embeddings are stored contiguously; document `j` owns token rows
/// `offsets[j]..offsets[j+1]`. Document indices are stable and are the
/// identity used in every search result.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dim: usize,
    offsets: Vec<usize>,
    tokens: Vec<f32>,
}

impl Corpus {
    pub fn from_docs(docs: &[MultiVectorDoc]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let dim = docs[0].dim();
        let mut offsets = Vec::with_capacity(docs.len() + 1);
        offsets.push(0usize);
        let total: usize = docs.iter().map(|d| d.token_count()).sum();
        let mut tokens = Vec::with_capacity(total * dim);
        for d in docs {
            if d.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, got: d.dim() });
            }
            tokens.extend_from_slice(d.data());
            offsets.push(tokens.len() / dim);
        }
        Ok(Corpus { dim, offsets, tokens })
    }

    /// Assemble from raw parts, validating every invariant. `offsets` are
    /// cumulative token counts of length m+1.
    pub fn from_parts(dim: usize, offsets: Vec<usize>, tokens: Vec<f32>) -> Result<Self> {
        if dim == 0 || offsets.len() < 2 {
            return Err(Error::EmptyCorpus);
        }
        if offsets[0] != 0 {
            return Err(Error::Argument("offsets must start at 0".into()));
        }
        for w in offsets.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Argument(
                    "offsets must be strictly increasing (every document needs >= 1 token)".into(),
                ));
            }
        }
        let total = *offsets.last().unwrap();
        if tokens.len() != total * dim {
            return Err(Error::Argument(format!(
                "token payload holds {} values but offsets require {}",
                tokens.len(),
                total * dim
            )));
        }
        if tokens.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Corpus { dim, offsets, tokens })
    }

    /// Number of documents m.
    #[inline]
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // m >= 1 by construction
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn total_tokens(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    #[inline]
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub fn token_data(&self) -> &[f32] {
        &self.tokens
    }

    /// Token embeddings of document `j`.
    #[inline]
    pub fn doc(&self, j: usize) -> TokenView<'_> {
        let (lo, hi) = (self.offsets[j], self.offsets[j + 1]);
        TokenView { dim: self.dim, data: &self.tokens[lo * self.dim..hi * self.dim] }
    }

    pub fn docs(&self) -> impl Iterator<Item = TokenView<'_>> {
        (0..self.len()).map(move |j| self.doc(j))
    }

    /// One flat token row by global token index.
    #[inline]
    pub fn token(&self, t: usize) -> &[f32] {
        &self.tokens[t * self.dim..(t + 1) * self.dim]
    }
}

/// Draw `n` token embeddings uniformly from the pooled union of all
/// tokens in `source`: without replacement while the pool suffices, with
/// replacement once `n` exceeds it. Deterministic given `seed`.
pub fn sample_training_tokens(source: &Corpus, n: usize, seed: u64) -> Result<Mat<f32>> {
    if n == 0 {
        return Err(Error::Argument("token sample size must be positive".into()));
    }
    let total = source.total_tokens();
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = Rng::seed_from_u64(seed);
    let picks: Vec<usize> = if n <= total {
        rng.sample_distinct(total, n)
    } else {
        (0..n).map(|_| rng.below(total as u64) as usize).collect()
    };
    let d = source.dim();
    let mut out = Mat::zeros(n, d);
    for (row, &t) in picks.iter().enumerate() {
        out.row_mut(row).copy_from_slice(source.token(t));
    }
    Ok(out)
}

/// Draw `m_prime` distinct document indices uniformly without
/// replacement, in ascending order. Deterministic given `seed`.
pub fn sample_target_docs(corpus: &Corpus, m_prime: usize, seed: u64) -> Result<Vec<usize>> {
    let m = corpus.len();
    if m_prime == 0 || m_prime > m {
        return Err(Error::Argument(format!(
            "target document sample m_prime={m_prime} must be in 1..={m}"
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    Ok(rng.sample_distinct(m, m_prime))
}
