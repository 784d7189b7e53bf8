//! The two-layer estimator: a feature encoder (affine -> GELU -> layer
//! norm) and a linear output head whose rows double as learned document
//! vectors. This module holds the inference path plus training-set
//! construction; the gradient loop lives in [`crate::train`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{sample_target_docs, Corpus, TokenView};
use crate::error::{Error, Result};
use crate::linalg::{dot_f32, gemm_f32, Mat, Trans};
use crate::maxsim::per_token_targets_batch;
use crate::rng::{derive_seed, streams};

/// Layer-norm epsilon; fixed, no learned gain or bias (the output layer
/// immediately after absorbs any affine rescaling).
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Parameters of the feature encoder's affine stage.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// (d_prime x d) input weights.
    pub w_in: Mat<f32>,
    /// (d_prime) bias.
    pub b: Vec<f32>,
}

/// Trained model: feature encoder plus output rows, with the target
/// standardization recorded for diagnostics (ranking does not need it).
#[derive(Debug, Clone, PartialEq)]
pub struct LemurModel {
    pub encoder: EncoderParams,
    /// (m_out x d_prime) output weights; row j is the learned vector of
    /// target document j.
    pub w_out: Mat<f32>,
    pub target_mean: f64,
    pub target_std: f64,
}

/// Training hyperparameters. Defaults follow the reference recipe used
/// for all experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hidden (latent) width d_prime.
    pub d_prime: usize,
    /// Documents sampled as training targets (m_prime).
    pub m_prime: usize,
    /// Token embeddings sampled as the training set (n).
    pub n: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global-norm gradient clip.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d_prime: 2048,
            m_prime: 8192,
            n: 100_000,
            lr: 0.003,
            epochs: 100,
            batch_size: 512,
            grad_clip: 0.5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_prime == 0
            || self.m_prime == 0
            || self.n == 0
            || self.epochs == 0
            || self.batch_size == 0
            || !(self.lr > 0.0)
            || !(self.grad_clip > 0.0)
        {
            return Err(Error::Argument(
                "all training hyperparameters must be positive".into(),
            ));
        }
        if self.batch_size > self.n {
            return Err(Error::Argument(format!(
                "batch_size {} exceeds training set size {}",
                self.batch_size, self.n
            )));
        }
        Ok(())
    }
}

/// Sampled token embeddings paired with globally standardized per-token
/// targets against the sampled target documents.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    /// (n x d) token embeddings.
    pub inputs: Mat<f32>,
    /// (n x m_prime) standardized targets.
    pub targets: Mat<f32>,
    pub target_mean: f64,
    pub target_std: f64,
    /// The sampled document indices I' the target columns correspond to.
    pub target_doc_ids: Vec<usize>,
}

/// Exact GELU (Gaussian CDF form).
#[inline]
pub fn gelu_f64(z: f64) -> f64 {
    0.5 * z * (1.0 + libm::erf(z * core::f64::consts::FRAC_1_SQRT_2))
}

#[inline]
pub fn gelu_f32(z: f32) -> f32 {
    0.5 * z * (1.0 + libm::erff(z * core::f32::consts::FRAC_1_SQRT_2))
}

/// Derivative of exact GELU.
#[inline]
pub fn gelu_grad_f64(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    let cdf = 0.5 * (1.0 + libm::erf(z * core::f64::consts::FRAC_1_SQRT_2));
    cdf + z * INV_SQRT_2PI * libm::exp(-0.5 * z * z)
}

/// Normalize one activation row in place: zero mean, unit variance over
/// the row's components. Statistics are accumulated in f64.
pub fn layer_norm_f32(row: &mut [f32]) {
    let n = row.len() as f64;
    let mut sum = 0.0f64;
    for &v in row.iter() {
        sum += v as f64;
    }
    let mean = sum / n;
    let mut var = 0.0f64;
    for &v in row.iter() {
        let c = v as f64 - mean;
        var += c * c;
    }
    var /= n;
    let rstd = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
    for v in row.iter_mut() {
        *v = ((*v as f64 - mean) * rstd) as f32;
    }
}

impl LemurModel {
    /// Input dimension d.
    #[inline]
    pub fn d(&self) -> usize {
        self.encoder.w_in.cols()
    }

    /// Latent dimension d_prime.
    #[inline]
    pub fn d_prime(&self) -> usize {
        self.encoder.w_in.rows()
    }

    /// Output row count (m_prime after phase 1, m after the full fit).
    #[inline]
    pub fn m_out(&self) -> usize {
        self.w_out.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_std > 0.0) {
            return Err(Error::Argument("target_std must be positive".into()));
        }
        if self.encoder.b.len() != self.d_prime() || self.w_out.cols() != self.d_prime() {
            return Err(Error::Argument("model parameter shapes disagree".into()));
        }
        Ok(())
    }

    /// Encode a batch of tokens: rows of `tokens` map to rows of the
    /// returned (n x d_prime) latent matrix.
    pub fn encode_batch(&self, tokens: &Mat<f32>) -> Result<Mat<f32>> {
        if tokens.cols() != self.d() {
            return Err(Error::DimMismatch { expected: self.d(), got: tokens.cols() });
        }
        if tokens.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = tokens.rows();
        let dp = self.d_prime();
        let mut z = Mat::zeros(n, dp);
        gemm_f32(1.0, tokens, Trans::No, &self.encoder.w_in, Trans::Yes, 0.0, &mut z);
        for i in 0..n {
            let row = z.row_mut(i);
            for (v, &bias) in row.iter_mut().zip(&self.encoder.b) {
                *v = gelu_f32(*v + bias);
            }
            layer_norm_f32(row);
        }
        Ok(z)
    }

    /// Latent encoding of a single token.
    pub fn encode_token(&self, x: &[f32]) -> Result<Vec<f32>> {
        let m = Mat::from_vec(1, x.len(), x.to_vec());
        Ok(self.encode_batch(&m)?.into_vec())
    }

    /// Pooled query encoding: the sum (not mean) of per-token encodings.
    pub fn pool_query(&self, query: TokenView<'_>) -> Result<Vec<f32>> {
        if query.data.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let t = query.token_count();
        let mat = Mat::from_vec(t, query.dim, query.data.to_vec());
        let enc = self.encode_batch(&mat)?;
        let dp = self.d_prime();
        let mut acc = vec![0.0f64; dp];
        for i in 0..t {
            for (a, &v) in acc.iter_mut().zip(enc.row(i)) {
                *a += v as f64;
            }
        }
        Ok(acc.into_iter().map(|v| v as f32).collect())
    }

    /// Standardized per-document estimates for one token:
    /// w_out * encode(x).
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        let psi = self.encode_token(x)?;
        Ok((0..self.m_out()).map(|j| dot_f32(self.w_out.row(j), &psi)).collect())
    }
}

/// Assemble a training set: sample m_prime target documents, evaluate
/// per-token targets for every training token, and standardize the
/// targets with one global mean and standard deviation.
pub fn build_training_set(
    corpus: &Corpus,
    tokens: &Mat<f32>,
    cfg: &TrainConfig,
) -> Result<TrainingSet> {
    cfg.validate()?;
    if tokens.rows() == 0 {
        return Err(Error::Argument("training token matrix is empty".into()));
    }
    let doc_ids = sample_target_docs(corpus, cfg.m_prime, derive_seed(cfg.seed, streams::TARGET_DOCS))?;
    let mut targets = per_token_targets_batch(tokens, corpus, &doc_ids)?;

    // Global standardization over all n x m_prime raw values, f64
    // accumulation, population standard deviation.
    let flat = targets.as_slice();
    let count = flat.len() as f64;
    let mut sum = 0.0f64;
    for &v in flat {
        sum += v as f64;
    }
    let mean = sum / count;
    let mut var = 0.0f64;
    for &v in flat {
        let c = v as f64 - mean;
        var += c * c;
    }
    let mut std = libm::sqrt(var / count);
    if std == 0.0 {
        std = 1.0; // degenerate data: all raw targets equal
    }
    for v in targets.as_mut_slice() {
        *v = ((*v as f64 - mean) / std) as f32;
    }
    Ok(TrainingSet {
        inputs: tokens.clone(),
        targets,
        target_mean: mean,
        target_std: std,
        target_doc_ids: doc_ids,
    })
}
