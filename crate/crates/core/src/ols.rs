//! Second training phase: with the feature encoder frozen, every
//! document's output row is the solution of an ordinary least-squares
//! problem against the encoder's features. One Gram factorization is
//! shared by all m solves, which is what makes indexing whole corpora
//! (and inserting new documents) cheap.

use alloc::format;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, cholesky_solve, gemm_f64, Mat, Trans};
use crate::maxsim::per_token_targets_batch;
use crate::model::LemurModel;

/// Configuration of the closed-form head fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsConfig {
    /// Token embeddings sampled for computing the solutions (n').
    pub n_prime: usize,
    /// Diagonal regularizer added to the Gram matrix. Guards
    /// rank-deficient feature matrices (e.g. n' < d_prime) and sits far
    /// below score-ranking sensitivity.
    pub ridge_eps: f64,
    pub seed: u64,
}

impl Default for OlsConfig {
    fn default() -> Self {
        OlsConfig { n_prime: 16_384, ridge_eps: 1e-6, seed: 42 }
    }
}

/// Documents per target/solve block; bounds scratch memory.
const DOC_BLOCK: usize = 1024;

/// Shared least-squares machinery: features and the Cholesky factor of
/// Gram = phi' * phi + ridge * I, reused across all right-hand sides.
#[derive(Debug)]
pub struct HeadSolver {
    phi: Mat<f64>,
    factor: Mat<f64>,
}

impl HeadSolver {
    /// `phi` is the (n' x d_prime) feature matrix.
    pub fn new(phi: Mat<f64>, ridge_eps: f64) -> Result<Self> {
        if ridge_eps < 0.0 {
            return Err(Error::Argument("ridge_eps must be non-negative".into()));
        }
        let dp = phi.cols();
        let mut gram = Mat::zeros(dp, dp);
        gemm_f64(1.0, &phi, Trans::Yes, &phi, Trans::No, 0.0, &mut gram);
        for i in 0..dp {
            gram.row_mut(i)[i] += ridge_eps;
        }
        cholesky_factor(&mut gram)?;
        Ok(HeadSolver { phi, factor: gram })
    }

    pub fn n_samples(&self) -> usize {
        self.phi.rows()
    }

    pub fn d_prime(&self) -> usize {
        self.phi.cols()
    }

    pub fn phi(&self) -> &Mat<f64> {
        &self.phi
    }

    /// Solve for one document: `targets` holds the n' per-token values;
    /// returns the d_prime weight row.
    pub fn solve(&self, targets: &[f64]) -> Result<Vec<f64>> {
        if targets.len() != self.phi.rows() {
            return Err(Error::Argument(format!(
                "expected {} targets, got {}",
                self.phi.rows(),
                targets.len()
            )));
        }
        let y = Mat::from_vec(targets.len(), 1, targets.to_vec());
        let mut rhs = Mat::zeros(1, self.d_prime());
        gemm_f64(1.0, &y, Trans::Yes, &self.phi, Trans::No, 0.0, &mut rhs);
        let mut w = rhs.into_vec();
        cholesky_solve(&self.factor, &mut w);
        Ok(w)
    }

    /// Solve a block of documents at once: `targets` is (n' x nb), one
    /// column per document; the returned matrix holds one weight row per
    /// document.
    pub fn solve_block(&self, targets: &Mat<f64>) -> Result<Mat<f64>> {
        if targets.rows() != self.phi.rows() {
            return Err(Error::Argument(format!(
                "expected {} target rows, got {}",
                self.phi.rows(),
                targets.rows()
            )));
        }
        let nb = targets.cols();
        let mut rhs = Mat::zeros(nb, self.d_prime());
        gemm_f64(1.0, targets, Trans::Yes, &self.phi, Trans::No, 0.0, &mut rhs);
        for j in 0..nb {
            cholesky_solve(&self.factor, rhs.row_mut(j));
        }
        Ok(rhs)
    }
}

/// Fit output rows for every document of `corpus` with the encoder of
/// `model` frozen; returns a model with m output rows sharing the
/// phase-1 target standardization.
pub fn fit_full_head(
    model: &LemurModel,
    corpus: &Corpus,
    tokens: &Mat<f32>,
    cfg: &OlsConfig,
) -> Result<LemurModel> {
    model.validate()?;
    if tokens.cols() != model.d() || corpus.dim() != model.d() {
        return Err(Error::DimMismatch { expected: model.d(), got: tokens.cols() });
    }
    if tokens.rows() == 0 {
        return Err(Error::Argument("token matrix for the head fit is empty".into()));
    }
    let phi = model.encode_batch(tokens)?.to_f64();
    let solver = HeadSolver::new(phi, cfg.ridge_eps)?;

    let m = corpus.len();
    let dp = model.d_prime();
    let n_prime = tokens.rows();
    let (mu, sigma) = (model.target_mean, model.target_std);
    let mut w_out = Mat::<f32>::zeros(m, dp);

    let mut block_start = 0usize;
    while block_start < m {
        let block_end = (block_start + DOC_BLOCK).min(m);
        let ids: Vec<usize> = (block_start..block_end).collect();
        let raw = per_token_targets_batch(tokens, corpus, &ids)?;
        let mut y = Mat::<f64>::zeros(n_prime, ids.len());
        for (dst, &src) in y.as_mut_slice().iter_mut().zip(raw.as_slice()) {
            *dst = (src as f64 - mu) / sigma;
        }
        let rows = solver.solve_block(&y)?;
        for (local, j) in (block_start..block_end).enumerate() {
            for (dst, &src) in w_out.row_mut(j).iter_mut().zip(rows.row(local)) {
                *dst = src as f32;
            }
        }
        block_start = block_end;
    }

    Ok(LemurModel {
        encoder: model.encoder.clone(),
        w_out,
        target_mean: mu,
        target_std: sigma,
    })
}

/// Per-document comparison of the closed-form rows against the phase-1
/// gradient-trained rows.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadAgreement {
    pub doc_id: usize,
    pub ols_mse: f64,
    pub phase1_mse: f64,
}

/// Diagnostic: for documents shared between the phase-1 head and the
/// closed-form fit, measure prediction MSE on `eval_tokens` for both
/// rows. `phase1_doc_ids` is the I' list the phase-1 output rows
/// correspond to; `doc_ids` must be a subset of it. The closed-form rows
/// are fit on `train_tokens`.
pub fn head_agreement(
    phase1: &LemurModel,
    phase1_doc_ids: &[usize],
    doc_ids: &[usize],
    corpus: &Corpus,
    train_tokens: &Mat<f32>,
    eval_tokens: &Mat<f32>,
    cfg: &OlsConfig,
) -> Result<Vec<HeadAgreement>> {
    if phase1_doc_ids.len() != phase1.m_out() {
        return Err(Error::Argument(
            "phase1_doc_ids length must match the phase-1 output row count".into(),
        ));
    }
    let phi_train = phase1.encode_batch(train_tokens)?.to_f64();
    let solver = HeadSolver::new(phi_train, cfg.ridge_eps)?;
    let phi_eval = phase1.encode_batch(eval_tokens)?.to_f64();
    let (mu, sigma) = (phase1.target_mean, phase1.target_std);

    let mut out = Vec::with_capacity(doc_ids.len());
    for &doc in doc_ids {
        let row_pos = phase1_doc_ids
            .iter()
            .position(|&j| j == doc)
            .ok_or_else(|| Error::Argument(format!("doc {doc} is not a phase-1 target")))?;

        let raw_train = per_token_targets_batch(train_tokens, corpus, &[doc])?;
        let y_train: Vec<f64> =
            raw_train.as_slice().iter().map(|&v| (v as f64 - mu) / sigma).collect();
        let w_ols = solver.solve(&y_train)?;

        let raw_eval = per_token_targets_batch(eval_tokens, corpus, &[doc])?;
        let mut ols_sse = 0.0;
        let mut p1_sse = 0.0;
        for i in 0..eval_tokens.rows() {
            let truth = (raw_eval.row(i)[0] as f64 - mu) / sigma;
            let feats = phi_eval.row(i);
            let pred_ols: f64 = feats.iter().zip(&w_ols).map(|(f, w)| f * w).sum();
            let pred_p1: f64 = feats
                .iter()
                .zip(phase1.w_out.row(row_pos))
                .map(|(f, &w)| f * w as f64)
                .sum();
            ols_sse += (pred_ols - truth) * (pred_ols - truth);
            p1_sse += (pred_p1 - truth) * (pred_p1 - truth);
        }
        let n = eval_tokens.rows() as f64;
        out.push(HeadAgreement { doc_id: doc, ols_mse: ols_sse / n, phase1_mse: p1_sse / n });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{sample_training_tokens, Corpus, MultiVectorDoc};
    use crate::linalg::dot_f64;
    use crate::model::{build_training_set, TrainConfig};
    use crate::rng::{derive_seed, streams, Rng};
    use crate::train;
    use alloc::vec;

    fn random_phi(rng: &mut Rng, n: usize, dp: usize) -> Mat<f64> {
        Mat::from_vec(n, dp, (0..n * dp).map(|_| rng.uniform(-1.0, 1.0)).collect())
    }

    #[test]
    fn exact_interpolation_recovers_beta() {
        let mut rng = Rng::seed_from_u64(1);
        let phi = random_phi(&mut rng, 64, 8);
        let beta: Vec<f64> = (0..8).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let y: Vec<f64> = (0..64).map(|i| dot_f64(phi.row(i), &beta)).collect();
        let solver = HeadSolver::new(phi, 0.0).unwrap();
        let w = solver.solve(&y).unwrap();
        for (a, b) in w.iter().zip(&beta) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn zero_targets_give_zero_row() {
        let mut rng = Rng::seed_from_u64(2);
        let phi = random_phi(&mut rng, 32, 6);
        let solver = HeadSolver::new(phi, 0.0).unwrap();
        let w = solver.solve(&vec![0.0; 32]).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_independent_gauss_jordan_solver() {
        let mut rng = Rng::seed_from_u64(3);
        let phi = random_phi(&mut rng, 64, 8);
        let y: Vec<f64> = (0..64).map(|_| rng.uniform(-1.0, 1.0)).collect();

        // Independent oracle: form the normal equations and solve them by
        // Gauss-Jordan elimination with partial pivoting.
        let dp = 8;
        let mut aug = vec![vec![0.0f64; dp + 1]; dp];
        for r in 0..dp {
            for c in 0..dp {
                let mut s = 0.0;
                for i in 0..64 {
                    s += phi.row(i)[r] * phi.row(i)[c];
                }
                aug[r][c] = s;
            }
            let mut s = 0.0;
            for i in 0..64 {
                s += phi.row(i)[r] * y[i];
            }
            aug[r][dp] = s;
        }
        for col in 0..dp {
            let piv = (col..dp).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
            aug.swap(col, piv);
            let p = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= p;
            }
            for r in 0..dp {
                if r != col {
                    let f = aug[r][col];
                    for c in 0..=dp {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
        let expect: Vec<f64> = (0..dp).map(|r| aug[r][dp]).collect();

        let solver = HeadSolver::new(phi, 0.0).unwrap();
        let got = solver.solve(&y).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn normal_equation_residuals_are_tiny() {
        let mut rng = Rng::seed_from_u64(4);
        let phi = random_phi(&mut rng, 128, 12);
        let ridge = 1e-6;
        let solver = HeadSolver::new(phi.clone(), ridge).unwrap();
        for _ in 0..10 {
            let y: Vec<f64> = (0..128).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let w = solver.solve(&y).unwrap();
            // residual of (phi'phi + ridge I) w = phi'y
            let mut rhs = [0.0f64; 12];
            for i in 0..128 {
                for (r, &p) in rhs.iter_mut().zip(phi.row(i)) {
                    *r += p * y[i];
                }
            }
            let mut res_sq = 0.0;
            let mut rhs_sq = 0.0;
            for r in 0..12 {
                let mut lhs = ridge * w[r];
                for c in 0..12 {
                    let mut g = 0.0;
                    for i in 0..128 {
                        g += phi.row(i)[r] * phi.row(i)[c];
                    }
                    lhs += g * w[c];
                }
                let diff = lhs - rhs[r];
                res_sq += diff * diff;
                rhs_sq += rhs[r] * rhs[r];
            }
            assert!(res_sq.sqrt() <= 1e-6 * rhs_sq.sqrt(), "residual too large");
        }
    }

    #[test]
    fn block_solve_equals_independent_solves() {
        let mut rng = Rng::seed_from_u64(5);
        let phi = random_phi(&mut rng, 64, 8);
        let solver = HeadSolver::new(phi.clone(), 1e-6).unwrap();
        let nb = 7;
        let mut y = Mat::<f64>::zeros(64, nb);
        for v in y.as_mut_slice() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let block = solver.solve_block(&y).unwrap();
        for j in 0..nb {
            // fresh solver: independent factorization path
            let fresh = HeadSolver::new(phi.clone(), 1e-6).unwrap();
            let col: Vec<f64> = (0..64).map(|i| y.row(i)[j]).collect();
            let w = fresh.solve(&col).unwrap();
            for (a, b) in block.row(j).iter().zip(&w) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let mut rng = Rng::seed_from_u64(6);
        let phi = random_phi(&mut rng, 4, 8); // n' < d_prime: Gram is singular
        let err = HeadSolver::new(phi.clone(), 0.0).unwrap_err();
        match err {
            Error::Singular(msg) => assert!(msg.contains("ridge_eps")),
            other => panic!("expected Singular, got {other:?}"),
        }
        assert!(HeadSolver::new(phi, 1e-6).is_ok());
    }

    #[test]
    fn ols_beats_random_probes_in_sample() {
        let mut rng = Rng::seed_from_u64(7);
        let phi = random_phi(&mut rng, 64, 8);
        let y: Vec<f64> = (0..64).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let solver = HeadSolver::new(phi.clone(), 0.0).unwrap();
        let w = solver.solve(&y).unwrap();
        let mse = |w: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..64 {
                let p = dot_f64(phi.row(i), w);
                s += (p - y[i]) * (p - y[i]);
            }
            s / 64.0
        };
        let ols_mse = mse(&w);
        for _ in 0..100 {
            let probe: Vec<f64> = (0..8).map(|_| rng.uniform(-2.0, 2.0)).collect();
            assert!(ols_mse <= mse(&probe) + 1e-12);
        }
    }

    fn trained_setup(
        seed: u64,
    ) -> (Corpus, LemurModel, Vec<usize>, Mat<f32>, TrainConfig, OlsConfig) {
        let mut rng = Rng::seed_from_u64(seed);
        let docs: Vec<MultiVectorDoc> = (0..24)
            .map(|_| {
                let t = 2 + rng.below(4) as usize;
                MultiVectorDoc::new(
                    8,
                    (0..t * 8).map(|_| rng.uniform(-1.0, 1.0) as f32).collect(),
                )
                .unwrap()
            })
            .collect();
        let corpus = Corpus::from_docs(&docs).unwrap();
        let cfg = TrainConfig {
            d_prime: 16,
            m_prime: 8,
            n: 128,
            epochs: 15,
            batch_size: 32,
            seed,
            ..Default::default()
        };
        let tokens =
            sample_training_tokens(&corpus, cfg.n, derive_seed(seed, streams::TRAIN_TOKENS))
                .unwrap();
        let ts = build_training_set(&corpus, &tokens, &cfg).unwrap();
        let (model, _) = train::train(&ts, &cfg).unwrap();
        let ols = OlsConfig { n_prime: 96, ridge_eps: 1e-6, seed };
        let ols_tokens =
            sample_training_tokens(&corpus, ols.n_prime, derive_seed(seed, streams::OLS_TOKENS))
                .unwrap();
        (corpus, model, ts.target_doc_ids, ols_tokens, cfg, ols)
    }

    #[test]
    fn full_head_has_one_row_per_document() {
        let (corpus, model, _, ols_tokens, _, ols) = trained_setup(42);
        let full = fit_full_head(&model, &corpus, &ols_tokens, &ols).unwrap();
        assert_eq!(full.m_out(), corpus.len());
        assert_eq!(full.d_prime(), model.d_prime());
        assert_eq!(full.target_mean, model.target_mean);
        assert_eq!(full.target_std, model.target_std);
        full.validate().unwrap();
    }

    #[test]
    fn full_head_rows_match_single_solves() {
        let (corpus, model, _, ols_tokens, _, ols) = trained_setup(43);
        let full = fit_full_head(&model, &corpus, &ols_tokens, &ols).unwrap();
        let phi = model.encode_batch(&ols_tokens).unwrap().to_f64();
        let solver = HeadSolver::new(phi, ols.ridge_eps).unwrap();
        for j in [0usize, 5, 23] {
            let raw = per_token_targets_batch(&ols_tokens, &corpus, &[j]).unwrap();
            let y: Vec<f64> = raw
                .as_slice()
                .iter()
                .map(|&v| (v as f64 - model.target_mean) / model.target_std)
                .collect();
            let w = solver.solve(&y).unwrap();
            for (a, &b) in w.iter().zip(full.w_out.row(j)) {
                assert!((b as f64 - a).abs() <= 1e-6 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn full_head_model_keeps_pooling_and_ranking_invariants() {
        let (corpus, model, _, ols_tokens, _, ols) = trained_setup(46);
        let full = fit_full_head(&model, &corpus, &ols_tokens, &ols).unwrap();
        let mut rng = Rng::seed_from_u64(99);
        for _ in 0..10 {
            let t = 1 + rng.below(6) as usize;
            let q = MultiVectorDoc::new(
                8,
                (0..t * 8).map(|_| rng.uniform(-1.0, 1.0) as f32).collect(),
            )
            .unwrap();
            let pooled = full.pool_query(q.view()).unwrap();
            let mut summed = vec![0.0f64; full.m_out()];
            for tok in q.view().tokens() {
                for (s, v) in summed.iter_mut().zip(full.forward(tok).unwrap()) {
                    *s += v as f64;
                }
            }
            let scores: Vec<f64> = (0..full.m_out())
                .map(|j| crate::linalg::dot_f32(full.w_out.row(j), &pooled) as f64)
                .collect();
            for (a, b) in scores.iter().zip(&summed) {
                assert!((a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1.0), "{a} vs {b}");
            }
            // de-standardized order matches standardized order
            let destd: Vec<f64> = scores
                .iter()
                .map(|&s| full.target_std * s + t as f64 * full.target_mean)
                .collect();
            let order = |vals: &[f64]| {
                let mut idx: Vec<usize> = (0..vals.len()).collect();
                idx.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]).then(x.cmp(&y)));
                idx
            };
            assert_eq!(order(&scores), order(&destd));
        }
    }

    #[test]
    fn head_agreement_ols_is_in_sample_optimal() {
        let (corpus, model, doc_ids, ols_tokens, _, ols) = trained_setup(44);
        // Evaluate on the OLS training tokens themselves: the closed-form
        // row is the in-sample optimum, so it cannot lose by more than
        // the (tiny) ridge effect.
        let report = head_agreement(
            &model,
            &doc_ids,
            &doc_ids,
            &corpus,
            &ols_tokens,
            &ols_tokens,
            &ols,
        )
        .unwrap();
        assert_eq!(report.len(), doc_ids.len());
        for r in &report {
            assert!(
                r.ols_mse <= r.phase1_mse * 1.1 + 1e-9,
                "doc {}: ols {} vs phase1 {}",
                r.doc_id,
                r.ols_mse,
                r.phase1_mse
            );
        }
    }

    #[test]
    fn head_agreement_rejects_unknown_doc() {
        let (corpus, model, doc_ids, ols_tokens, _, ols) = trained_setup(45);
        let bad = vec![999usize];
        // 999 is out of the phase-1 target set (and the corpus).
        let err =
            head_agreement(&model, &doc_ids, &bad, &corpus, &ols_tokens, &ols_tokens, &ols)
                .unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }
}
