//! Phase-1 gradient training: Adam over minibatches with a hand-derived
//! backward pass through affine -> GELU -> layer norm -> linear and MSE
//! loss. All training arithmetic runs in f64; the resulting model is
//! narrowed to f32 for serving.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{gemm_f64, Mat, Trans};
use crate::model::{
    gelu_f64, gelu_grad_f64, EncoderParams, LemurModel, TrainConfig, TrainingSet, LAYER_NORM_EPS,
};
use crate::rng::{derive_seed, streams, Rng};

/// Full-precision parameter set used during training.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w_in: Mat<f64>,
    pub b: Vec<f64>,
    pub w_out: Mat<f64>,
}

impl Params {
    pub fn d(&self) -> usize {
        self.w_in.cols()
    }

    pub fn d_prime(&self) -> usize {
        self.w_in.rows()
    }

    pub fn m_out(&self) -> usize {
        self.w_out.rows()
    }

    /// Uniform initialization scaled by 1/sqrt(fan_in); biases start at
    /// zero.
    pub fn init(d: usize, d_prime: usize, m_out: usize, rng: &mut Rng) -> Self {
        let s_in = 1.0 / libm::sqrt(d as f64);
        let s_out = 1.0 / libm::sqrt(d_prime as f64);
        let w_in = Mat::from_vec(
            d_prime,
            d,
            (0..d_prime * d).map(|_| rng.uniform(-s_in, s_in)).collect(),
        );
        let w_out = Mat::from_vec(
            m_out,
            d_prime,
            (0..m_out * d_prime).map(|_| rng.uniform(-s_out, s_out)).collect(),
        );
        Params { w_in, b: vec![0.0; d_prime], w_out }
    }

    pub fn zeros(d: usize, d_prime: usize, m_out: usize) -> Self {
        Params {
            w_in: Mat::zeros(d_prime, d),
            b: vec![0.0; d_prime],
            w_out: Mat::zeros(m_out, d_prime),
        }
    }

    /// Narrow to the f32 serving representation.
    pub fn to_model(&self, target_mean: f64, target_std: f64) -> LemurModel {
        LemurModel {
            encoder: EncoderParams {
                w_in: self.w_in.to_f32(),
                b: self.b.iter().map(|&v| v as f32).collect(),
            },
            w_out: self.w_out.to_f32(),
            target_mean,
            target_std,
        }
    }
}

/// Gradients, same shapes as [`Params`].
#[derive(Debug, Clone)]
pub struct Grads {
    pub w_in: Mat<f64>,
    pub b: Vec<f64>,
    pub w_out: Mat<f64>,
}

impl Grads {
    fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        for &g in self.w_in.as_slice() {
            sq += g * g;
        }
        for &g in &self.b {
            sq += g * g;
        }
        for &g in self.w_out.as_slice() {
            sq += g * g;
        }
        libm::sqrt(sq)
    }

    fn scale(&mut self, s: f64) {
        for g in self.w_in.as_mut_slice() {
            *g *= s;
        }
        for g in &mut self.b {
            *g *= s;
        }
        for g in self.w_out.as_mut_slice() {
            *g *= s;
        }
    }
}

/// MSE loss (mean over batch rows and outputs) and its gradients with
/// respect to every parameter. `x` is (batch x d), `t` is
/// (batch x m_out).
pub fn loss_and_grads(p: &Params, x: &Mat<f64>, t: &Mat<f64>) -> (f64, Grads) {
    let (loss, grads, _) = forward_backward(p, x, t, true);
    (loss, grads.expect("grads requested"))
}

/// Loss only; shares the forward code with [`loss_and_grads`].
pub fn loss_only(p: &Params, x: &Mat<f64>, t: &Mat<f64>) -> f64 {
    forward_backward(p, x, t, false).0
}

fn forward_backward(
    p: &Params,
    x: &Mat<f64>,
    t: &Mat<f64>,
    want_grads: bool,
) -> (f64, Option<Grads>, ()) {
    let batch = x.rows();
    let d = p.d();
    let dp = p.d_prime();
    let m_out = p.m_out();
    assert_eq!(x.cols(), d);
    assert_eq!(t.rows(), batch);
    assert_eq!(t.cols(), m_out);

    // Z = X W_inᵀ + b
    let mut z = Mat::zeros(batch, dp);
    gemm_f64(1.0, x, Trans::No, &p.w_in, Trans::Yes, 0.0, &mut z);
    for i in 0..batch {
        for (v, &bias) in z.row_mut(i).iter_mut().zip(&p.b) {
            *v += bias;
        }
    }

    // A = GELU(Z); Y = LN(A) with cached per-row rstd.
    let mut y = Mat::zeros(batch, dp);
    let mut rstd = vec![0.0f64; batch];
    for i in 0..batch {
        let zr = z.row(i);
        let yr = y.row_mut(i);
        let mut sum = 0.0;
        for (o, &zv) in yr.iter_mut().zip(zr) {
            *o = gelu_f64(zv);
            sum += *o;
        }
        let mean = sum / dp as f64;
        let mut var = 0.0;
        for &a in yr.iter() {
            let c = a - mean;
            var += c * c;
        }
        var /= dp as f64;
        let r = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
        rstd[i] = r;
        for a in yr.iter_mut() {
            *a = (*a - mean) * r;
        }
    }

    // O = Y W_outᵀ
    let mut o = Mat::zeros(batch, m_out);
    gemm_f64(1.0, &y, Trans::No, &p.w_out, Trans::Yes, 0.0, &mut o);

    // Loss and dO (reuse `o` for the residual-scaled gradient).
    let denom = (batch * m_out) as f64;
    let mut sse = 0.0;
    for (ov, tv) in o.as_mut_slice().iter_mut().zip(t.as_slice()) {
        let r = *ov - tv;
        sse += r * r;
        *ov = 2.0 * r / denom;
    }
    let loss = sse / denom;
    if !want_grads {
        return (loss, None, ());
    }
    let d_o = o;

    // dW_out = dOᵀ Y
    let mut g_w_out = Mat::zeros(m_out, dp);
    gemm_f64(1.0, &d_o, Trans::Yes, &y, Trans::No, 0.0, &mut g_w_out);

    // dY = dO W_out, then layer-norm backward into dA (in place) and
    // GELU backward into dZ.
    let mut d_y = Mat::zeros(batch, dp);
    gemm_f64(1.0, &d_o, Trans::No, &p.w_out, Trans::No, 0.0, &mut d_y);
    for i in 0..batch {
        let yr = y.row(i);
        let dyr = d_y.row_mut(i);
        let mut mean_dy = 0.0;
        let mut mean_dy_y = 0.0;
        for (&dy, &yv) in dyr.iter().zip(yr) {
            mean_dy += dy;
            mean_dy_y += dy * yv;
        }
        mean_dy /= dp as f64;
        mean_dy_y /= dp as f64;
        let r = rstd[i];
        let zr = z.row(i);
        for ((dy, &yv), &zv) in dyr.iter_mut().zip(yr).zip(zr) {
            let da = r * (*dy - mean_dy - yv * mean_dy_y);
            *dy = da * gelu_grad_f64(zv);
        }
    }
    let d_z = d_y;

    // dW_in = dZᵀ X; db = column sums of dZ.
    let mut g_w_in = Mat::zeros(dp, d);
    gemm_f64(1.0, &d_z, Trans::Yes, x, Trans::No, 0.0, &mut g_w_in);
    let mut g_b = vec![0.0f64; dp];
    for i in 0..batch {
        for (gb, &dz) in g_b.iter_mut().zip(d_z.row(i)) {
            *gb += dz;
        }
    }

    (loss, Some(Grads { w_in: g_w_in, b: g_b, w_out: g_w_out }), ())
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
    lr: f64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], step: 0, lr }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], offset: usize) {
        let bc1 = 1.0 - libm::pow(BETA1, self.step as f64);
        let bc2 = 1.0 - libm::pow(BETA2, self.step as f64);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            let idx = offset + i;
            self.m[idx] = BETA1 * self.m[idx] + (1.0 - BETA1) * g;
            self.v[idx] = BETA2 * self.v[idx] + (1.0 - BETA2) * g * g;
            let mhat = self.m[idx] / bc1;
            let vhat = self.v[idx] / bc2;
            *p -= self.lr * mhat / (libm::sqrt(vhat) + ADAM_EPS);
        }
    }
}

/// Per-epoch mean loss over the full training set.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Train in full precision. Deterministic given the config seed; two runs
/// with identical inputs produce bitwise-identical parameters.
pub fn train_f64(training: &TrainingSet, cfg: &TrainConfig) -> Result<(Params, TrainReport)> {
    cfg.validate()?;
    let n = training.inputs.rows();
    let d = training.inputs.cols();
    let m_out = training.targets.cols();
    if training.targets.rows() != n {
        return Err(Error::Argument("inputs and targets disagree on sample count".into()));
    }
    if cfg.batch_size > n {
        return Err(Error::Argument("batch_size exceeds training set size".into()));
    }

    let mut init_rng = Rng::seed_from_u64(derive_seed(cfg.seed, streams::INIT));
    let mut params = Params::init(d, cfg.d_prime, m_out, &mut init_rng);
    let mut shuffle_rng = Rng::seed_from_u64(derive_seed(cfg.seed, streams::SHUFFLE));

    let total = params.w_in.as_slice().len() + params.b.len() + params.w_out.as_slice().len();
    let mut adam = Adam::new(total, cfg.lr);
    let (off_b, off_out) =
        (params.w_in.as_slice().len(), params.w_in.as_slice().len() + params.b.len());

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut xb = Mat::<f64>::zeros(cfg.batch_size, d);
    let mut tb = Mat::<f64>::zeros(cfg.batch_size, m_out);

    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut sse_epoch = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let b = chunk.len();
            if xb.rows() != b {
                xb = Mat::zeros(b, d);
                tb = Mat::zeros(b, m_out);
            }
            for (row, &idx) in chunk.iter().enumerate() {
                for (dst, &src) in xb.row_mut(row).iter_mut().zip(training.inputs.row(idx)) {
                    *dst = src as f64;
                }
                for (dst, &src) in tb.row_mut(row).iter_mut().zip(training.targets.row(idx)) {
                    *dst = src as f64;
                }
            }
            let (loss, mut grads) = loss_and_grads(&params, &xb, &tb);
            if !loss.is_finite() {
                return Err(Error::TrainDiverged { epoch, step });
            }
            sse_epoch += loss * (b * m_out) as f64;

            let norm = grads.global_norm();
            if norm > cfg.grad_clip {
                grads.scale(cfg.grad_clip / norm);
            }
            adam.step += 1;
            adam.update(params.w_in.as_mut_slice(), grads.w_in.as_slice(), 0);
            adam.update(&mut params.b, &grads.b, off_b);
            adam.update(params.w_out.as_mut_slice(), grads.w_out.as_slice(), off_out);
        }
        epoch_losses.push(sse_epoch / (n * m_out) as f64);
    }
    Ok((params, TrainReport { epoch_losses }))
}

/// Train and narrow to the f32 serving model (m_out = m_prime rows).
pub fn train(training: &TrainingSet, cfg: &TrainConfig) -> Result<(LemurModel, TrainReport)> {
    let (params, report) = train_f64(training, cfg)?;
    Ok((params.to_model(training.target_mean, training.target_std), report))
}

/// Compare the analytic gradients against central finite differences on
/// a random small instance; returns the maximum relative error over all
/// parameters.
pub fn gradient_check(d: usize, d_prime: usize, m_out: usize, batch: usize, seed: u64) -> f64 {
    let mut rng = Rng::seed_from_u64(seed);
    let params = Params::init(d, d_prime, m_out, &mut rng);
    let x = Mat::from_vec(batch, d, (0..batch * d).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let t = Mat::from_vec(
        batch,
        m_out,
        (0..batch * m_out).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    );
    let (_, grads) = loss_and_grads(&params, &x, &t);

    let h = 1e-6;
    let mut max_rel: f64 = 0.0;
    let mut probe = |analytic: f64, perturb: &mut dyn FnMut(&mut Params, f64)| {
        let mut plus = params.clone();
        perturb(&mut plus, h);
        let lp = loss_only(&plus, &x, &t);
        let mut minus = params.clone();
        perturb(&mut minus, -h);
        let lm = loss_only(&minus, &x, &t);
        let numeric = (lp - lm) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        if rel > max_rel {
            max_rel = rel;
        }
    };

    for i in 0..d_prime * d {
        probe(grads.w_in.as_slice()[i], &mut |p, eps| p.w_in.as_mut_slice()[i] += eps);
    }
    for i in 0..d_prime {
        probe(grads.b[i], &mut |p, eps| p.b[i] += eps);
    }
    for i in 0..m_out * d_prime {
        probe(grads.w_out.as_slice()[i], &mut |p, eps| p.w_out.as_mut_slice()[i] += eps);
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{sample_training_tokens, Corpus, MultiVectorDoc};
    use crate::model::build_training_set;

    fn synthetic_training_set(seed: u64) -> (Corpus, TrainingSet, TrainConfig) {
        let mut rng = Rng::seed_from_u64(seed);
        let docs: Vec<MultiVectorDoc> = (0..16)
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
            d_prime: 32,
            m_prime: 4,
            n: 256,
            epochs: 30,
            batch_size: 64,
            seed,
            ..Default::default()
        };
        let tokens = sample_training_tokens(&corpus, cfg.n, derive_seed(seed, streams::TRAIN_TOKENS))
            .unwrap();
        let ts = build_training_set(&corpus, &tokens, &cfg).unwrap();
        (corpus, ts, cfg)
    }

    #[test]
    fn loss_decreases_during_training() {
        let (_, ts, cfg) = synthetic_training_set(100);
        let (_, report) = train_f64(&ts, &cfg).unwrap();
        let first = report.epoch_losses[0];
        let last = *report.epoch_losses.last().unwrap();
        assert!(last < first, "no descent: {first} -> {last}");
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (_, ts, cfg) = synthetic_training_set(7);
        let (a, _) = train_f64(&ts, &cfg).unwrap();
        let (b, _) = train_f64(&ts, &cfg).unwrap();
        assert_eq!(a.w_out.as_slice().len(), b.w_out.as_slice().len());
        for (x, y) in a.w_out.as_slice().iter().zip(b.w_out.as_slice()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.w_in.as_slice().iter().zip(b.w_in.as_slice()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn gradient_check_passes() {
        for seed in [1u64, 2, 3] {
            let err = gradient_check(8, 16, 4, 6, seed);
            assert!(err < 1e-4, "seed {seed}: max rel err {err}");
        }
    }

    #[test]
    fn zero_params_zero_targets_zero_grads() {
        let params = Params::zeros(4, 8, 3);
        let x = Mat::from_vec(2, 4, vec![0.5; 8]);
        let t = Mat::<f64>::zeros(2, 3);
        let (loss, grads) = loss_and_grads(&params, &x, &t);
        assert_eq!(loss, 0.0);
        assert!(grads.w_in.as_slice().iter().all(|&g| g == 0.0));
        assert!(grads.b.iter().all(|&g| g == 0.0));
        assert!(grads.w_out.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn negative_gradient_is_a_descent_direction() {
        let mut rng = Rng::seed_from_u64(9);
        let params = Params::init(6, 12, 3, &mut rng);
        let x = Mat::from_vec(8, 6, (0..48).map(|_| rng.uniform(-1.0, 1.0)).collect());
        let t = Mat::from_vec(8, 3, (0..24).map(|_| rng.uniform(-1.0, 1.0)).collect());
        let (loss, grads) = loss_and_grads(&params, &x, &t);
        let norm = grads.global_norm();
        assert!(norm > 0.0);
        let h = 1e-4 / norm;
        let mut stepped = params.clone();
        for (p, &g) in stepped.w_in.as_mut_slice().iter_mut().zip(grads.w_in.as_slice()) {
            *p -= h * g;
        }
        for (p, &g) in stepped.b.iter_mut().zip(&grads.b) {
            *p -= h * g;
        }
        for (p, &g) in stepped.w_out.as_mut_slice().iter_mut().zip(grads.w_out.as_slice()) {
            *p -= h * g;
        }
        assert!(loss_only(&stepped, &x, &t) < loss);
    }

    #[test]
    fn nan_targets_report_divergence() {
        let (_, mut ts, cfg) = synthetic_training_set(11);
        ts.targets.as_mut_slice()[0] = f32::NAN;
        let err = train_f64(&ts, &cfg).unwrap_err();
        assert!(matches!(err, Error::TrainDiverged { .. }));
    }

    #[test]
    fn teacher_student_recovery() {
        // Targets produced by a fixed random model of the same
        // architecture must be learnable to low MSE.
        let mut rng = Rng::seed_from_u64(1234);
        let d = 8;
        let dp = 32;
        let m_out = 4;
        let n = 256;
        let teacher = Params::init(d, dp, m_out, &mut rng);
        let mut inputs = Mat::<f32>::zeros(n, d);
        for i in 0..n {
            for v in inputs.row_mut(i) {
                *v = rng.uniform(-1.0, 1.0) as f32;
            }
        }
        let x64 = inputs.to_f64();
        // Teacher forward pass to produce targets.
        let mut targets = Mat::<f32>::zeros(n, m_out);
        for i in 0..n {
            let xr = Mat::from_vec(1, d, x64.row(i).to_vec());
            let t_dummy = Mat::<f64>::zeros(1, m_out);
            // loss_only needs targets; run the forward by abusing
            // loss_and_grads? No: compute directly.
            let _ = t_dummy;
            let mut z = vec![0.0f64; dp];
            for h in 0..dp {
                let mut s = teacher.b[h];
                for (w, &xv) in teacher.w_in.row(h).iter().zip(xr.row(0)) {
                    s += w * xv;
                }
                z[h] = gelu_f64(s);
            }
            let mean: f64 = z.iter().sum::<f64>() / dp as f64;
            let var: f64 = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dp as f64;
            let rstd = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
            let y: Vec<f64> = z.iter().map(|v| (v - mean) * rstd).collect();
            for j in 0..m_out {
                let s: f64 = teacher.w_out.row(j).iter().zip(&y).map(|(w, v)| w * v).sum();
                targets.row_mut(i)[j] = s as f32;
            }
        }
        let ts = TrainingSet {
            inputs,
            targets,
            target_mean: 0.0,
            target_std: 1.0,
            target_doc_ids: (0..m_out).collect(),
        };
        let cfg = TrainConfig {
            d_prime: dp,
            m_prime: m_out,
            n,
            epochs: 100,
            batch_size: 64,
            seed: 777,
            ..Default::default()
        };
        let (_, report) = train_f64(&ts, &cfg).unwrap();
        let final_mse = *report.epoch_losses.last().unwrap();
        assert!(final_mse < 0.05, "teacher-student MSE {final_mse}");
    }
}
