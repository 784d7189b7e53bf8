//! Desk-scale synthetic data: each document draws a Gaussian center and
//! scatters its tokens around it, so MaxSim rankings carry real cluster
//! structure instead of pure noise.

use lemur_core::corpus::{Corpus, MultiVectorDoc};
use lemur_core::rng::{derive_seed, streams, Rng};
use lemur_core::Error as CoreError;

use crate::error::Result;

/// Token scatter around each document center.
const NOISE_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub m: usize,
    pub d: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub seed: u64,
}

/// Generate a synthetic corpus: document j gets a token count uniform in
/// [t_min, t_max] and tokens center_j + noise.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Corpus> {
    if spec.m == 0 || spec.d == 0 {
        return Err(CoreError::Argument("m and d must be positive".into()).into());
    }
    if spec.t_min == 0 || spec.t_min > spec.t_max {
        return Err(
            CoreError::Argument("token range requires 1 <= t_min <= t_max".into()).into()
        );
    }
    let mut rng = Rng::seed_from_u64(derive_seed(spec.seed, streams::SYNTH));
    let mut docs = Vec::with_capacity(spec.m);
    let mut center = vec![0.0f64; spec.d];
    for _ in 0..spec.m {
        for c in center.iter_mut() {
            *c = rng.normal();
        }
        let t = spec.t_min + rng.below((spec.t_max - spec.t_min + 1) as u64) as usize;
        let mut data = Vec::with_capacity(t * spec.d);
        for _ in 0..t {
            for &c in &center {
                data.push((c + NOISE_SCALE * rng.normal()) as f32);
            }
        }
        docs.push(MultiVectorDoc::new(spec.d, data)?);
    }
    Ok(Corpus::from_docs(&docs)?)
}

/// Queries drawn from the same generative family with an independent
/// seed stream.
pub fn synth_queries(spec: &SynthSpec) -> Result<Corpus> {
    let q = SynthSpec { seed: derive_seed(spec.seed, streams::QUERIES), ..*spec };
    synth_corpus(&q)
}
