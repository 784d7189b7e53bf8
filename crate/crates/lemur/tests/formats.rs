//! Property tests for the binary formats: arbitrary valid artifacts must
//! survive write -> read -> write with identical bytes.

use proptest::prelude::*;
use tempfile::TempDir;

use lemur::format::{
    read_corpus, read_ground_truth, write_corpus, write_ground_truth,
};
use lemur_core::corpus::{Corpus, MultiVectorDoc};
use lemur_core::maxsim::{GroundTruth, ScoredDoc};

fn arb_corpus() -> impl Strategy<Value = Corpus> {
    (1usize..5, 1usize..6).prop_flat_map(|(dim, m)| {
        proptest::collection::vec(
            (1usize..5).prop_flat_map(move |t| {
                proptest::collection::vec(-100.0f32..100.0, t * dim)
            }),
            m,
        )
        .prop_map(move |docs| {
            let docs: Vec<MultiVectorDoc> =
                docs.into_iter().map(|d| MultiVectorDoc::new(dim, d).unwrap()).collect();
            Corpus::from_docs(&docs).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_round_trip_is_byte_identical(corpus in arb_corpus()) {
        let dir = TempDir::new().unwrap();
        let a = dir.path().join("a.mvec");
        let b = dir.path().join("b.mvec");
        write_corpus(&corpus, &a).unwrap();
        let back = read_corpus(&a).unwrap();
        prop_assert_eq!(&back, &corpus);
        write_corpus(&back, &b).unwrap();
        prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn ground_truth_round_trip_is_byte_identical(
        k in 1usize..6,
        nq in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = lemur_core::rng::Rng::seed_from_u64(seed);
        let truth = GroundTruth {
            k,
            lists: (0..nq)
                .map(|_| {
                    (0..k)
                        .map(|_| ScoredDoc {
                            doc_id: rng.below(1000) as usize,
                            score: rng.uniform(-10.0, 10.0) as f32,
                        })
                        .collect()
                })
                .collect(),
        };
        let dir = TempDir::new().unwrap();
        let a = dir.path().join("a.gt");
        let b = dir.path().join("b.gt");
        write_ground_truth(&truth, &a).unwrap();
        let back = read_ground_truth(&a).unwrap();
        prop_assert_eq!(&back, &truth);
        write_ground_truth(&back, &b).unwrap();
        prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn truncation_never_parses(corpus in arb_corpus(), cut in 1usize..32) {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("c.mvec");
        write_corpus(&corpus, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let cut = cut.min(bytes.len() - 1);
        std::fs::write(&p, &bytes[..bytes.len() - cut]).unwrap();
        prop_assert!(read_corpus(&p).is_err());
    }
}
