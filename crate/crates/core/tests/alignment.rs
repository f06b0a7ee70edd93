mod common;

use ccinfer::align::{align_corpus, embed_builtin, BuiltinEmbedder, IndexMode};
use common::align::{
    exact_mismatches, exhaustive_two_stage, fixture, pairs, partitioned_recall, synthetic_recall,
};

#[test]
fn exact_index_matches_linear_scan() {
    for seed in 0..3 {
        assert_eq!(exact_mismatches(seed, 50, 200, 24), 0);
    }
}

#[test]
fn partitioned_index_recall_at_one() {
    for recall in [
        partitioned_recall(7, 500, 200, 8, 3),
        synthetic_recall(500, 8, 3),
    ] {
        assert!(recall >= 0.9, "{recall}");
    }
}

#[test]
fn two_stage_alignment_matches_exhaustive_scan() {
    let (assertions, stories) = fixture();
    let embedder = BuiltinEmbedder::new(256, 0).unwrap();
    let a = embedder.embed_assertions(&assertions).unwrap();
    let s = embedder.embed_stories(&stories).unwrap();
    let got = align_corpus(&assertions, &stories, &a, &s, IndexMode::Exact, &embedder).unwrap();
    let want = exhaustive_two_stage(&assertions, &stories, &embedder);
    assert_eq!(pairs(&got), want);
    assert_eq!(
        want,
        vec![("hockey".to_string(), 4), ("kitchen".to_string(), 2)]
    );
}

#[test]
fn builtin_embedding_orders_by_shared_words() {
    let texts: Vec<String> = [
        "the dog barked at the mail carrier",
        "a dog barked loudly",
        "stock markets fell sharply today",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let m = embed_builtin(&texts, 256, 0).unwrap();
    let cos = |i: usize, j: usize| {
        m.row(i)
            .iter()
            .zip(m.row(j))
            .map(|(a, b)| f64::from(*a) * f64::from(*b))
            .sum::<f64>()
    };
    assert!(cos(0, 1) > cos(0, 2));
    assert!(cos(0, 1) > cos(1, 2));
}
