// Align assertions to their nearest story and sentence with the builtin
// hashed embedder, using both the exact and the partitioned index.

use ccinfer::align::{align_corpus, BuiltinEmbedder, IndexMode};
use ccinfer::kb::Assertion;
use ccinfer::synthetic::synthetic_corpus;

pub fn run_example() -> anyhow::Result<()> {
    let corpus = synthetic_corpus(64, 7);
    let assertions: Vec<Assertion> = corpus.aligned.iter().map(|a| a.assertion.clone()).collect();
    let embedder = BuiltinEmbedder::new(256, 0)?;
    let a_emb = embedder.embed_assertions(&assertions)?;
    let s_emb = embedder.embed_stories(&corpus.stories)?;

    let exact = align_corpus(&assertions, &corpus.stories, &a_emb, &s_emb, IndexMode::Exact, &embedder)?;
    let mode = IndexMode::Partitioned { k_clusters: 8, n_probe: 3, seed: 0 };
    let partitioned = align_corpus(&assertions, &corpus.stories, &a_emb, &s_emb, mode, &embedder)?;

    for al in exact.iter().take(4) {
        println!(
            "{:>28} -> {} sentence {} (distance {:.3})",
            al.assertion.text(),
            al.story_id,
            al.sentence_index,
            al.sentence_distance
        );
    }
    let same = exact.iter().zip(&partitioned).filter(|(a, b)| a.story_id == b.story_id).count();
    println!("partitioned index agrees on {same}/{} stories", exact.len());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
