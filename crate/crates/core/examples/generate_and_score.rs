// Decode with greedy and beam search, then score real and confounded
// assertions with the discriminator.

use ccinfer::adversarial::{build_records, confounder_shuffle, score_tokens, GanConfig, GanTrainer};
use ccinfer::hint::FormatMap;
use ccinfer::neural::{ModelConfig, Vocabulary};
use ccinfer::synthetic::{synthetic_dataset, synthetic_relations};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> anyhow::Result<()> {
    let data = synthetic_dataset(16, &FormatMap::default(), 0.0, 2)?;
    let texts = data.examples.iter().flat_map(|e| [e.source_text.as_str(), e.target_text.as_str()]);
    let vocab = Vocabulary::build(texts, 1, &synthetic_relations());
    let model = ModelConfig::micro(vocab.len());
    let records = build_records(&data.examples, &vocab, model.max_len)?;
    let cfg = GanConfig { epochs: 40, batch_size: 8, lr_g: 1e-2, lr_d: 3e-3, ..Default::default() };
    let mut trainer = GanTrainer::new(cfg, model)?;
    trainer.train(&records, &mut |_| {})?;

    for ex in data.examples.iter().take(2) {
        let src = vocab.tokenize(&ex.source_text);
        let (greedy, _) = trainer.g.greedy(&src, 16)?;
        let (beam, _) = trainer.g.beam(&src, 4, 16)?;
        println!("target: {}\n  greedy: {}\n  beam:   {}", ex.target_text, vocab.detokenize(&greedy), vocab.detokenize(&beam));
    }

    let batch = &records[..4];
    let confounded = confounder_shuffle(batch, &mut ChaCha8Rng::seed_from_u64(0), false);
    for (real, fake) in batch.iter().zip(&confounded.records) {
        let (s_real, _) = score_tokens(&trainer.d, real, &real.tgt, 0.5)?;
        let (s_fake, _) = score_tokens(&trainer.d, fake, &fake.tgt, 0.5)?;
        println!("real {s_real:.3}  confounded {s_fake:.3}");
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
