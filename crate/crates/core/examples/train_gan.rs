// Train the micro generator/discriminator pair on a synthetic corpus and
// save a checkpoint.

use ccinfer::adversarial::{build_records, GanConfig, GanTrainer};
use ccinfer::hint::FormatMap;
use ccinfer::neural::{Checkpoint, ModelConfig, Vocabulary};
use ccinfer::synthetic::{synthetic_dataset, synthetic_relations};

pub fn run_example() -> anyhow::Result<()> {
    let data = synthetic_dataset(48, &FormatMap::default(), 0.5, 1)?;
    let texts = data.examples.iter().flat_map(|e| [e.source_text.as_str(), e.target_text.as_str()]);
    let vocab = Vocabulary::build(texts, 1, &synthetic_relations());
    let model = ModelConfig::micro(vocab.len());
    let records = build_records(&data.examples, &vocab, model.max_len)?;

    let cfg = GanConfig { epochs: 3, batch_size: 8, lr_g: 3e-3, lr_d: 1e-3, roundtrip_every: 2, ..Default::default() };
    let mut trainer = GanTrainer::new(cfg, model)?;
    let summaries = trainer.train(&records, &mut |log| {
        if let Some(acc) = log.roundtrip_acc {
            println!("step {:>2}: ce {:.3} round trip {acc:.2}", log.step, log.g_ce);
        }
    })?;
    for s in &summaries {
        println!("epoch {}: ce {:.3} d {:.3?} adv {:.3?}", s.epoch, s.mean_ce, s.mean_d_loss, s.mean_adv);
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("last.ckp");
    Checkpoint::from_models(trainer.steps(), &vocab.hash(), &trainer.g, &trainer.d).save(&path)?;
    let restored = Checkpoint::load(&path)?;
    println!("checkpoint at step {} with {} tensors", restored.step, restored.tensors.len());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
