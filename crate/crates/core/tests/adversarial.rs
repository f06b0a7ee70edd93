mod common;

use ccinfer::adversarial::{
    batch_order, same_bits, score_tokens, BatchRecord, DiscItem, GanConfig, GanTrainer, StepLog,
};
use ccinfer::bridge::{bridge_sequence, knn_roundtrip_accuracy};
use ccinfer::neural::{AssertionInput, Graph, ModelConfig, SoftSequence};
use common::ablation::micro_records;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(
    cfg: GanConfig,
    records: &[BatchRecord],
    vocab_len: usize,
    steps: usize,
) -> (GanTrainer, Vec<StepLog>) {
    let mut t = GanTrainer::new(cfg.clone(), ModelConfig::micro(vocab_len)).unwrap();
    let mut logs = Vec::new();
    'outer: for epoch in 0.. {
        for idx in batch_order(records.len(), cfg.batch_size, cfg.seed, epoch) {
            if logs.len() == steps {
                break 'outer;
            }
            let batch: Vec<&BatchRecord> = idx.iter().map(|&i| &records[i]).collect();
            logs.push(t.train_batch(&batch, epoch).unwrap());
        }
    }
    (t, logs)
}

#[test]
fn untrained_discriminator_is_uninformative() {
    let (vocab, records) = micro_records(16);
    let mut t = GanTrainer::new(GanConfig::default(), ModelConfig::micro(vocab.len())).unwrap();
    let items: Vec<DiscItem<'_>> = records
        .iter()
        .flat_map(|r| {
            [1.0, 0.0].map(|label| DiscItem::Tokens {
                record: r,
                tokens: &r.tgt,
                label,
            })
        })
        .collect();
    let loss = t.discriminator_step(&items).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 0.05, "{loss}");
}

#[test]
fn saturated_bce_is_near_zero() {
    let mut g = Graph::new();
    let z = g.constant(ccinfer::neural::Tensor::from_vec(2, 1, vec![12.0, -12.0]));
    let loss = g.bce_with_logits(z, &[1.0, 0.0]);
    assert!(g.value(loss).item() < 1e-3);
}

#[test]
fn zero_adversarial_weight_is_plain_supervised_training() {
    let (vocab, records) = micro_records(24);
    let base = GanConfig {
        confounder: false,
        batch_size: 4,
        lr_g: 1e-3,
        lr_d: 1e-3,
        ..Default::default()
    };
    let (a, logs) = run(
        GanConfig {
            lambda_adv: 0.0,
            ..base.clone()
        },
        &records,
        vocab.len(),
        6,
    );
    let (b, _) = run(
        GanConfig {
            adversarial: false,
            ..base
        },
        &records,
        vocab.len(),
        6,
    );
    assert!(logs.iter().all(|l| l.g_adv.is_some()));
    assert!(same_bits(&a.g.params, &b.g.params));
}

#[test]
fn adversarial_gradient_reaches_generator_embeddings() {
    let (vocab, records) = micro_records(8);
    let cfg = GanConfig {
        lambda_ce: 0.0,
        lambda_adv: 1.0,
        lr_g: 1e-3,
        ..Default::default()
    };
    let mut t = GanTrainer::new(cfg, ModelConfig::micro(vocab.len())).unwrap();
    let batch: Vec<&BatchRecord> = records.iter().take(4).collect();
    let decoded: Vec<Vec<usize>> = batch.iter().map(|r| r.tgt.clone()).collect();
    let before = t.g.params.get("emb").clone();
    t.generator_step(&batch, Some(&decoded)).unwrap();
    let mut delta = t.g.params.get("emb").clone();
    delta.add_assign(&before.scaled(-1.0));
    assert!(delta.l2_norm() > 0.0);
}

#[test]
fn one_hot_bridge_equals_token_path() {
    let (vocab, records) = micro_records(8);
    let t = GanTrainer::new(GanConfig::default(), ModelConfig::micro(vocab.len())).unwrap();
    let r = &records[0];
    let steps = r
        .tgt
        .iter()
        .map(|&id| {
            (0..vocab.len())
                .map(|j| if j == id { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let vectors = bridge_sequence(&SoftSequence { steps }, t.d.params.get("emb"), 1.0).unwrap();
    let ctx = r.context(r.tgt.len(), t.d.cfg.max_len);
    let mut g = Graph::new();
    let b = t.d.params.bind(&mut g, false);
    let v = g.constant(vectors);
    let zv =
        t.d.logit(&mut g, &b, &ctx, AssertionInput::Vectors(v))
            .unwrap();
    let zt =
        t.d.logit(&mut g, &b, &ctx, AssertionInput::Tokens(&r.tgt))
            .unwrap();
    assert!((g.value(zv).item() - g.value(zt).item()).abs() < 1e-12);
}

#[test]
fn score_at_threshold_counts_as_real() {
    let (vocab, records) = micro_records(8);
    let t = GanTrainer::new(GanConfig::default(), ModelConfig::micro(vocab.len())).unwrap();
    let r = &records[0];
    let (s, _) = score_tokens(&t.d, r, &r.tgt, 0.5).unwrap();
    assert!(s > 0.0 && s < 1.0);
    assert!(score_tokens(&t.d, r, &r.tgt, s).unwrap().1);
}

#[test]
fn one_epoch_on_eight_examples_is_finite() {
    let (vocab, records) = micro_records(8);
    let cfg = GanConfig {
        epochs: 1,
        batch_size: 4,
        ..Default::default()
    };
    let mut t = GanTrainer::new(cfg, ModelConfig::micro(vocab.len())).unwrap();
    let summary = t.train(&records, &mut |_| {}).unwrap();
    assert_eq!(summary.len(), 1);
    assert!(summary[0].mean_ce.is_finite());
    assert!(summary[0].mean_d_loss.is_some_and(f64::is_finite));
    assert!(summary[0].mean_adv.is_some_and(f64::is_finite));
}

#[test]
fn thousand_steps_at_default_rates_stay_finite() {
    let (vocab, records) = micro_records(40);
    let cfg = GanConfig {
        batch_size: 4,
        ..Default::default()
    };
    let (_, logs) = run(cfg, &records, vocab.len(), 1000);
    for l in &logs {
        assert!(l.g_ce.is_finite());
        assert!(l.d_loss.is_some_and(f64::is_finite));
        assert!(l.g_adv.is_none_or(f64::is_finite));
    }
}

#[test]
fn fixed_seed_reproduces_losses_bitwise() {
    let (vocab, records) = micro_records(24);
    let cfg = GanConfig {
        batch_size: 4,
        lr_g: 1e-3,
        lr_d: 1e-3,
        ..Default::default()
    };
    let (a, la) = run(cfg.clone(), &records, vocab.len(), 8);
    let (b, lb) = run(cfg, &records, vocab.len(), 8);
    assert_eq!(la, lb);
    assert!(same_bits(&a.g.params, &b.g.params) && same_bits(&a.d.params, &b.d.params));
}

#[test]
fn larger_scale_never_loses_round_trip_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (v, d) = (50, 16);
    let e = ccinfer::neural::Tensor::from_vec(
        v,
        d,
        (0..v * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );
    let samples: Vec<Vec<f64>> = (0..500)
        .map(|_| (0..v).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let a1 = knn_roundtrip_accuracy(&e, &samples, 1.0).unwrap();
    let a10 = knn_roundtrip_accuracy(&e, &samples, 10.0).unwrap();
    assert!(a10 >= a1, "{a1} {a10}");
}
