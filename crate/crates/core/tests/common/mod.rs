#![allow(dead_code)]

use ccinfer::adversarial::{
    build_records, confounder_shuffle, score_tokens, BatchRecord, EpochSummary, GanConfig,
    GanTrainer,
};
use ccinfer::hint::FormatMap;
use ccinfer::neural::{ModelConfig, Vocabulary};
use ccinfer::synthetic::{synthetic_dataset, synthetic_relations};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Memorized {
    pub trainer: GanTrainer,
    pub vocab: Vocabulary,
    pub summaries: Vec<EpochSummary>,
    pub held_out: Vec<BatchRecord>,
}

/// Trains the toy model for 3 epochs at batch 8 on 200 synthetic examples.
/// The held-out split has its own seed and no hints.
pub fn memorize(epochs: usize) -> Memorized {
    let formats = FormatMap::default();
    let train = synthetic_dataset(200, &formats, 0.5, 1).unwrap();
    let held = synthetic_dataset(100, &formats, 0.0, 2).unwrap();
    let texts = train
        .examples
        .iter()
        .flat_map(|e| [e.source_text.as_str(), e.target_text.as_str()]);
    let vocab = Vocabulary::build(texts, 1, &synthetic_relations());
    let model = ModelConfig::toy(vocab.len());
    let records = build_records(&train.examples, &vocab, model.max_len).unwrap();
    let held_out = build_records(&held.examples, &vocab, model.max_len).unwrap();
    let cfg = GanConfig {
        batch_size: 8,
        epochs,
        lr_g: 1e-3,
        lr_d: 1e-3,
        seed: 0,
        ..Default::default()
    };
    let mut trainer = GanTrainer::new(cfg, model).unwrap();
    let summaries = trainer.train(&records, &mut |_| {}).unwrap();
    Memorized {
        trainer,
        vocab,
        summaries,
        held_out,
    }
}

/// Accuracy of the discriminator at threshold 0.5 on real (label 1) and
/// confounded (label 0) held-out records, and the number of items scored.
pub fn real_vs_confounded_accuracy(m: &Memorized) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut correct, mut n) = (0, 0);
    for chunk in m.held_out.chunks(8) {
        let c = confounder_shuffle(chunk, &mut rng, false);
        for r in chunk {
            correct += usize::from(score_tokens(&m.trainer.d, r, &r.tgt, 0.5).unwrap().1);
            n += 1;
        }
        for r in &c.records {
            correct += usize::from(!score_tokens(&m.trainer.d, r, &r.tgt, 0.5).unwrap().1);
            n += 1;
        }
    }
    (correct as f64 / n as f64, n)
}

/// Chance level plus three binomial standard deviations.
pub fn chance_bar(n: usize) -> f64 {
    0.5 + 3.0 * (0.25 / n as f64).sqrt()
}

pub mod align {
    use ccinfer::align::{
        build_index, cosine_distance, AlignedAssertion, BuiltinEmbedder, EmbeddingMatrix,
        IndexMode, SentenceEmbedder, Story,
    };
    use ccinfer::kb::Assertion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Noise norm relative to the unit cluster center.
    pub const SPREAD: f64 = 1.5;

    fn unit(v: Vec<f64>) -> Vec<f32> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| (x / n) as f32).collect()
    }

    pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
        unit((0..dim).map(|_| StandardNormal.sample(rng)).collect())
    }

    pub fn random_matrix(rng: &mut impl Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
        let ids = (0..rows).map(|i| format!("r{i:04}")).collect();
        EmbeddingMatrix::new(
            ids,
            dim,
            (0..rows).flat_map(|_| random_unit(rng, dim)).collect(),
        )
        .unwrap()
    }

    /// Rows scattered around `clusters` random unit centers.
    pub fn clustered_matrix(
        rng: &mut impl Rng,
        clusters: usize,
        rows: usize,
        dim: usize,
        spread: f64,
    ) -> EmbeddingMatrix {
        let centers: Vec<Vec<f32>> = (0..clusters).map(|_| random_unit(rng, dim)).collect();
        let ids = (0..rows).map(|i| format!("r{i:04}")).collect();
        let data = (0..rows)
            .flat_map(|i| {
                let c = &centers[i % clusters];
                let v: Vec<f64> = c
                    .iter()
                    .map(|&x| {
                        f64::from(x)
                            + spread * Distribution::<f64>::sample(&StandardNormal, rng)
                                / (dim as f64).sqrt()
                    })
                    .collect();
                unit(v)
            })
            .collect();
        EmbeddingMatrix::new(ids, dim, data).unwrap()
    }

    /// Linear scan in f64, ties to the smallest id.
    pub fn brute_force(m: &EmbeddingMatrix, q: &[f32]) -> usize {
        let mut best = 0;
        for r in 1..m.len() {
            let (d, bd) = (
                cosine_distance(m.row(r), q),
                cosine_distance(m.row(best), q),
            );
            if d < bd || (d == bd && m.ids()[r] < m.ids()[best]) {
                best = r;
            }
        }
        best
    }

    /// Queries (out of `queries`) where the exact index disagrees with the scan.
    pub fn exact_mismatches(seed: u64, queries: usize, rows: usize, dim: usize) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, rows, dim);
        let index = build_index(m.clone(), IndexMode::Exact).unwrap();
        (0..queries)
            .filter(|_| {
                let q = random_unit(&mut rng, dim);
                index.nearest(&q).unwrap().row != brute_force(&m, &q)
            })
            .count()
    }

    /// Recall@1 of the partitioned index against the scan, for queries drawn
    /// from the same clustered distribution as the rows.
    pub fn partitioned_recall(
        seed: u64,
        rows: usize,
        queries: usize,
        k: usize,
        n_probe: usize,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 32;
        let all = clustered_matrix(&mut rng, k, rows + queries, dim, SPREAD);
        let ids = all.ids()[..rows].to_vec();
        let m = EmbeddingMatrix::new(ids, dim, all.rows()[..rows * dim].to_vec()).unwrap();
        let index = build_index(
            m.clone(),
            IndexMode::Partitioned {
                k_clusters: k,
                n_probe,
                seed,
            },
        )
        .unwrap();
        let hits = (rows..rows + queries)
            .filter(|&i| {
                let q = all.row(i);
                index.nearest(q).unwrap().row == brute_force(&m, q)
            })
            .count();
        hits as f64 / queries as f64
    }

    /// Recall@1 of the partitioned index over hashed embeddings of `stories`
    /// synthetic stories, queried with their assertions.
    pub fn synthetic_recall(stories: usize, k: usize, n_probe: usize) -> f64 {
        let corpus = ccinfer::synthetic::synthetic_corpus(stories, 3);
        let embedder = BuiltinEmbedder::new(256, 0).unwrap();
        let m = embedder.embed_stories(&corpus.stories).unwrap();
        let assertions: Vec<Assertion> =
            corpus.aligned.iter().map(|a| a.assertion.clone()).collect();
        let q = embedder.embed_assertions(&assertions).unwrap();
        let index = build_index(
            m.clone(),
            IndexMode::Partitioned {
                k_clusters: k,
                n_probe,
                seed: 0,
            },
        )
        .unwrap();
        let hits = (0..q.len())
            .filter(|&i| index.nearest(q.row(i)).unwrap().row == brute_force(&m, q.row(i)))
            .count();
        hits as f64 / q.len() as f64
    }

    /// Every (story, sentence) pair scored explicitly: nearest story by full
    /// text, ties to the smaller id, then nearest sentence, ties to the lower index.
    pub fn exhaustive_two_stage(
        assertions: &[Assertion],
        stories: &[Story],
        embedder: &BuiltinEmbedder,
    ) -> Vec<(String, usize)> {
        let a_emb = embedder.embed_assertions(assertions).unwrap();
        let s_emb = embedder.embed_stories(stories).unwrap();
        assertions
            .iter()
            .map(|a| {
                let q = a_emb.get(&a.id).unwrap();
                let story = stories
                    .iter()
                    .min_by(|x, y| {
                        let dx = cosine_distance(s_emb.get(&x.story_id).unwrap(), q);
                        let dy = cosine_distance(s_emb.get(&y.story_id).unwrap(), q);
                        dx.total_cmp(&dy).then(x.story_id.cmp(&y.story_id))
                    })
                    .unwrap();
                let sentences = embedder.embed_sentences(story).unwrap();
                let mut best = 0;
                for (i, v) in sentences.iter().enumerate() {
                    if cosine_distance(v, q) < cosine_distance(&sentences[best], q) {
                        best = i;
                    }
                }
                (story.story_id.clone(), best + 1)
            })
            .collect()
    }

    pub fn fixture() -> (Vec<Assertion>, Vec<Story>) {
        let story = |id: &str, s: [&str; 4]| {
            Story::new(id, s.iter().map(|x| x.to_string()).collect()).unwrap()
        };
        let stories = vec![
            story(
                "kitchen",
                [
                    "Maya opened the fridge.",
                    "The milk had gone sour.",
                    "She poured it down the sink.",
                    "Maya bought fresh milk at the store.",
                ],
            ),
            story(
                "hockey",
                [
                    "The hockey game was tied.",
                    "Our team had the puck.",
                    "We sprinted down the ice.",
                    "We scored a final goal!",
                ],
            ),
            story(
                "garden",
                [
                    "Leo planted tomato seeds.",
                    "He watered the garden every day.",
                    "Weeds grew between the rows.",
                    "Leo harvested red tomatoes in August.",
                ],
            ),
        ];
        let assertion = |id: &str, subject: &str, rel: &str, text: &str, object: &str| Assertion {
            id: id.into(),
            source: ccinfer::kb::Source::Atomic2020,
            subject: subject.into(),
            relation: rel.into(),
            relation_text: text.into(),
            object: object.into(),
            specificity: ccinfer::kb::Specificity::Specific,
            glucose_dimension: None,
        };
        let assertions = vec![
            assertion(
                "a1",
                "the team scored a final goal",
                "xReact",
                "makes the subject feel",
                "proud and excited",
            ),
            assertion(
                "a2",
                "the milk had gone sour",
                "xEffect",
                "has the effect on the subject",
                "pours the milk down the sink",
            ),
        ];
        (assertions, stories)
    }

    pub fn pairs(aligned: &[AlignedAssertion]) -> Vec<(String, usize)> {
        aligned
            .iter()
            .map(|a| (a.story_id.clone(), a.sentence_index))
            .collect()
    }
}

pub mod formats {
    use ccinfer::align::AlignedAssertion;
    use ccinfer::hint::{render_example, Format, Hint, PartKind, RenderInput};
    use ccinfer::kb::{Assertion, Source, Specificity};

    pub const HOCKEY: [&str; 5] = [
        "The hockey game was tied up.",
        "The red team had the puck.",
        "They sprinted down the ice.",
        "They cracked a shot on goal!",
        "They scored a final goal!",
    ];

    fn assertion(
        id: &str,
        source: Source,
        spec: Specificity,
        s: &str,
        r: &str,
        rt: &str,
        o: &str,
    ) -> Assertion {
        Assertion {
            id: id.into(),
            source,
            subject: s.into(),
            relation: r.into(),
            relation_text: rt.into(),
            object: o.into(),
            specificity: spec,
            glucose_dimension: (source == Source::Glucose).then_some(7),
        }
    }

    fn aligned(a: Assertion) -> AlignedAssertion {
        AlignedAssertion {
            assertion: a,
            story_id: "hockey".into(),
            sentence_index: 5,
            story_distance: 0.0,
            sentence_distance: 0.0,
        }
    }

    fn lines(path: &str) -> (String, String) {
        let raw = std::fs::read_to_string(format!(
            "{}/tests/fixtures/{path}",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap();
        let mut it = raw.lines();
        (
            it.next().unwrap().to_string(),
            it.next().unwrap().to_string(),
        )
    }

    /// (rendered source, rendered target, fixture source, fixture target) per fixture.
    pub fn cases() -> Vec<(&'static str, String, String, String, String)> {
        let sentences: Vec<String> = HOCKEY.iter().map(|s| s.to_string()).collect();
        let mut out = Vec::new();

        let a = aligned(assertion(
            "atomic2020:hockey",
            Source::Atomic2020,
            Specificity::Specific,
            "They",
            "xEffect",
            "has the effect on the subject",
            "win the game",
        ));
        let input = RenderInput {
            aligned: &a,
            sentences: &sentences,
            counterpart: None,
        };
        let ex = render_example(input, None, Format::Paracomet).unwrap();
        let (s, t) = lines("paracomet_hockey.txt");
        out.push(("paracomet_hockey", ex.source_text, ex.target_text, s, t));

        let spec = aligned(assertion(
            "glucose:7:s",
            Source::Glucose,
            Specificity::Specific,
            "the red team scores the final goal",
            "Causes",
            "causes",
            "the red team feel(s) happy",
        ));
        let general = assertion(
            "glucose:7:g",
            Source::Glucose,
            Specificity::General,
            "Some People_A (who are a team) score the final goal",
            "Causes",
            "causes",
            "Some People_A feel(s) happy",
        );
        let input = RenderInput {
            aligned: &spec,
            sentences: &sentences,
            counterpart: Some(&general),
        };
        let hint = Hint::from_kinds(
            &spec.assertion,
            &[PartKind::Specificity, PartKind::Subject],
            Format::Glucose.hint_parts(),
        )
        .unwrap();
        let ex = render_example(input, Some(&hint), Format::Glucose).unwrap();
        let (s, t) = lines("glucose_table1_row2.txt");
        out.push(("glucose_table1_row2", ex.source_text, ex.target_text, s, t));

        let a = aligned(assertion(
            "conceptnet:capable",
            Source::Conceptnet,
            Specificity::General,
            "person",
            "CapableOf",
            "is/are capable of",
            "laugh at joke",
        ));
        let input = RenderInput {
            aligned: &a,
            sentences: &sentences,
            counterpart: None,
        };
        let ex = render_example(input, None, Format::Joint).unwrap();
        let (s, t) = lines("joint_capable_of.txt");
        out.push(("joint_capable_of", ex.source_text, ex.target_text, s, t));
        out
    }
}

pub mod ablation {
    use ccinfer::adversarial::{
        batch_order, build_records, same_bits, BatchRecord, DiscItem, GanConfig, GanTrainer,
    };
    use ccinfer::hint::FormatMap;
    use ccinfer::neural::{Generator, Graph, ModelConfig, ParamSet, Tensor, Vocabulary};
    use ccinfer::synthetic::{synthetic_dataset, synthetic_relations};

    pub fn micro_records(n: usize) -> (Vocabulary, Vec<BatchRecord>) {
        let ds = synthetic_dataset(n, &FormatMap::default(), 0.5, 4).unwrap();
        let texts = ds
            .examples
            .iter()
            .flat_map(|e| [e.source_text.as_str(), e.target_text.as_str()]);
        let vocab = Vocabulary::build(texts, 1, &synthetic_relations());
        let records = build_records(
            &ds.examples,
            &vocab,
            ModelConfig::micro(vocab.len()).max_len,
        )
        .unwrap();
        (vocab, records)
    }

    /// Textbook Adam, written out here so the trainer's optimizer is not its own oracle.
    struct RefAdam {
        lr: f64,
        t: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    }

    impl RefAdam {
        fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) {
            let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
            self.t += 1;
            if self.m.is_empty() {
                self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                self.v = self.m.clone();
            }
            for (k, (p, g)) in params.tensors_mut().iter_mut().zip(grads).enumerate() {
                for (i, (x, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                    self.m[k][i] = b1 * self.m[k][i] + (1.0 - b1) * gi;
                    self.v[k][i] = b2 * self.v[k][i] + (1.0 - b2) * gi * gi;
                    let m_hat = self.m[k][i] / (1.0 - b1.powi(self.t));
                    let v_hat = self.v[k][i] / (1.0 - b2.powi(self.t));
                    *x -= self.lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }

    /// Plain supervised training: one graph per batch holding the mean of the
    /// per-example cross-entropies. Returns the loss before each update.
    pub fn reference_losses(
        mut g: Generator,
        records: &[BatchRecord],
        batch: usize,
        lr: f64,
        seed: u64,
        steps: usize,
    ) -> Vec<f64> {
        let mut opt = RefAdam {
            lr,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        };
        let mut losses = Vec::new();
        'outer: for epoch in 0.. {
            for idx in batch_order(records.len(), batch, seed, epoch) {
                if losses.len() == steps {
                    break 'outer;
                }
                let mut graph = Graph::new();
                let b = g.params.bind(&mut graph, true);
                let mut total = None;
                for &i in &idx {
                    let l = g
                        .ce_loss(&mut graph, &b, &records[i].src, &records[i].tgt)
                        .unwrap();
                    total = Some(match total {
                        None => l,
                        Some(t) => graph.add(t, l),
                    });
                }
                let loss = graph.scale(total.unwrap(), 1.0 / idx.len() as f64);
                let grads = b.grads(&graph.backward(loss));
                losses.push(graph.value(loss).item());
                opt.step(&mut g.params, &grads);
            }
        }
        losses
    }

    /// Largest gap between trainer and reference losses over `steps` updates,
    /// and whether the discriminator stayed bit-identical throughout.
    pub fn supervised_ablation_gap(steps: usize) -> (f64, bool) {
        let (vocab, records) = micro_records(40);
        let cfg = GanConfig {
            adversarial: false,
            confounder: false,
            batch_size: 4,
            lr_g: 1e-3,
            seed: 5,
            ..Default::default()
        };
        let mut trainer = GanTrainer::new(cfg.clone(), ModelConfig::micro(vocab.len())).unwrap();
        let d0 = trainer.d.params.clone();
        let reference = reference_losses(trainer.g.clone(), &records, 4, 1e-3, 5, steps);
        let mut got = Vec::new();
        'outer: for epoch in 0.. {
            for idx in batch_order(records.len(), cfg.batch_size, cfg.seed, epoch) {
                if got.len() == steps {
                    break 'outer;
                }
                let batch: Vec<&BatchRecord> = idx.iter().map(|&i| &records[i]).collect();
                let log = trainer.train_batch(&batch, epoch).unwrap();
                assert!(log.d_loss.is_none() && log.g_adv.is_none());
                got.push(log.g_ce);
            }
        }
        let gap = got
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (gap, same_bits(&d0, &trainer.d.params))
    }

    /// (generator untouched by a discriminator step, discriminator untouched
    /// by a generator step with the adversarial term on).
    pub fn parameter_isolation() -> (bool, bool) {
        let (vocab, records) = micro_records(16);
        let cfg = GanConfig {
            lr_g: 1e-2,
            lr_d: 1e-2,
            batch_size: 4,
            ..Default::default()
        };
        let mut t = GanTrainer::new(cfg, ModelConfig::micro(vocab.len())).unwrap();
        let batch: Vec<&BatchRecord> = records.iter().take(4).collect();

        let g0 = t.g.params.clone();
        let d0 = t.d.params.clone();
        let items: Vec<DiscItem<'_>> = batch
            .iter()
            .map(|r| DiscItem::Tokens {
                record: r,
                tokens: &r.tgt,
                label: 1.0,
            })
            .collect();
        t.discriminator_step(&items).unwrap();
        let g_kept = same_bits(&g0, &t.g.params) && !same_bits(&d0, &t.d.params);

        let g1 = t.g.params.clone();
        let d1 = t.d.params.clone();
        let decoded: Vec<Vec<usize>> = batch.iter().map(|r| r.tgt.clone()).collect();
        let (_, adv) = t.generator_step(&batch, Some(&decoded)).unwrap();
        let d_kept = adv.is_some() && same_bits(&d1, &t.d.params) && !same_bits(&g1, &t.g.params);
        (g_kept, d_kept)
    }
}
