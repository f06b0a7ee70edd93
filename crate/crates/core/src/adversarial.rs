//! GAN training: teacher-forced cross-entropy plus an adversarial term for
//! the generator, real/fake/confounded binary cross-entropy for the
//! discriminator, one discriminator step then one generator step per batch.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{
    bridge_sequence, knn_roundtrip_accuracy, logits_of, soft_embed_graph, BridgeError,
};
use crate::hint::{Format, HintError, TrainingExample};
use crate::neural::{
    disc_assertion_cap, disc_context, gradcheck, is_symbol, split_tokens, Adam, AssertionInput,
    CheckedSet, Discriminator, Generator, GradcheckConfig, GradcheckReport, Graph, ModelConfig,
    NeuralError, ParamSet, SoftSequence, Tensor, Vocabulary, BOS, EOS,
};

#[derive(Debug, thiserror::Error)]
pub enum GanError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Hint(#[from] HintError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("target `{0}` has no recoverable subject/relation/object spans")]
    Spans(String),
    #[error("non-finite {0} loss")]
    NonFinite(&'static str),
    #[error("empty dataset")]
    EmptyDataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub lambda_ce: f64,
    pub lambda_adv: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub p_hint: f64,
    pub confounder: bool,
    pub adversarial: bool,
    /// Also derange subjects, independently of objects.
    pub shuffle_subjects: bool,
    pub seed: u64,
    pub score_threshold: f64,
    /// Bridge softmax pre-multiplier.
    pub scale: f64,
    /// Greedy decoding budget for fakes.
    pub max_decode: usize,
    /// Log round-trip accuracy every this many steps; 0 disables it.
    pub roundtrip_every: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            lambda_ce: 1.0,
            lambda_adv: 0.1,
            batch_size: 32,
            epochs: 3,
            lr_g: 1e-5,
            lr_d: 1e-5,
            p_hint: 0.5,
            confounder: true,
            adversarial: true,
            shuffle_subjects: false,
            seed: 0,
            score_threshold: 0.5,
            scale: 1.0,
            max_decode: 24,
            roundtrip_every: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<(), GanError> {
        let bad = |m: &str| Err(GanError::Config(m.to_string()));
        if !(self.lambda_ce >= 0.0 && self.lambda_adv >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr_g > 0.0 && self.lr_d > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_hint) {
            return bad("p_hint must lie in [0, 1]");
        }
        if !(self.score_threshold > 0.0 && self.score_threshold < 1.0) {
            return bad("score_threshold must lie in (0, 1)");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale must be positive");
        }
        if self.max_decode == 0 {
            return bad("max_decode must be positive");
        }
        Ok(())
    }
}

/// Token ranges of the tuple parts inside a target. Empty ranges mark parts a
/// format does not carry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TupleSpans {
    pub subject: Range<usize>,
    pub relation: Range<usize>,
    pub object: Range<usize>,
}

/// Recovers spans from target tokens. Joint targets use their part symbols;
/// GLUCOSE targets use the specific half `subj >Rel> obj`; a ParaCOMET target
/// is all object.
pub fn tuple_spans(format: Format, tokens: &[&str]) -> Option<TupleSpans> {
    let find = |t: &str, from: usize| {
        tokens[from..]
            .iter()
            .position(|x| *x == t)
            .map(|i| i + from)
    };
    match format {
        Format::Paracomet => Some(TupleSpans {
            subject: 0..0,
            relation: 0..0,
            object: 0..tokens.len(),
        }),
        Format::Joint => {
            let s = find("<subject>", 0)?;
            let r = find("<relation>", s + 1)?;
            let o = find("<object>", r + 1)?;
            Some(TupleSpans {
                subject: s + 1..r,
                relation: r + 1..o,
                object: o + 1..tokens.len(),
            })
        }
        Format::Glucose => {
            let a = find(">", 0)?;
            let b = find(">", a + 1)?;
            let end = find("*", b + 1).unwrap_or(tokens.len());
            Some(TupleSpans {
                subject: 0..a,
                relation: a + 1..b,
                object: b + 1..end,
            })
        }
    }
}

/// A tokenized training example with discriminator context parts.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchRecord {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub story: Vec<usize>,
    pub sentence: Vec<usize>,
    pub spans: TupleSpans,
}

impl BatchRecord {
    /// Sources longer than `max_len` lose tokens from the front, keeping the
    /// target marker and hint; targets are cut to `max_len - 1`.
    pub fn from_example(
        ex: &TrainingExample,
        vocab: &Vocabulary,
        max_len: usize,
    ) -> Result<Self, GanError> {
        let mut src = vocab.tokenize(&ex.source_text);
        if src.len() > max_len {
            src.drain(..src.len() - max_len);
        }
        let words = split_tokens(&ex.target_text);
        let spans = tuple_spans(ex.format, &words)
            .ok_or_else(|| GanError::Spans(ex.target_text.clone()))?;
        let mut tgt: Vec<usize> = words
            .iter()
            .map(|w| vocab.id(w).unwrap_or(crate::neural::UNK))
            .collect();
        tgt.truncate(max_len.saturating_sub(1));
        let clip = |r: Range<usize>| r.start.min(tgt.len())..r.end.min(tgt.len());
        let spans = TupleSpans {
            subject: clip(spans.subject),
            relation: clip(spans.relation),
            object: clip(spans.object),
        };
        Ok(BatchRecord {
            src,
            tgt,
            story: vocab.tokenize(&ex.story_text()),
            sentence: vocab.tokenize(ex.target_sentence()),
            spans,
        })
    }

    /// Discriminator context for an assertion of `assertion_len` tokens.
    pub fn context(&self, assertion_len: usize, max_len: usize) -> Vec<usize> {
        disc_context(&self.story, &self.sentence, assertion_len, max_len)
    }

    /// The target as the discriminator sees it, cut to [`disc_assertion_cap`].
    pub fn disc_tokens(&self, max_len: usize) -> &[usize] {
        &self.tgt[..self.tgt.len().min(disc_assertion_cap(max_len))]
    }
}

pub fn build_records(
    examples: &[TrainingExample],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<BatchRecord>, GanError> {
    examples
        .iter()
        .map(|ex| BatchRecord::from_example(ex, vocab, max_len))
        .collect()
}

/// A uniformly random permutation of `0..n` without fixed points, by
/// rejection. `None` when `n < 2`.
pub fn derangement(n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    if n < 2 {
        return None;
    }
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &j)| i != j) {
            return Some(p);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Confounded {
    pub records: Vec<BatchRecord>,
    /// Record `i` received the object of record `objects[i]`.
    pub objects: Vec<usize>,
    pub subjects: Option<Vec<usize>>,
    /// Set when the batch was too small to derange.
    pub skipped: bool,
}

fn splice(r: &BatchRecord, subject: &[usize], object: &[usize]) -> BatchRecord {
    let (s, o) = (&r.spans.subject, &r.spans.object);
    let mut tgt = Vec::with_capacity(r.tgt.len() + subject.len() + object.len());
    tgt.extend_from_slice(&r.tgt[..s.start]);
    tgt.extend_from_slice(subject);
    let shift = subject.len() as isize - s.len() as isize;
    tgt.extend_from_slice(&r.tgt[s.end..o.start]);
    let o_start = tgt.len();
    tgt.extend_from_slice(object);
    let o_end = tgt.len();
    tgt.extend_from_slice(&r.tgt[o.end..]);
    let at = |x: usize| (x as isize + shift) as usize;
    BatchRecord {
        src: r.src.clone(),
        tgt,
        story: r.story.clone(),
        sentence: r.sentence.clone(),
        spans: TupleSpans {
            subject: s.start..s.start + subject.len(),
            relation: at(r.spans.relation.start)..at(r.spans.relation.end),
            object: o_start..o_end,
        },
    }
}

/// Moves object spans across the batch along a derangement, so no record
/// keeps its own object. Every output is a negative for the discriminator.
pub fn confounder_shuffle(
    batch: &[BatchRecord],
    rng: &mut ChaCha8Rng,
    shuffle_subjects: bool,
) -> Confounded {
    let Some(objects) = derangement(batch.len(), rng) else {
        return Confounded {
            records: batch.to_vec(),
            objects: (0..batch.len()).collect(),
            subjects: None,
            skipped: true,
        };
    };
    let subjects = if shuffle_subjects {
        derangement(batch.len(), rng)
    } else {
        None
    };
    let records = batch
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let o = &batch[objects[i]];
            let s = subjects.as_ref().map_or(r, |p| &batch[p[i]]);
            splice(
                r,
                &s.tgt[s.spans.subject.clone()],
                &o.tgt[o.spans.object.clone()],
            )
        })
        .collect();
    Confounded {
        records,
        objects,
        subjects,
        skipped: false,
    }
}

/// Minibatch index lists for `epoch`; the last batch may be short.
pub fn batch_order(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 << 32 | epoch);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx.chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

fn mean_grads(per_item: Vec<Vec<Tensor>>) -> Vec<Tensor> {
    let n = per_item.len() as f64;
    let mut it = per_item.into_iter();
    let mut sum = it.next().expect("at least one item");
    for grads in it {
        for (s, g) in sum.iter_mut().zip(&grads) {
            s.add_assign(g);
        }
    }
    sum.into_iter().map(|t| t.scaled(1.0 / n)).collect()
}

/// Mean teacher-forced cross-entropy over `batch` and its gradient.
pub fn supervised_grads(
    g: &Generator,
    batch: &[&BatchRecord],
) -> Result<(f64, Vec<Tensor>), GanError> {
    let items: Vec<(f64, Vec<Tensor>)> = batch
        .par_iter()
        .map(|r| {
            let mut graph = Graph::new();
            let b = g.params.bind(&mut graph, true);
            let loss = g.ce_loss(&mut graph, &b, &r.src, &r.tgt)?;
            let grads = graph.backward(loss);
            Ok((graph.value(loss).item(), b.grads(&grads)))
        })
        .collect::<Result<_, NeuralError>>()?;
    let ce = items.iter().map(|(l, _)| l).sum::<f64>() / items.len() as f64;
    Ok((ce, mean_grads(items.into_iter().map(|(_, g)| g).collect())))
}

/// A discriminator training item.
pub enum DiscItem<'a> {
    Tokens {
        record: &'a BatchRecord,
        tokens: &'a [usize],
        label: f64,
    },
    Vectors {
        record: &'a BatchRecord,
        vectors: &'a Tensor,
        label: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepLog {
    pub step: u64,
    pub epoch: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_loss: Option<f64>,
    pub g_ce: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_adv: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roundtrip_acc: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub confounder_skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: u64,
    pub steps: usize,
    pub mean_ce: f64,
    pub mean_d_loss: Option<f64>,
    pub mean_adv: Option<f64>,
}

/// Greedy decode of one source: tokens and per-step softmaxes.
pub type Decoded = (Vec<usize>, SoftSequence);

pub struct GanTrainer {
    pub cfg: GanConfig,
    pub g: Generator,
    pub d: Discriminator,
    opt_g: Adam,
    opt_d: Adam,
    rng: ChaCha8Rng,
    step: u64,
}

impl GanTrainer {
    pub fn new(cfg: GanConfig, model: ModelConfig) -> Result<Self, GanError> {
        let g = Generator::new(model, cfg.seed)?;
        let d = Discriminator::new(model, cfg.seed.wrapping_add(1))?;
        GanTrainer::from_models(cfg, g, d)
    }

    pub fn from_models(cfg: GanConfig, g: Generator, d: Discriminator) -> Result<Self, GanError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        Ok(GanTrainer {
            opt_g: Adam::new(cfg.lr_g),
            opt_d: Adam::new(cfg.lr_d),
            cfg,
            g,
            d,
            rng,
            step: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn max_len(&self) -> usize {
        self.d.cfg.max_len
    }

    /// Greedy decodes for `batch`, in order.
    pub fn decode_batch(&self, batch: &[&BatchRecord]) -> Result<Vec<Decoded>, GanError> {
        let steps = self.cfg.max_decode.min(disc_assertion_cap(self.max_len()));
        Ok(batch
            .par_iter()
            .map(|r| self.g.greedy(&r.src, steps))
            .collect::<Result<_, _>>()?)
    }

    /// Mean binary cross-entropy over `items`, then one update of the
    /// discriminator only.
    pub fn discriminator_step(&mut self, items: &[DiscItem<'_>]) -> Result<f64, GanError> {
        let (d, max_len) = (&self.d, self.max_len());
        let results: Vec<(f64, Vec<Tensor>)> = items
            .par_iter()
            .map(|item| {
                let mut graph = Graph::new();
                let b = d.params.bind(&mut graph, true);
                let (z, label) = match item {
                    DiscItem::Tokens {
                        record,
                        tokens,
                        label,
                    } => {
                        let ctx = record.context(tokens.len(), max_len);
                        (
                            d.logit(&mut graph, &b, &ctx, AssertionInput::Tokens(tokens))?,
                            *label,
                        )
                    }
                    DiscItem::Vectors {
                        record,
                        vectors,
                        label,
                    } => {
                        let ctx = record.context(vectors.rows(), max_len);
                        let v = graph.constant((*vectors).clone());
                        (
                            d.logit(&mut graph, &b, &ctx, AssertionInput::Vectors(v))?,
                            *label,
                        )
                    }
                };
                let loss = graph.bce_with_logits(z, &[label]);
                let grads = graph.backward(loss);
                Ok((graph.value(loss).item(), b.grads(&grads)))
            })
            .collect::<Result<_, NeuralError>>()?;
        let loss = results.iter().map(|(l, _)| l).sum::<f64>() / results.len() as f64;
        if !loss.is_finite() {
            return Err(GanError::NonFinite("discriminator"));
        }
        let grads = mean_grads(results.into_iter().map(|(_, g)| g).collect());
        self.opt_d.step(&mut self.d.params, &grads);
        Ok(loss)
    }

    /// `lambda_ce * CE + lambda_adv * -log D(bridge(G))`, averaged over the
    /// batch, then one update of the generator only. `decoded` holds the
    /// greedy outputs the adversarial term re-scores; empty decodes add no
    /// adversarial term. Returns the mean CE and the mean adversarial loss.
    pub fn generator_step(
        &mut self,
        batch: &[&BatchRecord],
        decoded: Option<&[Vec<usize>]>,
    ) -> Result<(f64, Option<f64>), GanError> {
        let (g, d, cfg, max_len) = (&self.g, &self.d, &self.cfg, self.max_len());
        let adversarial = cfg.adversarial && decoded.is_some();
        let results: Vec<(f64, Option<f64>, Vec<Tensor>)> = batch
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let mut graph = Graph::new();
                let gb = g.params.bind(&mut graph, true);
                let enc = g.encode(&mut graph, &gb, &r.src)?;
                let mut prefix = vec![BOS];
                prefix.extend_from_slice(&r.tgt);
                let mut targets = r.tgt.clone();
                targets.push(EOS);
                let logits = g.decode(&mut graph, &gb, &enc, &prefix)?;
                let ce = graph.cross_entropy(logits, &targets);
                let mut loss = graph.scale(ce, cfg.lambda_ce);
                let mut adv_value = None;
                let y = decoded.map_or(&[][..], |dec| {
                    &dec[i][..dec[i].len().min(disc_assertion_cap(max_len))]
                });
                if adversarial && !y.is_empty() {
                    let mut prefix = vec![BOS];
                    prefix.extend_from_slice(&y[..y.len() - 1]);
                    let logits = g.decode(&mut graph, &gb, &enc, &prefix)?;
                    let db = d.params.bind(&mut graph, false);
                    let v = soft_embed_graph(&mut graph, logits, db.var("emb"), cfg.scale);
                    let ctx = r.context(y.len(), max_len);
                    let z = d.logit(&mut graph, &db, &ctx, AssertionInput::Vectors(v))?;
                    let adv = graph.bce_with_logits(z, &[1.0]);
                    adv_value = Some(graph.value(adv).item());
                    let weighted = graph.scale(adv, cfg.lambda_adv);
                    loss = graph.add(loss, weighted);
                }
                let grads = graph.backward(loss);
                Ok((graph.value(ce).item(), adv_value, gb.grads(&grads)))
            })
            .collect::<Result<_, NeuralError>>()?;
        let n = results.len() as f64;
        let ce = results.iter().map(|r| r.0).sum::<f64>() / n;
        let advs: Vec<f64> = results.iter().filter_map(|r| r.1).collect();
        let adv = (!advs.is_empty()).then(|| advs.iter().sum::<f64>() / advs.len() as f64);
        if !ce.is_finite() || adv.is_some_and(|a| !a.is_finite()) {
            return Err(GanError::NonFinite("generator"));
        }
        let grads = mean_grads(results.into_iter().map(|r| r.2).collect());
        self.opt_g.step(&mut self.g.params, &grads);
        Ok((ce, adv))
    }

    /// One discriminator step, then one generator step.
    pub fn train_batch(&mut self, batch: &[&BatchRecord], epoch: u64) -> Result<StepLog, GanError> {
        let decoded = if self.cfg.adversarial {
            Some(self.decode_batch(batch)?)
        } else {
            None
        };
        let fakes: Vec<Option<Tensor>> = match &decoded {
            Some(dec) => {
                let e = self.d.params.get("emb");
                dec.iter()
                    .map(|(y, soft)| {
                        (!y.is_empty())
                            .then(|| bridge_sequence(soft, e, self.cfg.scale))
                            .transpose()
                    })
                    .collect::<Result<_, _>>()?
            }
            None => Vec::new(),
        };
        let owned: Vec<BatchRecord> = batch.iter().map(|r| (*r).clone()).collect();
        let confounded = self
            .cfg
            .confounder
            .then(|| confounder_shuffle(&owned, &mut self.rng, self.cfg.shuffle_subjects));
        let skipped = confounded.as_ref().is_some_and(|c| c.skipped);

        let max_len = self.max_len();
        let mut items: Vec<DiscItem<'_>> = Vec::new();
        let negatives = confounded.as_ref().filter(|c| !c.skipped);
        if self.cfg.adversarial || negatives.is_some() {
            items.extend(batch.iter().map(|r| DiscItem::Tokens {
                record: r,
                tokens: r.disc_tokens(max_len),
                label: 1.0,
            }));
            for (r, f) in batch.iter().zip(&fakes) {
                if let Some(v) = f {
                    items.push(DiscItem::Vectors {
                        record: r,
                        vectors: v,
                        label: 0.0,
                    });
                }
            }
            if let Some(c) = negatives {
                items.extend(c.records.iter().map(|r| DiscItem::Tokens {
                    record: r,
                    tokens: r.disc_tokens(max_len),
                    label: 0.0,
                }));
            }
        }
        let d_loss = if items.is_empty() {
            None
        } else {
            Some(self.discriminator_step(&items)?)
        };

        let roundtrip_acc = match &decoded {
            Some(dec)
                if self.cfg.roundtrip_every > 0 && self.step.is_multiple_of(self.cfg.roundtrip_every) =>
            {
                let samples: Vec<Vec<f64>> = dec.iter().flat_map(|(_, s)| logits_of(s)).collect();
                if samples.is_empty() {
                    None
                } else {
                    Some(knn_roundtrip_accuracy(
                        self.d.params.get("emb"),
                        &samples,
                        self.cfg.scale,
                    )?)
                }
            }
            _ => None,
        };
        let tokens: Option<Vec<Vec<usize>>> =
            decoded.map(|d| d.into_iter().map(|(y, _)| y).collect());
        let (g_ce, g_adv) = self.generator_step(batch, tokens.as_deref())?;
        let log = StepLog {
            step: self.step,
            epoch,
            d_loss,
            g_ce,
            g_adv,
            roundtrip_acc,
            confounder_skipped: skipped,
        };
        self.step += 1;
        Ok(log)
    }

    /// One pass over `records` in the order given by [`batch_order`].
    pub fn run_epoch(
        &mut self,
        records: &[BatchRecord],
        epoch: u64,
        log: &mut dyn FnMut(&StepLog),
    ) -> Result<EpochSummary, GanError> {
        if records.is_empty() {
            return Err(GanError::EmptyDataset);
        }
        let mut logs = Vec::new();
        for idx in batch_order(records.len(), self.cfg.batch_size, self.cfg.seed, epoch) {
            let batch: Vec<&BatchRecord> = idx.iter().map(|&i| &records[i]).collect();
            let entry = self.train_batch(&batch, epoch)?;
            log(&entry);
            logs.push(entry);
        }
        let mean =
            |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        Ok(EpochSummary {
            epoch,
            steps: logs.len(),
            mean_ce: mean(logs.iter().map(|l| l.g_ce).collect()).unwrap_or(f64::NAN),
            mean_d_loss: mean(logs.iter().filter_map(|l| l.d_loss).collect()),
            mean_adv: mean(logs.iter().filter_map(|l| l.g_adv).collect()),
        })
    }

    /// `cfg.epochs` passes over `records`.
    pub fn train(
        &mut self,
        records: &[BatchRecord],
        log: &mut dyn FnMut(&StepLog),
    ) -> Result<Vec<EpochSummary>, GanError> {
        (0..self.cfg.epochs as u64)
            .map(|e| self.run_epoch(records, e, log))
            .collect()
    }
}

/// Discriminator verdict on a tokenized assertion in its story context.
pub fn score_tokens(
    d: &Discriminator,
    record: &BatchRecord,
    tokens: &[usize],
    threshold: f64,
) -> Result<(f64, bool), GanError> {
    let tokens = &tokens[..tokens.len().min(disc_assertion_cap(d.cfg.max_len))];
    let ctx = record.context(tokens.len(), d.cfg.max_len);
    let s = d.score(&ctx, tokens)?;
    Ok((s, s >= threshold))
}

/// Scores `assertion` against a story and its target sentence, with the
/// same context layout the discriminator trains on.
pub fn score_assertion(
    d: &Discriminator,
    vocab: &Vocabulary,
    story: &str,
    sentence: &str,
    assertion: &str,
    threshold: f64,
) -> Result<(f64, bool), GanError> {
    let mut tokens = vocab.tokenize(assertion);
    tokens.truncate(disc_assertion_cap(d.cfg.max_len));
    let ctx = disc_context(
        &vocab.tokenize(story),
        &vocab.tokenize(sentence),
        tokens.len(),
        d.cfg.max_len,
    );
    let s = d.score(&ctx, &tokens)?;
    Ok((s, s >= threshold))
}

/// Drops structural symbols, for metric computation on decoded text.
pub fn strip_symbols(text: &str) -> String {
    split_tokens(text)
        .into_iter()
        .filter(|t| !is_symbol(t))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whether two parameter sets hold bitwise-identical values.
pub fn same_bits(a: &ParamSet, b: &ParamSet) -> bool {
    a.bits() == b.bits()
}

/// Vocabulary size of the gradient-check model.
pub const GRADCHECK_VOCAB: usize = 50;

/// Finite-difference checks on the micro model (V=50, d=16, one layer) of
/// every loss path: generator cross-entropy, discriminator BCE on tokens,
/// generator logits through the bridge into the discriminator, and the
/// bridged input itself as logits and as vectors.
pub fn gradient_suite(seed: u64, cfg: GradcheckConfig) -> Result<Vec<GradcheckReport>, GanError> {
    use rand::Rng;

    let model = ModelConfig::micro(GRADCHECK_VOCAB);
    let mut g = Generator::new(model, seed)?;
    let mut d = Discriminator::new(model, seed.wrapping_add(1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = |n: usize| -> Vec<usize> {
        (0..n)
            .map(|_| rng.random_range(6..GRADCHECK_VOCAB))
            .collect()
    };
    let (src, tgt, story, sentence, assertion) = (ids(6), ids(4), ids(5), ids(3), ids(4));
    let ctx = disc_context(&story, &sentence, tgt.len(), model.max_len);
    let mut reports = Vec::new();

    let (gm, dm) = (g.clone(), d.clone());
    reports.push(gradcheck(
        "generator cross-entropy",
        &mut [CheckedSet {
            label: "g",
            params: &mut g.params,
            trainable: true,
        }],
        |graph, b| gm.ce_loss(graph, &b[0], &src, &tgt),
        cfg,
    )?);
    reports.push(gradcheck(
        "discriminator bce",
        &mut [CheckedSet {
            label: "d",
            params: &mut d.params,
            trainable: true,
        }],
        |graph, b| {
            let z = dm.logit(graph, &b[0], &ctx, AssertionInput::Tokens(&assertion))?;
            Ok(graph.bce_with_logits(z, &[1.0]))
        },
        cfg,
    )?);

    let mut prefix = vec![BOS];
    prefix.extend_from_slice(&tgt[..tgt.len() - 1]);
    let adversarial =
        |graph: &mut Graph, gb: &crate::neural::Bound<'_>, db: &crate::neural::Bound<'_>| {
            let enc = gm.encode(graph, gb, &src)?;
            let logits = gm.decode(graph, gb, &enc, &prefix)?;
            let v = soft_embed_graph(graph, logits, db.var("emb"), 1.0);
            let z = dm.logit(graph, db, &ctx, AssertionInput::Vectors(v))?;
            Ok::<_, NeuralError>(graph.bce_with_logits(z, &[1.0]))
        };
    reports.push(gradcheck(
        "adversarial path",
        &mut [
            CheckedSet {
                label: "g",
                params: &mut g.params,
                trainable: true,
            },
            CheckedSet {
                label: "d",
                params: &mut d.params,
                trainable: true,
            },
        ],
        |graph, b| adversarial(graph, &b[0], &b[1]),
        cfg,
    )?);

    let mut logits = ParamSet::default();
    logits.push(
        "logits",
        Tensor::from_vec(
            4,
            GRADCHECK_VOCAB,
            (0..4 * GRADCHECK_VOCAB)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect(),
        ),
    );
    reports.push(gradcheck(
        "bridged logits",
        &mut [
            CheckedSet {
                label: "bridge",
                params: &mut logits,
                trainable: true,
            },
            CheckedSet {
                label: "d",
                params: &mut d.params,
                trainable: false,
            },
        ],
        |graph, b| {
            let v = soft_embed_graph(graph, b[0].var("logits"), b[1].var("emb"), 1.0);
            let z = dm.logit(graph, &b[1], &ctx, AssertionInput::Vectors(v))?;
            Ok(graph.bce_with_logits(z, &[0.0]))
        },
        cfg,
    )?);

    let mut vectors = ParamSet::default();
    vectors.push(
        "vectors",
        Tensor::from_vec(
            4,
            model.d_model,
            (0..4 * model.d_model)
                .map(|_| rng.random_range(-0.5..0.5))
                .collect(),
        ),
    );
    reports.push(gradcheck(
        "bridged vectors",
        &mut [
            CheckedSet {
                label: "bridge",
                params: &mut vectors,
                trainable: true,
            },
            CheckedSet {
                label: "d",
                params: &mut d.params,
                trainable: false,
            },
        ],
        |graph, b| {
            let z = dm.logit(
                graph,
                &b[1],
                &ctx,
                AssertionInput::Vectors(b[0].var("vectors")),
            )?;
            Ok(graph.bce_with_logits(z, &[0.0]))
        },
        cfg,
    )?);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(subject: &[usize], object: &[usize]) -> BatchRecord {
        let mut tgt = subject.to_vec();
        tgt.push(90);
        let o = tgt.len();
        tgt.extend_from_slice(object);
        BatchRecord {
            src: vec![7],
            tgt: tgt.clone(),
            story: vec![8],
            sentence: vec![9],
            spans: TupleSpans {
                subject: 0..subject.len(),
                relation: subject.len()..o,
                object: o..tgt.len(),
            },
        }
    }

    #[test]
    fn joint_spans_follow_symbols() {
        let toks =
            split_tokens("<general> <subject> a team <relation> capable of <object> winning");
        let s = tuple_spans(Format::Joint, &toks).unwrap();
        assert_eq!((s.subject, s.relation, s.object), (2..4, 5..7, 8..9));
        assert!(tuple_spans(Format::Joint, &split_tokens("<subject> x")).is_none());
    }

    #[test]
    fn glucose_spans_cover_the_specific_half() {
        let toks = split_tokens("Tom >Causes> a walk ** Someone_A >Causes> a walk");
        let s = tuple_spans(Format::Glucose, &toks).unwrap();
        assert_eq!((s.subject, s.relation, s.object), (0..1, 2..3, 4..6));
    }

    #[test]
    fn pair_swaps_objects() {
        let batch = vec![record(&[10], &[20, 21]), record(&[11, 12], &[22])];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = confounder_shuffle(&batch, &mut rng, false);
        assert_eq!(c.objects, vec![1, 0]);
        assert_eq!(c.records[0].tgt, vec![10, 90, 22]);
        assert_eq!(c.records[1].tgt, vec![11, 12, 90, 20, 21]);
        assert_eq!(c.records[1].spans.object, 3..5);
    }

    #[test]
    fn single_record_is_skipped() {
        let batch = vec![record(&[10], &[20])];
        let c = confounder_shuffle(&batch, &mut ChaCha8Rng::seed_from_u64(0), false);
        assert!(c.skipped);
        assert_eq!(c.records, batch);
    }

    #[test]
    fn subjects_shuffle_independently() {
        let batch: Vec<BatchRecord> = (0..4).map(|i| record(&[10 + i], &[20 + i, 30])).collect();
        let c = confounder_shuffle(&batch, &mut ChaCha8Rng::seed_from_u64(5), true);
        let p = c.subjects.unwrap();
        for (i, r) in c.records.iter().enumerate() {
            assert_eq!(r.tgt[r.spans.subject.clone()], [10 + p[i]]);
            assert_eq!(r.tgt[r.spans.relation.clone()], [90]);
            assert_eq!(r.tgt[r.spans.object.clone()], [20 + c.objects[i], 30]);
        }
    }

    #[test]
    fn batches_partition_the_data() {
        let order = batch_order(10, 4, 3, 0);
        assert_eq!(
            order.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![4, 4, 2]
        );
        let mut all: Vec<usize> = order.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_ne!(batch_order(10, 4, 3, 1), order);
    }

    #[test]
    fn config_validation() {
        assert!(GanConfig::default().validate().is_ok());
        assert!(GanConfig {
            score_threshold: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GanConfig {
            lambda_adv: -0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        let parsed: GanConfig = serde_json::from_str(r#"{"batch_size": 8}"#).unwrap();
        assert_eq!(parsed.batch_size, 8);
        assert!(serde_json::from_str::<GanConfig>(r#"{"batch": 8}"#).is_err());
    }

    proptest! {
        #[test]
        fn derangements_have_no_fixed_points(seed in any::<u64>(), n in 2usize..17) {
            let batch: Vec<BatchRecord> = (0..n).map(|i| record(&[i], &[100 + i % 3, i])).collect();
            let c = confounder_shuffle(&batch, &mut ChaCha8Rng::seed_from_u64(seed), false);
            prop_assert!(c.objects.iter().enumerate().all(|(i, &j)| i != j));
            let mut before: Vec<Vec<usize>> = batch.iter().map(|r| r.tgt[r.spans.object.clone()].to_vec()).collect();
            let mut after: Vec<Vec<usize>> = c.records.iter().map(|r| r.tgt[r.spans.object.clone()].to_vec()).collect();
            before.sort();
            after.sort();
            prop_assert_eq!(before, after);
            for (r, b) in c.records.iter().zip(&batch) {
                prop_assert_eq!(&r.tgt[r.spans.subject.clone()], &b.tgt[b.spans.subject.clone()]);
            }
        }
    }
}
