//! Greedy and beam decoding over any next-token scorer.

use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::model::{Bound, Encoded, Generator};
use super::tensor::{argmax, softmax};
use super::vocab::{BOS, EOS};
use super::NeuralError;

/// Per-step probability vectors over the vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SoftSequence {
    pub steps: Vec<Vec<f64>>,
}

impl SoftSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Each step non-negative and summing to one within `tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.steps
            .iter()
            .all(|p| p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= tol)
    }

    pub fn argmaxes(&self) -> Vec<usize> {
        self.steps.iter().map(|p| argmax(p)).collect()
    }
}

/// Produces next-token logits for a decoder prefix starting with `<bos>`.
pub trait StepScorer {
    fn next_logits(&mut self, prefix: &[usize]) -> Result<Vec<f64>, NeuralError>;
}

/// A generator with its source already encoded.
pub struct GeneratorScorer<'a> {
    generator: &'a Generator,
    graph: Graph,
    bound: Bound<'a>,
    enc: Encoded,
    mark: usize,
}

impl<'a> GeneratorScorer<'a> {
    pub fn new(generator: &'a Generator, src: &[usize]) -> Result<Self, NeuralError> {
        let mut graph = Graph::new();
        let bound = generator.params.bind(&mut graph, false);
        let enc = generator.encode(&mut graph, &bound, src)?;
        let mark = graph.len();
        Ok(GeneratorScorer {
            generator,
            graph,
            bound,
            enc,
            mark,
        })
    }
}

impl StepScorer for GeneratorScorer<'_> {
    fn next_logits(&mut self, prefix: &[usize]) -> Result<Vec<f64>, NeuralError> {
        let logits = self
            .generator
            .decode(&mut self.graph, &self.bound, &self.enc, prefix)?;
        let t = self.graph.value(logits);
        let last = t.row(t.rows() - 1).to_vec();
        self.graph.truncate(self.mark);
        Ok(last)
    }
}

/// Argmax at every step until `<eos>` or `max_steps` tokens. The `<eos>` step
/// is not part of the output.
pub fn decode_greedy(
    scorer: &mut dyn StepScorer,
    max_steps: usize,
) -> Result<(Vec<usize>, SoftSequence), NeuralError> {
    let mut prefix = vec![BOS];
    let mut soft = SoftSequence::default();
    while prefix.len() <= max_steps {
        let p = softmax(&scorer.next_logits(&prefix)?);
        let t = argmax(&p);
        if t == EOS {
            break;
        }
        prefix.push(t);
        soft.steps.push(p);
    }
    Ok((prefix[1..].to_vec(), soft))
}

#[derive(Clone)]
struct Hypothesis {
    tokens: Vec<usize>,
    log_prob: f64,
    steps: Vec<Vec<f64>>,
    ended: bool,
}

impl Hypothesis {
    /// Log-probability per scored step, the `<eos>` step included.
    fn score(&self) -> f64 {
        let len = self.tokens.len() + usize::from(self.ended);
        self.log_prob / len.max(1) as f64
    }
}

/// Length-normalized beam search. Each step keeps the `width` best
/// continuations by cumulative log-probability; those ending in `<eos>`
/// retire. The winner maximizes log-probability divided by length, and its
/// per-step softmax vectors form the returned sequence.
pub fn decode_beam(
    scorer: &mut dyn StepScorer,
    width: usize,
    max_steps: usize,
) -> Result<(Vec<usize>, SoftSequence), NeuralError> {
    if width == 0 {
        return Err(NeuralError::Config("beam width must be at least 1".into()));
    }
    let mut alive = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        steps: Vec::new(),
        ended: false,
    }];
    let mut done: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_steps {
        let mut candidates: Vec<Hypothesis> = Vec::new();
        for h in &alive {
            let mut prefix = vec![BOS];
            prefix.extend_from_slice(&h.tokens);
            let p = softmax(&scorer.next_logits(&prefix)?);
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
            for &t in order.iter().take(width) {
                let mut next = h.clone();
                next.log_prob += p[t].ln();
                if t == EOS {
                    next.ended = true;
                } else {
                    next.tokens.push(t);
                    next.steps.push(p.clone());
                }
                candidates.push(next);
            }
        }
        // Stable sort keeps beam order, then token order, on equal scores.
        candidates.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
        alive.clear();
        for h in candidates.into_iter().take(width) {
            if h.ended {
                done.push(h);
            } else {
                alive.push(h);
            }
        }
        if alive.is_empty() {
            break;
        }
    }
    done.extend(alive);
    let best = done
        .into_iter()
        .reduce(|best, h| if h.score() > best.score() { h } else { best })
        .expect("at least one hypothesis");
    Ok((best.tokens, SoftSequence { steps: best.steps }))
}

impl Generator {
    pub fn greedy(
        &self,
        src: &[usize],
        max_steps: usize,
    ) -> Result<(Vec<usize>, SoftSequence), NeuralError> {
        let max_steps = max_steps.min(self.cfg.max_len - 1);
        decode_greedy(&mut GeneratorScorer::new(self, src)?, max_steps)
    }

    pub fn beam(
        &self,
        src: &[usize],
        width: usize,
        max_steps: usize,
    ) -> Result<(Vec<usize>, SoftSequence), NeuralError> {
        let max_steps = max_steps.min(self.cfg.max_len - 1);
        decode_beam(&mut GeneratorScorer::new(self, src)?, width, max_steps)
    }
}
