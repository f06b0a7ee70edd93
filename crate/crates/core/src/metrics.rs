//! Corpus BLEU-4, ROUGE-1/2/L/Lsum and discriminator accuracy, all on the
//! crate's word tokenizer with structural symbols removed.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversarial::{score_assertion, GanError};
use crate::neural::{is_symbol, split_tokens, Discriminator, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{preds} predictions for {refs} references")]
    LengthMismatch { preds: usize, refs: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error(transparent)]
    Gan(#[from] GanError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    #[serde(rename = "rougeLsum")]
    pub rouge_lsum: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disc_accuracy: Option<f64>,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rouge {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub rouge_lsum: f64,
}

pub fn metric_tokens(text: &str) -> Vec<&str> {
    split_tokens(text)
        .into_iter()
        .filter(|t| !is_symbol(t))
        .collect()
}

fn ngrams<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

fn overlap(pred: &HashMap<&[&str], usize>, reference: &HashMap<&[&str], usize>) -> usize {
    pred.iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

fn check_lengths(preds: &[String], refs: &[String]) -> Result<(), MetricsError> {
    if preds.len() != refs.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            refs: refs.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Corpus BLEU-4 in [0, 100]: clipped n-gram precisions pooled over the
/// corpus, add-one smoothing for orders 2 to 4, brevity penalty.
pub fn bleu(preds: &[String], refs: &[String]) -> Result<f64, MetricsError> {
    check_lengths(preds, refs)?;
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (p, rf) in preds.iter().zip(refs) {
        let (pt, rt) = (metric_tokens(p), metric_tokens(rf));
        c += pt.len();
        r += rt.len();
        for n in 1..=4 {
            let pg = ngrams(&pt, n);
            matches[n - 1] += overlap(&pg, &ngrams(&rt, n));
            totals[n - 1] += pt.len().saturating_sub(n - 1);
        }
    }
    if matches[0] == 0 || c == 0 {
        return Ok(0.0);
    }
    let mut log_p = (matches[0] as f64 / totals[0] as f64).ln();
    for n in 1..4 {
        log_p += ((matches[n] + 1) as f64 / (totals[n] + 1) as f64).ln();
    }
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    Ok(100.0 * bp * (log_p / 4.0).exp())
}

fn f1(hits: usize, pred_len: usize, ref_len: usize) -> f64 {
    if pred_len == 0 && ref_len == 0 {
        return 1.0;
    }
    if hits == 0 {
        return 0.0;
    }
    let p = hits as f64 / pred_len as f64;
    let r = hits as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

fn rouge_n(pred: &[&str], reference: &[&str], n: usize) -> f64 {
    let (pg, rg) = (ngrams(pred, n), ngrams(reference, n));
    f1(
        overlap(&pg, &rg),
        pred.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

fn lcs_table(a: &[&str], b: &[&str]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t
}

/// Positions in `reference` on one longest common subsequence with `pred`.
fn lcs_positions(reference: &[&str], pred: &[&str]) -> Vec<usize> {
    let t = lcs_table(reference, pred);
    let (mut i, mut j) = (reference.len(), pred.len());
    let mut out = Vec::new();
    while i > 0 && j > 0 {
        if reference[i - 1] == pred[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if t[i - 1][j] >= t[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out
}

fn rouge_l(pred: &[&str], reference: &[&str]) -> f64 {
    let lcs = lcs_table(pred, reference)[pred.len()][reference.len()];
    f1(lcs, pred.len(), reference.len())
}

fn sentences(s: &str) -> Vec<Vec<&str>> {
    s.lines()
        .map(metric_tokens)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Summary-level LCS over newline-separated sentences: the union of LCS hits
/// of each reference sentence against every predicted sentence, clipped by
/// token counts.
fn rouge_lsum(pred: &str, reference: &str) -> f64 {
    let (ps, rs) = (sentences(pred), sentences(reference));
    let m: usize = rs.iter().map(Vec::len).sum();
    let n: usize = ps.iter().map(Vec::len).sum();
    let mut pred_counts: HashMap<&str, usize> = HashMap::new();
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in ps.iter().flatten() {
        *pred_counts.entry(t).or_insert(0) += 1;
    }
    for t in rs.iter().flatten() {
        *ref_counts.entry(t).or_insert(0) += 1;
    }
    let mut hits = 0;
    for r in &rs {
        let union: BTreeSet<usize> = ps.iter().flat_map(|p| lcs_positions(r, p)).collect();
        for i in union {
            let t = r[i];
            let (pc, rc) = (pred_counts.get_mut(t), ref_counts.get_mut(t));
            if let (Some(pc), Some(rc)) = (pc, rc) {
                if *pc > 0 && *rc > 0 {
                    hits += 1;
                    *pc -= 1;
                    *rc -= 1;
                }
            }
        }
    }
    f1(hits, n, m)
}

/// Mean F1 ROUGE scores in [0, 100]. Texts without n-grams of an order on
/// both sides count as a full match for that order.
pub fn rouge(preds: &[String], refs: &[String]) -> Result<Rouge, MetricsError> {
    check_lengths(preds, refs)?;
    let per_pair: Vec<[f64; 4]> = preds
        .par_iter()
        .zip(refs)
        .map(|(p, r)| {
            let (pt, rt) = (metric_tokens(p), metric_tokens(r));
            [
                rouge_n(&pt, &rt, 1),
                rouge_n(&pt, &rt, 2),
                rouge_l(&pt, &rt),
                rouge_lsum(p, r),
            ]
        })
        .collect();
    let n = per_pair.len() as f64;
    let mean = |k: usize| 100.0 * per_pair.iter().map(|s| s[k]).sum::<f64>() / n;
    Ok(Rouge {
        rouge1: mean(0),
        rouge2: mean(1),
        rouge_l: mean(2),
        rouge_lsum: mean(3),
    })
}

/// A gold-labeled assertion in its story context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledAssertion {
    pub story: String,
    pub sentence: String,
    pub assertion: String,
    pub gold: bool,
}

/// Fraction of items whose thresholded discriminator label equals gold.
pub fn disc_accuracy(
    d: &Discriminator,
    vocab: &Vocabulary,
    items: &[LabeledAssertion],
    threshold: f64,
) -> Result<f64, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = items
        .par_iter()
        .map(|it| {
            Ok(
                score_assertion(d, vocab, &it.story, &it.sentence, &it.assertion, threshold)?.1
                    == it.gold,
            )
        })
        .collect::<Result<Vec<bool>, GanError>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / items.len() as f64)
}

pub fn evaluate(
    preds: &[String],
    refs: &[String],
    disc_accuracy: Option<f64>,
) -> Result<EvalReport, MetricsError> {
    let r = rouge(preds, refs)?;
    Ok(EvalReport {
        bleu: bleu(preds, refs)?,
        rouge1: r.rouge1,
        rouge2: r.rouge2,
        rouge_l: r.rouge_l,
        rouge_lsum: r.rouge_lsum,
        disc_accuracy,
        n: preds.len(),
    })
}
