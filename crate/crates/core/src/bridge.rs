//! Soft-argmax bridge from generator softmaxes into the discriminator's
//! embedding space: `softmax(scale * logits) . E`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::neural::{argmax, softmax, Graph, SoftSequence, Tensor, Var};

/// Scales reported by the diagnostic sweep.
pub const SWEEP_SCALES: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 100.0];

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("logit vector of length {found} for an embedding matrix of {expected} rows")]
    DimMismatch { expected: usize, found: usize },
    #[error("non-finite logits")]
    NonFinite,
    #[error("scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("no samples")]
    NoSamples,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BridgeConfig {
    pub scale: f64,
    pub validate_k: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            scale: 1.0,
            validate_k: 1,
        }
    }
}

fn check_scale(scale: f64) -> Result<(), BridgeError> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(BridgeError::Scale(scale))
    }
}

fn mix(p: &[f64], e: &Tensor) -> Vec<f64> {
    let mut out = vec![0.0; e.cols()];
    for (i, &w) in p.iter().enumerate() {
        if w != 0.0 {
            for (o, x) in out.iter_mut().zip(e.row(i)) {
                *o += w * x;
            }
        }
    }
    out
}

/// `softmax(scale * logits) . E` for one step.
pub fn soft_embed(logits: &[f64], e: &Tensor, scale: f64) -> Result<Vec<f64>, BridgeError> {
    check_scale(scale)?;
    if logits.len() != e.rows() {
        return Err(BridgeError::DimMismatch {
            expected: e.rows(),
            found: logits.len(),
        });
    }
    if !logits.iter().all(|x| x.is_finite()) {
        return Err(BridgeError::NonFinite);
    }
    let scaled: Vec<f64> = logits.iter().map(|x| x * scale).collect();
    Ok(mix(&softmax(&scaled), e))
}

/// Taped bridge: `T x V` logits to `T x d` vectors. Gradients reach both
/// `logits` and `e`.
pub fn soft_embed_graph(g: &mut Graph, logits: Var, e: Var, scale: f64) -> Var {
    let z = g.scale(logits, scale);
    let p = g.softmax(z, None);
    g.matmul(p, e)
}

/// Bridges every step of a decoded sequence. The stored probabilities are
/// rescaled as `p^scale / sum(p^scale)`, which equals `softmax(scale * logits)`.
pub fn bridge_sequence(soft: &SoftSequence, e: &Tensor, scale: f64) -> Result<Tensor, BridgeError> {
    check_scale(scale)?;
    let mut data = Vec::with_capacity(soft.len() * e.cols());
    for p in &soft.steps {
        if p.len() != e.rows() {
            return Err(BridgeError::DimMismatch {
                expected: e.rows(),
                found: p.len(),
            });
        }
        if !p.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(BridgeError::NonFinite);
        }
        let q: Vec<f64> = if scale == 1.0 {
            p.clone()
        } else {
            let logs: Vec<f64> = p
                .iter()
                .map(|&x| {
                    if x > 0.0 {
                        scale * x.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            softmax(&logs)
        };
        data.extend(mix(&q, e));
    }
    Ok(Tensor::from_vec(soft.len(), e.cols(), data))
}

/// Index of the row of `e` nearest to `v` in Euclidean distance; lowest index on ties.
pub fn nearest_row(e: &Tensor, v: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for r in 0..e.rows() {
        let d: f64 = e.row(r).iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (r, d);
        }
    }
    best.0
}

/// Fraction of samples whose bridged vector has an argmax token as its
/// nearest embedding row. Tied maxima all count as correct.
pub fn knn_roundtrip_accuracy(
    e: &Tensor,
    samples: &[Vec<f64>],
    scale: f64,
) -> Result<f64, BridgeError> {
    if samples.is_empty() {
        return Err(BridgeError::NoSamples);
    }
    let hits: Vec<bool> = samples
        .par_iter()
        .map(|logits| {
            let v = soft_embed(logits, e, scale)?;
            let best = logits[argmax(logits)];
            Ok(logits[nearest_row(e, &v)] == best)
        })
        .collect::<Result<_, BridgeError>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

/// Euclidean distance from the bridged vector to the argmax token's row.
pub fn argmax_distance(logits: &[f64], e: &Tensor, scale: f64) -> Result<f64, BridgeError> {
    let v = soft_embed(logits, e, scale)?;
    let row = e.row(argmax(logits));
    Ok(v.iter()
        .zip(row)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Log-probabilities of decoded softmax steps, usable as logits.
pub fn logits_of(soft: &SoftSequence) -> Vec<Vec<f64>> {
    soft.steps
        .iter()
        .map(|p| p.iter().map(|&x| x.max(f64::MIN_POSITIVE).ln()).collect())
        .collect()
}

/// Round-trip accuracy at each scale, keyed by the scale's decimal form.
pub fn scale_sweep(
    e: &Tensor,
    samples: &[Vec<f64>],
    scales: &[f64],
) -> Result<BTreeMap<String, f64>, BridgeError> {
    scales
        .iter()
        .map(|&s| Ok((format!("{s}"), knn_roundtrip_accuracy(e, samples, s)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Graph, Tensor};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
    }

    #[test]
    fn dominant_logit_selects_its_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = random(6, 4, &mut rng);
        let mut logits = vec![0.0; 6];
        logits[4] = 1e6;
        let v = soft_embed(&logits, &e, 1.0).unwrap();
        for (a, b) in v.iter().zip(e.row(4)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_pair_is_the_midpoint() {
        let e = Tensor::from_rows(&[vec![1.0, -2.0, 0.5], vec![3.0, 4.0, -0.5]]);
        let v = soft_embed(&[0.3, 0.3], &e, 7.0).unwrap();
        assert_eq!(v, vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let e = Tensor::zeros(3, 2);
        assert!(matches!(
            soft_embed(&[0.0; 2], &e, 1.0),
            Err(BridgeError::DimMismatch { .. })
        ));
        assert!(matches!(
            soft_embed(&[0.0, f64::NAN, 0.0], &e, 1.0),
            Err(BridgeError::NonFinite)
        ));
        assert!(matches!(
            soft_embed(&[0.0; 3], &e, 0.0),
            Err(BridgeError::Scale(_))
        ));
        assert!(matches!(
            knn_roundtrip_accuracy(&e, &[], 1.0),
            Err(BridgeError::NoSamples)
        ));
    }

    #[test]
    fn sequence_matches_per_step_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = random(5, 3, &mut rng);
        let logits: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let soft = SoftSequence {
            steps: logits.iter().map(|l| softmax(l)).collect(),
        };
        for scale in [1.0, 3.0] {
            let b = bridge_sequence(&soft, &e, scale).unwrap();
            assert_eq!(b.rows(), 3);
            for (t, l) in logits.iter().enumerate() {
                let v = soft_embed(l, &e, scale).unwrap();
                for (a, x) in b.row(t).iter().zip(&v) {
                    assert!((a - x).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn graph_version_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random(5, 3, &mut rng);
        let l = random(2, 5, &mut rng);
        let mut g = Graph::new();
        let (lv, ev) = (g.constant(l.clone()), g.constant(e.clone()));
        let out = soft_embed_graph(&mut g, lv, ev, 2.0);
        for t in 0..2 {
            let v = soft_embed(l.row(t), &e, 2.0).unwrap();
            for (a, b) in g.value(out).row(t).iter().zip(&v) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ties_count_when_any_tied_token_is_returned() {
        let e = Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]]);
        // 1 and 2 tie; the mix lands on row 0, which is not an argmax.
        assert_eq!(
            knn_roundtrip_accuracy(&e, &[vec![-50.0, 5.0, 5.0]], 1.0).unwrap(),
            0.0
        );
        let e = Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(
            knn_roundtrip_accuracy(&e, &[vec![-50.0, 5.0, 5.0]], 1.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn single_draws_need_not_approach_monotonically() {
        // Rows 1 and 2 pull in opposite directions; their mass difference
        // grows from scale 1 to 2 before vanishing.
        let e = Tensor::from_rows(&[vec![0.0], vec![1.0], vec![-1.0]]);
        let l = [1.0, 0.9, 0.0];
        let d: Vec<f64> = SWEEP_SCALES
            .iter()
            .map(|&s| argmax_distance(&l, &e, s).unwrap())
            .collect();
        assert!(d[1] > d[0]);
        assert!(d[4] < 1e-4);
    }

    proptest! {
        #[test]
        fn output_lies_in_the_row_box(seed in any::<u64>(), scale in 0.1f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random(7, 4, &mut rng);
            let logits: Vec<f64> = (0..7).map(|_| rng.random_range(-5.0..5.0)).collect();
            let v = soft_embed(&logits, &e, scale).unwrap();
            for c in 0..4 {
                let col: Vec<f64> = (0..7).map(|r| e.get(r, c)).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v[c] >= lo - 1e-12 && v[c] <= hi + 1e-12);
            }
        }
    }
}
