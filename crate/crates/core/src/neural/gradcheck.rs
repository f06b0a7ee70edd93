//! Central finite-difference checks of taped gradients.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::graph::{Graph, Var};
use super::model::{Bound, ParamSet};
use super::NeuralError;

/// Relative errors are measured against `max(|analytic|, |numeric|, floor)`.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct GradcheckConfig {
    pub eps: f64,
    /// Coordinates probed per tensor; `None` probes all of them.
    pub per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            eps: 1e-4,
            per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub label: String,
    pub tensors: Vec<TensorCheck>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }
}

/// A parameter set and whether its gradients are checked.
pub struct CheckedSet<'a> {
    pub label: &'a str,
    pub params: &'a mut ParamSet,
    pub trainable: bool,
}

fn evaluate<F>(
    sets: &[CheckedSet<'_>],
    loss: &F,
    want_grads: bool,
) -> Result<(f64, Vec<Vec<super::Tensor>>), NeuralError>
where
    F: Fn(&mut Graph, &[Bound<'_>]) -> Result<Var, NeuralError>,
{
    let mut g = Graph::new();
    let bound: Vec<Bound<'_>> = sets
        .iter()
        .map(|s| s.params.bind(&mut g, s.trainable && want_grads))
        .collect();
    let l = loss(&mut g, &bound)?;
    let value = g.value(l).item();
    if !want_grads {
        return Ok((value, Vec::new()));
    }
    let grads = g.backward(l);
    Ok((value, bound.iter().map(|b| b.grads(&grads)).collect()))
}

/// Compares backprop against `(L(x+eps) - L(x-eps)) / 2eps` for trainable sets.
pub fn gradcheck<F>(
    label: &str,
    sets: &mut [CheckedSet<'_>],
    loss: F,
    cfg: GradcheckConfig,
) -> Result<GradcheckReport, NeuralError>
where
    F: Fn(&mut Graph, &[Bound<'_>]) -> Result<Var, NeuralError>,
{
    let (_, analytic) = evaluate(sets, &loss, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tensors = Vec::new();
    for s in 0..sets.len() {
        if !sets[s].trainable {
            continue;
        }
        for t in 0..sets[s].params.len() {
            let len = sets[s].params.tensors()[t].len();
            let coords: Vec<usize> = match cfg.per_tensor {
                Some(n) if n < len => index::sample(&mut rng, len, n).into_vec(),
                _ => (0..len).collect(),
            };
            let mut check = TensorCheck {
                name: format!("{}.{}", sets[s].label, sets[s].params.names()[t]),
                checked: coords.len(),
                max_rel_error: 0.0,
                max_abs_error: 0.0,
            };
            for i in coords {
                let orig = sets[s].params.tensors()[t].data()[i];
                sets[s].params.tensors_mut()[t].data_mut()[i] = orig + cfg.eps;
                let plus = evaluate(sets, &loss, false)?.0;
                sets[s].params.tensors_mut()[t].data_mut()[i] = orig - cfg.eps;
                let minus = evaluate(sets, &loss, false)?.0;
                sets[s].params.tensors_mut()[t].data_mut()[i] = orig;
                let numeric = (plus - minus) / (2.0 * cfg.eps);
                let a = analytic[s][t].data()[i];
                let abs = (a - numeric).abs();
                check.max_abs_error = check.max_abs_error.max(abs);
                check.max_rel_error = check
                    .max_rel_error
                    .max(abs / a.abs().max(numeric.abs()).max(REL_FLOOR));
            }
            tensors.push(check);
        }
    }
    Ok(GradcheckReport {
        label: label.to_string(),
        tensors,
    })
}
