use super::model::ParamSet;
use super::tensor::Tensor;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of `params` from `grads`, given in parameter order.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) {
        assert_eq!(
            params.len(),
            grads.len(),
            "one gradient per parameter tensor"
        );
        if self.m.is_empty() {
            self.m = params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.tensors_mut().iter_mut().enumerate() {
            let (m, v, g) = (self.m[i].data_mut(), self.v[i].data_mut(), grads[i].data());
            for (j, x) in p.data_mut().iter_mut().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                *x -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_the_gradient() {
        let mut ps = ParamSet::default();
        ps.push("w", Tensor::from_vec(1, 2, vec![1.0, -1.0]));
        let mut opt = Adam::new(0.1);
        opt.step(&mut ps, &[Tensor::from_vec(1, 2, vec![3.0, -0.5])]);
        let w = ps.get("w").data();
        assert!((w[0] - 0.9).abs() < 1e-6 && (w[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut ps = ParamSet::default();
        ps.push("w", Tensor::from_vec(1, 1, vec![5.0]));
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let g = Tensor::scalar(2.0 * ps.get("w").item());
            opt.step(&mut ps, &[g]);
        }
        assert!(ps.get("w").item().abs() < 1e-2);
    }
}
