use super::mlp::PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    AdamW,
    /// Plain gradient descent (with the same decoupled decay).
    Sgd,
}

pub trait Optimizer {
    fn step(&mut self, params: &mut PolicyParams, grad: &PolicyParams);
}

/// Adam with decoupled weight decay. Decay multiplies the weights by
/// `1 - lr·wd` before the moment update and never enters the moments.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    t: i32,
    m: PolicyParams,
    v: PolicyParams,
}

impl AdamW {
    pub fn new(shape: &PolicyParams, lr: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        let zeros = PolicyParams::zeros(shape.input_dim, shape.hidden, shape.arms);
        Self {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

impl Optimizer for AdamW {
    fn step(&mut self, params: &mut PolicyParams, grad: &PolicyParams) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let bias1 = 1.0 - b1.powi(self.t);
        let bias2 = 1.0 - b2.powi(self.t);
        let decay = 1.0 - self.lr * self.weight_decay;
        let (lr, eps) = (self.lr, self.eps);

        self.m.zip_apply(grad, |m, g| *m = b1 * *m + (1.0 - b1) * g);
        self.v.zip_apply(grad, |v, g| *v = b2 * *v + (1.0 - b2) * g * g);

        let moments = self.m.tensors().into_iter().zip(self.v.tensors());
        for (p, (m, v)) in params.tensors_mut().into_iter().zip(moments) {
            for ((w, &m), &v) in p.iter_mut().zip(m).zip(v) {
                *w *= decay;
                *w -= lr * (m / bias1) / ((v / bias2).sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    weight_decay: f64,
}

impl Sgd {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self { lr, weight_decay }
    }
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut PolicyParams, grad: &PolicyParams) {
        let decay = 1.0 - self.lr * self.weight_decay;
        let lr = self.lr;
        params.zip_apply(grad, |w, g| {
            *w *= decay;
            *w -= lr * g;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::seeded_rng;

    #[test]
    fn zero_gradient_only_decays() {
        let mut p = PolicyParams::init(3, 4, 2, &mut seeded_rng(0));
        let start = p.clone();
        let zero = PolicyParams::zeros(3, 4, 2);
        let mut opt = AdamW::new(&p, 1e-3, 0.9, 0.99, 1e-8, 1e-2);
        opt.step(&mut p, &zero);
        let mut expect = start.clone();
        expect.zip_apply(&zero, |w, _| *w *= 1.0 - 1e-3 * 1e-2);
        assert_eq!(p, expect);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = PolicyParams::zeros(1, 1, 1);
        let mut g = PolicyParams::zeros(1, 1, 1);
        g.b3[0] = 0.37;
        let mut opt = AdamW::new(&p, 1e-3, 0.9, 0.99, 1e-8, 0.0);
        opt.step(&mut p, &g);
        // bias-corrected m/sqrt(v) = sign(g) on the first step
        assert!((p.b3[0] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn sgd_step() {
        let mut p = PolicyParams::zeros(1, 1, 1);
        p.b3[0] = 2.0;
        let mut g = PolicyParams::zeros(1, 1, 1);
        g.b3[0] = 0.5;
        Sgd::new(0.1, 0.0).step(&mut p, &g);
        assert!((p.b3[0] - 1.95).abs() < 1e-15);
    }
}
