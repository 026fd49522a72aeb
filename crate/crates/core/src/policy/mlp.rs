use std::io::{Read, Write};

use rand::Rng;

use super::featurize::FeatureVector;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_HIDDEN: usize = 512;

const MAGIC: &[u8; 8] = b"SRPOLv1\n";

/// Weights of the three-layer tanh MLP. Matrices are row-major with the input
/// index as the row: `w1[i * hidden + j]` connects input `i` to unit `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub arms: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

/// One logged tuple fed to the gradient.
#[derive(Debug, Clone, Copy)]
pub struct BanditSample<'a> {
    pub features: &'a FeatureVector,
    pub arm: usize,
    pub reward: f64,
}

struct Activations {
    h1: Vec<f64>,
    h2: Vec<f64>,
    probs: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(input_dim: usize, hidden: usize, arms: usize) -> Self {
        Self {
            input_dim,
            hidden,
            arms,
            w1: vec![0.0; input_dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * hidden],
            b2: vec![0.0; hidden],
            w3: vec![0.0; hidden * arms],
            b3: vec![0.0; arms],
        }
    }

    /// Weights uniform in ±1/sqrt(fan_in), biases zero. Layers are drawn in order.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, arms: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden, arms);
        for (w, fan_in) in [(&mut p.w1, input_dim), (&mut p.w2, hidden), (&mut p.w3, hidden)] {
            let bound = 1.0 / (fan_in as f64).sqrt();
            w.iter_mut().for_each(|x| *x = rng.gen_range(-bound..bound));
        }
        p
    }

    pub fn tensors(&self) -> [&Vec<f64>; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (d, h, k) = (self.input_dim, self.hidden, self.arms);
        let expected = [d * h, h, h * h, h, h * k, k];
        let actual = self.tensors().map(|t| t.len());
        if d == 0 || h == 0 || k == 0 || actual != expected {
            return Err(Error::ShapeMismatch(format!(
                "tensor sizes {actual:?} do not match (D={d}, H={h}, k={k})"
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "feature dimension {} != policy input dimension {}",
                x.dim(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn activations(&self, x: &FeatureVector) -> Activations {
        let h = self.hidden;
        let mut h1 = self.b1.clone();
        for (i, &xi) in x.values.iter().enumerate() {
            // hashed features are sparse
            if xi != 0.0 {
                let row = &self.w1[i * h..(i + 1) * h];
                h1.iter_mut().zip(row).for_each(|(a, w)| *a += xi * w);
            }
        }
        h1.iter_mut().for_each(|a| *a = a.tanh());

        let mut h2 = self.b2.clone();
        for (i, &a) in h1.iter().enumerate() {
            let row = &self.w2[i * h..(i + 1) * h];
            h2.iter_mut().zip(row).for_each(|(z, w)| *z += a * w);
        }
        h2.iter_mut().for_each(|a| *a = a.tanh());

        let k = self.arms;
        let mut logits = self.b3.clone();
        for (i, &a) in h2.iter().enumerate() {
            let row = &self.w3[i * k..(i + 1) * k];
            logits.iter_mut().zip(row).for_each(|(z, w)| *z += a * w);
        }
        Activations {
            h1,
            h2,
            probs: softmax(&logits),
        }
    }

    /// Arm probabilities `softmax(W3ᵀ tanh(W2ᵀ tanh(W1ᵀ x + b1) + b2) + b3)`.
    pub fn forward(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.check_shapes()?;
        self.check_input(x)?;
        Ok(self.activations(x).probs)
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        self.check_shapes()?;
        w.write_all(MAGIC)?;
        for dim in [self.input_dim, self.hidden, self.arms] {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        for t in self.tensors() {
            for x in t {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not a policy file"));
        }
        let mut word = [0u8; 8];
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            r.read_exact(&mut word)?;
            *d = u64::from_le_bytes(word) as usize;
        }
        let [d, h, k] = dims;
        if d == 0 || h == 0 || k == 0 || d.checked_mul(h).is_none() || h.checked_mul(h).is_none() {
            return Err(invalid(format!("bad policy shape ({d}, {h}, {k})")));
        }
        let mut p = Self::zeros(d, h, k);
        for t in p.tensors_mut() {
            for x in t.iter_mut() {
                r.read_exact(&mut word)?;
                *x = f64::from_le_bytes(word);
            }
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(invalid("trailing bytes after policy weights"));
        }
        if !p.is_finite() {
            return Err(invalid("policy weights must be finite"));
        }
        Ok(p)
    }

    pub(crate) fn zip_apply(&mut self, other: &PolicyParams, mut f: impl FnMut(&mut f64, f64)) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, &y)| f(x, y));
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_batch(params: &PolicyParams, batch: &[BanditSample<'_>]) -> Result<()> {
    params.check_shapes()?;
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    for s in batch {
        params.check_input(s.features)?;
        if s.arm >= params.arms {
            return Err(invalid(format!("arm index {} out of range for k={}", s.arm, params.arms)));
        }
    }
    Ok(())
}

/// Surrogate loss `-(1/B) Σ r_b log π(a_b | x_b)`.
pub fn reinforce_loss(params: &PolicyParams, batch: &[BanditSample<'_>]) -> Result<f64> {
    check_batch(params, batch)?;
    let b = batch.len() as f64;
    Ok(batch
        .iter()
        .map(|s| -s.reward * params.activations(s.features).probs[s.arm].ln())
        .sum::<f64>()
        / b)
}

/// Exact gradient of [`reinforce_loss`] by backpropagation, returned with the loss.
/// Rewards are used as given: no baseline, no normalization.
pub fn reinforce_grad(params: &PolicyParams, batch: &[BanditSample<'_>]) -> Result<(PolicyParams, f64)> {
    check_batch(params, batch)?;
    let (h, k) = (params.hidden, params.arms);
    let b = batch.len() as f64;
    let mut grad = PolicyParams::zeros(params.input_dim, h, k);
    let mut loss = 0.0;
    let mut d_pre2 = vec![0.0; h];
    let mut d_pre1 = vec![0.0; h];

    for s in batch {
        if s.reward == 0.0 {
            continue;
        }
        let act = params.activations(s.features);
        loss -= s.reward * act.probs[s.arm].ln();
        let scale = s.reward / b;

        // dL/dz = (r/B) (π - onehot(a))
        let dz: Vec<f64> = act
            .probs
            .iter()
            .enumerate()
            .map(|(c, &p)| scale * (p - if c == s.arm { 1.0 } else { 0.0 }))
            .collect();
        grad.b3.iter_mut().zip(&dz).for_each(|(g, d)| *g += d);
        for (j, &a) in act.h2.iter().enumerate() {
            let w_row = &params.w3[j * k..(j + 1) * k];
            let g_row = &mut grad.w3[j * k..(j + 1) * k];
            let mut back = 0.0;
            for c in 0..k {
                g_row[c] += a * dz[c];
                back += w_row[c] * dz[c];
            }
            d_pre2[j] = back * (1.0 - a * a);
        }

        grad.b2.iter_mut().zip(&d_pre2).for_each(|(g, d)| *g += d);
        for (i, &a) in act.h1.iter().enumerate() {
            let w_row = &params.w2[i * h..(i + 1) * h];
            let g_row = &mut grad.w2[i * h..(i + 1) * h];
            let mut back = 0.0;
            for j in 0..h {
                g_row[j] += a * d_pre2[j];
                back += w_row[j] * d_pre2[j];
            }
            d_pre1[i] = back * (1.0 - a * a);
        }

        grad.b1.iter_mut().zip(&d_pre1).for_each(|(g, d)| *g += d);
        for (i, &xi) in s.features.values.iter().enumerate() {
            if xi != 0.0 {
                let g_row = &mut grad.w1[i * h..(i + 1) * h];
                g_row.iter_mut().zip(&d_pre1).for_each(|(g, d)| *g += xi * d);
            }
        }
    }
    Ok((grad, loss / b))
}
