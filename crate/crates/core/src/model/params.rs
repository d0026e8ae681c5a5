use rand::RngCore;

use super::hyper::HyperParams;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Real};
use crate::rng;

/// One-hidden-layer perceptron: `y = W2 relu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T = f64> {
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
}

impl<T: Real> Mlp<T> {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden, input),
            b1: Matrix::zeros(hidden, 1),
            w2: Matrix::zeros(output, hidden),
            b2: Matrix::zeros(output, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    /// Writes the post-ReLU hidden activations into `hidden` and the output into `out`.
    pub fn forward_into(&self, x: &[T], hidden: &mut [T], out: &mut [T]) {
        self.w1.matvec(x, hidden);
        for (h, b) in hidden.iter_mut().zip(self.b1.as_slice()) {
            let v = *h + *b;
            *h = if v > T::zero() { v } else { T::zero() };
        }
        self.w2.matvec(hidden, out);
        for (o, b) in out.iter_mut().zip(self.b2.as_slice()) {
            *o = *o + *b;
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut h = vec![T::zero(); self.hidden_dim()];
        let mut y = vec![T::zero(); self.output_dim()];
        self.forward_into(x, &mut h, &mut y);
        y
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        let f = |v: T| U::of(v.as_f64());
        Mlp { w1: self.w1.map(f), b1: self.b1.map(f), w2: self.w2.map(f), b2: self.b2.map(f) }
    }
}

/// Names of all trainable tensors, in weight-file order.
pub const TENSOR_NAMES: [&str; 16] = [
    "lut_p", "lut_s", "f_u", "f_o", "n_a.w1", "n_a.b1", "n_a.w2", "n_a.b2", "n_u.w1", "n_u.b1", "n_u.w2", "n_u.b2",
    "n_o.w1", "n_o.b1", "n_o.w2", "n_o.b2",
];

/// All trainable tables and networks.
///
/// `lut_p` is `d_p x n_phonemes` and `lut_s` is `d_s x n_speakers`; embeddings
/// are columns. Biases are stored as single-column matrices so every tensor
/// can be visited uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f64> {
    pub hyper: HyperParams,
    pub lut_p: Matrix<T>,
    pub lut_s: Matrix<T>,
    pub f_u: Matrix<T>,
    pub f_o: Matrix<T>,
    pub n_a: Mlp<T>,
    pub n_u: Mlp<T>,
    pub n_o: Mlp<T>,
}

impl<T: Real> ModelParams<T> {
    /// All-zero parameters with the shapes implied by `hyper`.
    pub fn zeros(hyper: HyperParams) -> Result<Self> {
        hyper.validate()?;
        let (a_in, a_out) = hyper.attention_io();
        let (u_in, u_out) = hyper.update_io();
        let (o_in, o_out) = hyper.output_io();
        Ok(Self {
            hyper,
            lut_p: Matrix::zeros(hyper.d_p, hyper.n_phonemes),
            lut_s: Matrix::zeros(hyper.d_s(), hyper.n_speakers),
            f_u: Matrix::zeros(hyper.d_p, hyper.d_s()),
            f_o: Matrix::zeros(hyper.d_o, hyper.d_s()),
            n_a: Mlp::zeros(a_in, hyper.hidden(a_in), a_out),
            n_u: Mlp::zeros(u_in, hyper.hidden(u_in), u_out),
            n_o: Mlp::zeros(o_in, hyper.hidden(o_in), o_out),
        })
    }

    pub fn tensors(&self) -> [&Matrix<T>; 16] {
        [
            &self.lut_p,
            &self.lut_s,
            &self.f_u,
            &self.f_o,
            &self.n_a.w1,
            &self.n_a.b1,
            &self.n_a.w2,
            &self.n_a.b2,
            &self.n_u.w1,
            &self.n_u.b1,
            &self.n_u.w2,
            &self.n_u.b2,
            &self.n_o.w1,
            &self.n_o.b1,
            &self.n_o.w2,
            &self.n_o.b2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix<T>; 16] {
        [
            &mut self.lut_p,
            &mut self.lut_s,
            &mut self.f_u,
            &mut self.f_o,
            &mut self.n_a.w1,
            &mut self.n_a.b1,
            &mut self.n_a.w2,
            &mut self.n_a.b2,
            &mut self.n_u.w1,
            &mut self.n_u.b1,
            &mut self.n_u.w2,
            &mut self.n_u.b2,
            &mut self.n_o.w1,
            &mut self.n_o.b1,
            &mut self.n_o.w2,
            &mut self.n_o.b2,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.as_slice().iter()).map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt()
    }

    /// Column `id` of the speaker table.
    pub fn speaker(&self, id: usize) -> Result<Vec<T>> {
        if id >= self.hyper.n_speakers {
            return Err(Error::invalid(format!("speaker id {id} out of range (table has {})", self.hyper.n_speakers)));
        }
        Ok(self.lut_s.column(id))
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let f = |v: T| U::of(v.as_f64());
        ModelParams {
            hyper: self.hyper,
            lut_p: self.lut_p.map(f),
            lut_s: self.lut_s.map(f),
            f_u: self.f_u.map(f),
            f_o: self.f_o.map(f),
            n_a: self.n_a.cast(),
            n_u: self.n_u.cast(),
            n_o: self.n_o.cast(),
        }
    }

    /// Checks every tensor shape against `hyper`.
    pub fn check_shapes(&self) -> Result<()> {
        let reference = ModelParams::<T>::zeros(self.hyper)?;
        for ((name, a), b) in TENSOR_NAMES.iter().zip(self.tensors()).zip(reference.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::invalid(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }
}

impl ModelParams<f64> {
    /// Seeded initialisation: every weight matrix `rows x cols` is drawn from
    /// `U(-1/sqrt(cols), 1/sqrt(cols))`, row-major, tensors in weight-file
    /// order, from one ChaCha8 stream. Biases are zero.
    pub fn init(hyper: HyperParams, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(hyper)?;
        let mut r = rng::seeded(seed);
        for (name, t) in TENSOR_NAMES.iter().zip(p.tensors_mut()) {
            if name.ends_with(".b1") || name.ends_with(".b2") {
                continue;
            }
            fill_uniform(t, &mut r);
        }
        Ok(p)
    }

    /// Sets the mean-increment biases of the attention network to
    /// `-ln(frames_per_phoneme)`, so an untrained model advances its
    /// attention by roughly one input position every `frames_per_phoneme`
    /// frames instead of one per frame.
    pub fn set_attention_pace(&mut self, frames_per_phoneme: f64) -> Result<()> {
        if !(frames_per_phoneme.is_finite() && frames_per_phoneme > 0.0) {
            return Err(Error::invalid(format!("attention pace must be positive, got {frames_per_phoneme}")));
        }
        let b = -frames_per_phoneme.ln();
        for i in 0..self.hyper.c {
            self.n_a.b2.set(i, 0, b);
        }
        Ok(())
    }
}

fn fill_uniform(t: &mut Matrix<f64>, r: &mut impl RngCore) {
    let a = 1.0 / (t.cols() as f64).sqrt();
    for v in t.as_mut_slice() {
        *v = rng::symmetric(r, a);
    }
}
