use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::Real;
use crate::{Error, Result};

/// Fully connected layer, weights stored `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    pub(crate) weights: Vec<T>,
    pub(crate) bias: Vec<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::Dimension(format!("dense layer {inputs}x{outputs} is empty")));
        }
        Ok(DenseLayer {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        })
    }

    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Result<Self> {
        let mut layer = Self::zeros(inputs, outputs)?;
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        for w in &mut layer.weights {
            *w = T::of(dist.sample(rng));
        }
        Ok(layer)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub(crate) fn forward_into(&self, input: &[T], out: &mut [T]) {
        debug_assert_eq!(input.len(), self.inputs);
        for ((o, row), &b) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs))
            .zip(&self.bias)
        {
            *o = b + dot(row, input);
        }
    }

    /// Adds `delta ⊗ input` to the weight gradient and `delta` to the bias
    /// gradient. If `grad_input` is given it receives `Wᵀ·delta`.
    pub(crate) fn backward(
        &self,
        input: &[T],
        delta: &[T],
        grad_w: &mut [T],
        grad_b: &mut [T],
        mut grad_input: Option<&mut [T]>,
    ) {
        if let Some(gi) = grad_input.as_deref_mut() {
            gi.fill(T::zero());
        }
        for (o, &d) in delta.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            grad_b[o] += d;
            let gw = &mut grad_w[o * self.inputs..][..self.inputs];
            for (g, &x) in gw.iter_mut().zip(input) {
                *g += d * x;
            }
            if let Some(gi) = grad_input.as_deref_mut() {
                let row = &self.weights[o * self.inputs..][..self.inputs];
                for (g, &w) in gi.iter_mut().zip(row) {
                    *g += d * w;
                }
            }
        }
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // Eight independent accumulators let the compiler vectorize the reduction.
    let mut acc = [T::zero(); 8];
    let mut chunks_a = a.chunks_exact(8);
    let mut chunks_b = b.chunks_exact(8);
    for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let tail: T = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(&x, &y)| x * y)
        .sum();
    acc.iter().copied().sum::<T>() + tail
}
