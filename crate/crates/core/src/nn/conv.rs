use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::{Real, Tensor};
use crate::kernel_geometry::FilterSpec;
use crate::{Error, Result};

/// Convolution whose kernel cells sit at arbitrary grid offsets.
///
/// Input and output are HWC. Reads outside the image are zero, which is the
/// same as zero-padding by `(extent - 1) / 2` on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseConvLayer<T> {
    pub(crate) spec: FilterSpec,
    pub(crate) in_channels: usize,
    pub(crate) out_channels: usize,
    pub(crate) stride: usize,
    /// `[out][in][cell]`
    pub(crate) weights: Vec<T>,
    pub(crate) bias: Vec<T>,
}

impl<T: Real> SparseConvLayer<T> {
    pub fn zeros(spec: FilterSpec, in_channels: usize, out_channels: usize, stride: usize) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Dimension(
                "convolution needs at least one channel each way".into(),
            ));
        }
        if stride == 0 {
            return Err(Error::param("stride", "must be positive"));
        }
        let n = out_channels * in_channels * spec.cell_count();
        Ok(SparseConvLayer {
            spec,
            in_channels,
            out_channels,
            stride,
            weights: vec![T::zero(); n],
            bias: vec![T::zero(); out_channels],
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(
        spec: FilterSpec,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Self::zeros(spec, in_channels, out_channels, stride)?;
        let cells = layer.spec.cell_count();
        let limit = (6.0 / ((in_channels + out_channels) * cells) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        for w in &mut layer.weights {
            *w = T::of(dist.sample(rng));
        }
        Ok(layer)
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn stride(&self) -> usize {
        self.stride
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

    #[inline]
    fn weight_index(&self, o: usize, i: usize, cell: usize) -> usize {
        (o * self.in_channels + i) * self.spec.cell_count() + cell
    }

    /// `ceil(h / stride) × ceil(w / stride)`.
    pub fn output_dims(&self, height: usize, width: usize) -> (usize, usize) {
        (height.div_ceil(self.stride), width.div_ceil(self.stride))
    }

    /// Weights rearranged as `[cell][out][in]` for the inner loops.
    fn cell_major_weights(&self) -> Vec<T> {
        let cells = self.spec.cell_count();
        let mut out = Vec::with_capacity(self.weights.len());
        for c in 0..cells {
            for o in 0..self.out_channels {
                for i in 0..self.in_channels {
                    out.push(self.weights[self.weight_index(o, i, c)]);
                }
            }
        }
        out
    }

    /// Input pixel under `cell` for output position `(oy, ox)`, if inside the image.
    #[inline]
    fn source(&self, oy: usize, ox: usize, cell: usize, height: usize, width: usize) -> Option<usize> {
        let off = self.spec.offsets()[cell];
        let y = (oy * self.stride) as i64 + off.row as i64;
        let x = (ox * self.stride) as i64 + off.col as i64;
        if y < 0 || x < 0 || y >= height as i64 || x >= width as i64 {
            None
        } else {
            Some(y as usize * width + x as usize)
        }
    }

    /// Forward pass on a flat HWC buffer; `out` is `[oh][ow][out_channels]`.
    pub(crate) fn forward_into(&self, input: &[T], height: usize, width: usize, out: &mut [T]) {
        let (oh, ow) = self.output_dims(height, width);
        let (cin, cout) = (self.in_channels, self.out_channels);
        debug_assert_eq!(input.len(), height * width * cin);
        debug_assert_eq!(out.len(), oh * ow * cout);
        let wt = self.cell_major_weights();
        for oy in 0..oh {
            for ox in 0..ow {
                let acc = &mut out[(oy * ow + ox) * cout..][..cout];
                acc.copy_from_slice(&self.bias);
                for cell in 0..self.spec.cell_count() {
                    let Some(pixel) = self.source(oy, ox, cell, height, width) else {
                        continue;
                    };
                    let px = &input[pixel * cin..][..cin];
                    let w_cell = &wt[cell * cout * cin..][..cout * cin];
                    for (a, w_row) in acc.iter_mut().zip(w_cell.chunks_exact(cin)) {
                        *a += w_row.iter().zip(px).map(|(&w, &x)| w * x).sum::<T>();
                    }
                }
            }
        }
    }

    /// Accumulates weight and bias gradients given `grad_out` (same layout as the output).
    pub(crate) fn accumulate_grads(
        &self,
        input: &[T],
        height: usize,
        width: usize,
        grad_out: &[T],
        grad_w: &mut [T],
        grad_b: &mut [T],
    ) {
        let (oh, ow) = self.output_dims(height, width);
        let (cin, cout) = (self.in_channels, self.out_channels);
        for oy in 0..oh {
            for ox in 0..ow {
                let g = &grad_out[(oy * ow + ox) * cout..][..cout];
                if g.iter().all(|v| v.is_zero()) {
                    continue;
                }
                for (gb, &go) in grad_b.iter_mut().zip(g) {
                    *gb += go;
                }
                for cell in 0..self.spec.cell_count() {
                    let Some(pixel) = self.source(oy, ox, cell, height, width) else {
                        continue;
                    };
                    let px = &input[pixel * cin..][..cin];
                    for (o, &go) in g.iter().enumerate() {
                        if go.is_zero() {
                            continue;
                        }
                        for (i, &x) in px.iter().enumerate() {
                            grad_w[self.weight_index(o, i, cell)] += go * x;
                        }
                    }
                }
            }
        }
    }
}

/// Applies `layer` to an `[H, W, C]` tensor.
pub fn sparse_conv_forward<T: Real>(input: &Tensor<T>, layer: &SparseConvLayer<T>) -> Result<Tensor<T>> {
    let &[h, w, c] = input.shape() else {
        return Err(Error::Dimension(format!(
            "expected an HWC tensor, got shape {:?}",
            input.shape()
        )));
    };
    if c != layer.in_channels {
        return Err(Error::Dimension(format!(
            "input has {c} channels, layer expects {}",
            layer.in_channels
        )));
    }
    let (oh, ow) = layer.output_dims(h, w);
    let mut out = Tensor::zeros(vec![oh, ow, layer.out_channels]);
    layer.forward_into(input.data(), h, w, out.data_mut());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_geometry::{EquilibriumLevel, Offset};

    fn spec(offsets: &[(i32, i32)]) -> FilterSpec {
        FilterSpec::new(
            EquilibriumLevel::new(3).unwrap(),
            offsets.iter().map(|&(r, c)| Offset::new(r, c)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_center_cell_is_identity() {
        let mut layer = SparseConvLayer::<f64>::zeros(spec(&[(0, 0)]), 1, 1, 1).unwrap();
        layer.weights[0] = 1.0;
        let input = Tensor::new(vec![3, 4, 1], (0..12).map(|x| x as f64 * 0.5).collect()).unwrap();
        let out = sparse_conv_forward(&input, &layer).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn right_neighbour_sum() {
        let mut layer = SparseConvLayer::<f64>::zeros(spec(&[(0, 0), (0, 1)]), 1, 1, 1).unwrap();
        layer.weights.copy_from_slice(&[1.0, 1.0]);
        let data: Vec<f64> = (1..=16).map(|x| x as f64).collect();
        let input = Tensor::new(vec![4, 4, 1], data.clone()).unwrap();
        let out = sparse_conv_forward(&input, &layer).unwrap();
        // Hand-computed: self + right neighbour, right column sees zero padding.
        #[rustfmt::skip]
        let expected = [
             3.0,  5.0,  7.0,  4.0,
            11.0, 13.0, 15.0,  8.0,
            19.0, 21.0, 23.0, 12.0,
            27.0, 29.0, 31.0, 16.0,
        ];
        assert_eq!(out.data(), &expected);
    }

    #[test]
    fn stride_shrinks_output_by_ceiling() {
        let layer = SparseConvLayer::<f32>::zeros(FilterSpec::normal(), 3, 2, 2).unwrap();
        assert_eq!(layer.output_dims(32, 32), (16, 16));
        assert_eq!(layer.output_dims(5, 7), (3, 4));
        let input = Tensor::zeros(vec![5, 7, 3]);
        assert_eq!(sparse_conv_forward(&input, &layer).unwrap().shape(), &[3, 4, 2]);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let layer = SparseConvLayer::<f32>::zeros(FilterSpec::normal(), 3, 1, 1).unwrap();
        let input = Tensor::zeros(vec![4, 4, 2]);
        assert!(matches!(sparse_conv_forward(&input, &layer), Err(Error::Dimension(_))));
    }

    #[test]
    fn gradient_exists_only_for_declared_cells() {
        let layer = SparseConvLayer::<f64>::zeros(spec(&[(0, 0), (2, -2)]), 2, 3, 1).unwrap();
        assert_eq!(layer.weights().len(), 3 * 2 * 2);
    }
}
