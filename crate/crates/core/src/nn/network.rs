use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DenseLayer, Real, SparseConvLayer};
use crate::kernel_geometry::{EquilibriumLevel, FilterSpec};
use crate::{Error, Result};

/// The three evaluated architectures: one sparse conv layer with 1, 3 or 8
/// output channels, a ReLU hidden layer and a softmax output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Arch1,
    Arch2,
    Arch3,
}

impl Architecture {
    pub fn id(self) -> u8 {
        match self {
            Architecture::Arch1 => 1,
            Architecture::Arch2 => 2,
            Architecture::Arch3 => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Architecture::Arch1),
            2 => Some(Architecture::Arch2),
            3 => Some(Architecture::Arch3),
            _ => None,
        }
    }

    pub fn conv_channels(self) -> usize {
        match self {
            Architecture::Arch1 => 1,
            Architecture::Arch2 => 3,
            Architecture::Arch3 => 8,
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "arch{}", self.id())
    }
}

/// Input geometry and layer widths. Defaults to 32×32×3 input, 1024 hidden
/// units and 10 classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            height: 32,
            width: 32,
            channels: 3,
            hidden: 1024,
            classes: 10,
        }
    }
}

impl NetworkShape {
    pub fn input_len(&self) -> usize {
        self.height * self.width * self.channels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SumSquaredError,
    CrossEntropy,
}

/// Softmax computed in double precision whatever the parameter type.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<f64> {
    let max = logits.iter().map(|z| z.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|z| (z.as_f64() - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// `Σ(yᵈ - y)²` or `-Σ yᵈ·max(ln y, -50)`.
pub fn loss(probs: &[f64], target: &[f64], kind: LossKind) -> f64 {
    match kind {
        LossKind::SumSquaredError => probs.iter().zip(target).map(|(p, t)| (t - p).powi(2)).sum(),
        LossKind::CrossEntropy => -probs
            .iter()
            .zip(target)
            .map(|(p, t)| if *t == 0.0 { 0.0 } else { t * p.ln().max(-50.0) })
            .sum::<f64>(),
    }
}

fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut t = vec![0.0; classes];
    t[label] = 1.0;
    t
}

/// Gradient of the loss w.r.t. the logits, given softmax output `probs`.
/// Cross-entropy uses the unclamped derivative `p - y`.
fn logit_gradient(probs: &[f64], target: &[f64], kind: LossKind) -> Vec<f64> {
    match kind {
        LossKind::CrossEntropy => probs.iter().zip(target).map(|(p, t)| p - t).collect(),
        LossKind::SumSquaredError => {
            let g: Vec<f64> = probs.iter().zip(target).map(|(p, t)| 2.0 * (p - t)).collect();
            let mean: f64 = g.iter().zip(probs).map(|(g, p)| g * p).sum();
            probs.iter().zip(&g).map(|(p, g)| p * (g - mean)).collect()
        }
    }
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub conv_weights: Vec<T>,
    pub conv_bias: Vec<T>,
    pub hidden_weights: Vec<T>,
    pub hidden_bias: Vec<T>,
    pub output_weights: Vec<T>,
    pub output_bias: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        let z = |n: usize| vec![T::zero(); n];
        Gradients {
            conv_weights: z(net.conv.weights.len()),
            conv_bias: z(net.conv.bias.len()),
            hidden_weights: z(net.hidden.weights.len()),
            hidden_bias: z(net.hidden.bias.len()),
            output_weights: z(net.output.weights.len()),
            output_bias: z(net.output.bias.len()),
        }
    }

    pub fn parameters(&self) -> [&[T]; 6] {
        [
            &self.conv_weights,
            &self.conv_bias,
            &self.hidden_weights,
            &self.hidden_bias,
            &self.output_weights,
            &self.output_bias,
        ]
    }

    fn parameters_mut(&mut self) -> [&mut Vec<T>; 6] {
        [
            &mut self.conv_weights,
            &mut self.conv_bias,
            &mut self.hidden_weights,
            &mut self.hidden_bias,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }

    pub fn clear(&mut self) {
        for p in self.parameters_mut() {
            p.fill(T::zero());
        }
    }
}

#[derive(Debug, Clone)]
struct Activations<T> {
    conv_pre: Vec<T>,
    conv_act: Vec<T>,
    hidden_pre: Vec<T>,
    hidden_act: Vec<T>,
    logits: Vec<T>,
}

/// Sparse conv → ReLU → dense → ReLU → dense → softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    architecture: Architecture,
    shape: NetworkShape,
    pub(crate) conv: SparseConvLayer<T>,
    pub(crate) hidden: DenseLayer<T>,
    pub(crate) output: DenseLayer<T>,
}

impl<T: Real> Network<T> {
    /// Glorot-initialized network; all draws come from `seed`.
    pub fn new(
        architecture: Architecture,
        shape: NetworkShape,
        spec: FilterSpec,
        stride: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv = SparseConvLayer::glorot(spec, shape.channels, architecture.conv_channels(), stride, &mut rng)?;
        let flat = Self::flat_len(&conv, &shape);
        let hidden = DenseLayer::glorot(flat, shape.hidden, &mut rng)?;
        let output = DenseLayer::glorot(shape.hidden, shape.classes, &mut rng)?;
        Ok(Network {
            architecture,
            shape,
            conv,
            hidden,
            output,
        })
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(architecture: Architecture, shape: NetworkShape, spec: FilterSpec, stride: usize) -> Result<Self> {
        let conv = SparseConvLayer::zeros(spec, shape.channels, architecture.conv_channels(), stride)?;
        let flat = Self::flat_len(&conv, &shape);
        let hidden = DenseLayer::zeros(flat, shape.hidden)?;
        let output = DenseLayer::zeros(shape.hidden, shape.classes)?;
        Ok(Network {
            architecture,
            shape,
            conv,
            hidden,
            output,
        })
    }

    /// Assembles a network from explicit layers, checking that they chain.
    pub fn from_layers(
        architecture: Architecture,
        shape: NetworkShape,
        conv: SparseConvLayer<T>,
        hidden: DenseLayer<T>,
        output: DenseLayer<T>,
    ) -> Result<Self> {
        let ok = conv.in_channels == shape.channels
            && conv.out_channels == architecture.conv_channels()
            && hidden.inputs == Self::flat_len(&conv, &shape)
            && hidden.outputs == shape.hidden
            && output.inputs == shape.hidden
            && output.outputs == shape.classes;
        if !ok {
            return Err(Error::Dimension(format!(
                "layers do not chain for {architecture} with {shape:?}"
            )));
        }
        Ok(Network {
            architecture,
            shape,
            conv,
            hidden,
            output,
        })
    }

    fn flat_len(conv: &SparseConvLayer<T>, shape: &NetworkShape) -> usize {
        let (oh, ow) = conv.output_dims(shape.height, shape.width);
        oh * ow * conv.out_channels
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn level(&self) -> EquilibriumLevel {
        self.conv.spec.level()
    }

    pub fn filter_spec(&self) -> &FilterSpec {
        &self.conv.spec
    }

    pub fn conv(&self) -> &SparseConvLayer<T> {
        &self.conv
    }

    pub fn hidden(&self) -> &DenseLayer<T> {
        &self.hidden
    }

    pub fn output(&self) -> &DenseLayer<T> {
        &self.output
    }

    /// Parameter arrays in declaration order: conv weights, conv bias,
    /// hidden weights, hidden bias, output weights, output bias.
    pub fn parameters(&self) -> [&[T]; 6] {
        [
            &self.conv.weights,
            &self.conv.bias,
            &self.hidden.weights,
            &self.hidden.bias,
            &self.output.weights,
            &self.output.bias,
        ]
    }

    pub fn parameters_mut(&mut self) -> [&mut [T]; 6] {
        [
            &mut self.conv.weights,
            &mut self.conv.bias,
            &mut self.hidden.weights,
            &mut self.hidden.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Same network in another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let c = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect::<Vec<U>>();
        Network {
            architecture: self.architecture,
            shape: self.shape,
            conv: SparseConvLayer {
                spec: self.conv.spec.clone(),
                in_channels: self.conv.in_channels,
                out_channels: self.conv.out_channels,
                stride: self.conv.stride,
                weights: c(&self.conv.weights),
                bias: c(&self.conv.bias),
            },
            hidden: DenseLayer {
                inputs: self.hidden.inputs,
                outputs: self.hidden.outputs,
                weights: c(&self.hidden.weights),
                bias: c(&self.hidden.bias),
            },
            output: DenseLayer {
                inputs: self.output.inputs,
                outputs: self.output.outputs,
                weights: c(&self.output.weights),
                bias: c(&self.output.bias),
            },
        }
    }

    /// Copies both dense layers from `other` when their shapes agree.
    /// Returns whether anything was copied.
    pub fn adopt_dense_layers(&mut self, other: &Network<T>) -> bool {
        if self.hidden.inputs != other.hidden.inputs || self.shape != other.shape {
            return false;
        }
        self.hidden = other.hidden.clone();
        self.output = other.output.clone();
        true
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.shape.input_len() {
            return Err(Error::Dimension(format!(
                "input has {} values, network expects {}x{}x{}",
                input.len(),
                self.shape.height,
                self.shape.width,
                self.shape.channels
            )));
        }
        Ok(())
    }

    fn activations(&self, input: &[T]) -> Activations<T> {
        let flat = self.hidden.inputs;
        let mut conv_pre = vec![T::zero(); flat];
        self.conv
            .forward_into(input, self.shape.height, self.shape.width, &mut conv_pre);
        let conv_act: Vec<T> = conv_pre.iter().map(|&z| z.max(T::zero())).collect();
        let mut hidden_pre = vec![T::zero(); self.hidden.outputs];
        self.hidden.forward_into(&conv_act, &mut hidden_pre);
        let hidden_act: Vec<T> = hidden_pre.iter().map(|&z| z.max(T::zero())).collect();
        let mut logits = vec![T::zero(); self.output.outputs];
        self.output.forward_into(&hidden_act, &mut logits);
        Activations {
            conv_pre,
            conv_act,
            hidden_pre,
            hidden_act,
            logits,
        }
    }

    /// Class probabilities for one HWC image.
    pub fn forward(&self, input: &[T]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(softmax(&self.activations(input).logits))
    }

    pub fn predict(&self, input: &[T]) -> Result<(usize, Vec<f64>)> {
        let probs = self.forward(input)?;
        Ok((argmax(&probs), probs))
    }

    /// Adds this sample's gradients to `grads` and returns its loss.
    pub fn accumulate_gradients(
        &self,
        input: &[T],
        label: usize,
        kind: LossKind,
        grads: &mut Gradients<T>,
    ) -> Result<f64> {
        self.check_input(input)?;
        if label >= self.shape.classes {
            return Err(Error::Dimension(format!(
                "label {label} outside {} classes",
                self.shape.classes
            )));
        }
        let act = self.activations(input);
        let probs = softmax(&act.logits);
        let target = one_hot(label, self.shape.classes);
        let value = loss(&probs, &target, kind);

        let delta_out: Vec<T> = logit_gradient(&probs, &target, kind).into_iter().map(T::of).collect();
        let mut d_hidden = vec![T::zero(); self.hidden.outputs];
        self.output.backward(
            &act.hidden_act,
            &delta_out,
            &mut grads.output_weights,
            &mut grads.output_bias,
            Some(&mut d_hidden),
        );
        for (d, &z) in d_hidden.iter_mut().zip(&act.hidden_pre) {
            if z <= T::zero() {
                *d = T::zero();
            }
        }
        let mut d_conv = vec![T::zero(); self.hidden.inputs];
        self.hidden.backward(
            &act.conv_act,
            &d_hidden,
            &mut grads.hidden_weights,
            &mut grads.hidden_bias,
            Some(&mut d_conv),
        );
        for (d, &z) in d_conv.iter_mut().zip(&act.conv_pre) {
            if z <= T::zero() {
                *d = T::zero();
            }
        }
        self.conv.accumulate_grads(
            input,
            self.shape.height,
            self.shape.width,
            &d_conv,
            &mut grads.conv_weights,
            &mut grads.conv_bias,
        );
        Ok(value)
    }

    /// Gradients and loss for a single labelled sample.
    pub fn backward(&self, input: &[T], label: usize, kind: LossKind) -> Result<(Gradients<T>, f64)> {
        let mut grads = Gradients::zeros_like(self);
        let value = self.accumulate_gradients(input, label, kind, &mut grads)?;
        Ok((grads, value))
    }

    /// `θ ← θ - scale·g` for every parameter.
    pub fn apply_gradients(&mut self, grads: &Gradients<T>, scale: T) {
        for (param, grad) in self.parameters_mut().into_iter().zip(grads.parameters()) {
            for (p, &g) in param.iter_mut().zip(grad) {
                *p -= scale * g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_geometry::{generate_filter, SpiralParams};

    fn small_shape() -> NetworkShape {
        NetworkShape {
            height: 6,
            width: 6,
            channels: 3,
            hidden: 12,
            classes: 10,
        }
    }

    #[test]
    fn zero_network_is_uniform() {
        let net = Network::<f64>::zeros(Architecture::Arch1, NetworkShape::default(), FilterSpec::normal(), 1).unwrap();
        let probs = net.forward(&vec![0.3; 32 * 32 * 3]).unwrap();
        assert!(probs.iter().all(|&p| (p - 0.1).abs() < 1e-15));
        assert_eq!(net.predict(&vec![0.0; 3072]).unwrap().0, 0);
    }

    #[test]
    fn probabilities_sum_to_one_and_are_deterministic() {
        let spec = generate_filter(EquilibriumLevel::MOST_SCATTERED, &SpiralParams::default()).unwrap();
        let net = Network::<f32>::new(Architecture::Arch2, small_shape(), spec, 1, 7).unwrap();
        let input: Vec<f32> = (0..108).map(|i| (i % 13) as f32 / 13.0).collect();
        let a = net.forward(&input).unwrap();
        let b = net.forward(&input).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(a.iter().all(|&p| (0.0..=1.0).contains(&p)));
        let again = Network::<f32>::new(Architecture::Arch2, small_shape(), net.filter_spec().clone(), 1, 7).unwrap();
        assert_eq!(again, net);
    }

    #[test]
    fn wrong_input_size_is_rejected() {
        let net = Network::<f32>::zeros(Architecture::Arch1, small_shape(), FilterSpec::normal(), 1).unwrap();
        assert!(matches!(net.forward(&[0.0; 10]), Err(Error::Dimension(_))));
    }

    #[test]
    fn loss_examples() {
        let target = one_hot(3, 10);
        assert_eq!(loss(&target, &target, LossKind::SumSquaredError), 0.0);
        assert_eq!(loss(&target, &target, LossKind::CrossEntropy), 0.0);
        let uniform = vec![0.1; 10];
        assert!((loss(&uniform, &target, LossKind::SumSquaredError) - 0.90).abs() < 1e-12);
        assert!((loss(&uniform, &target, LossKind::CrossEntropy) - 10f64.ln()).abs() < 1e-12);
        let mut zero_at_target = vec![0.0; 10];
        zero_at_target[0] = 1.0;
        assert_eq!(loss(&zero_at_target, &target, LossKind::CrossEntropy), 50.0);
    }

    #[test]
    fn argmax_tie_breaks_low() {
        assert_eq!(argmax(&one_hot(3, 10)), 3);
        assert_eq!(argmax(&[0.1; 10]), 0);
        let mut p = vec![0.05; 10];
        p[7] = 0.5;
        assert_eq!(argmax(&p), 7);
    }

    #[test]
    fn zero_loss_point_has_zero_output_gradient() {
        let probs = one_hot(2, 10);
        let g = logit_gradient(&probs, &probs, LossKind::SumSquaredError);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn architecture_ids_round_trip() {
        for arch in [Architecture::Arch1, Architecture::Arch2, Architecture::Arch3] {
            assert_eq!(Architecture::from_id(arch.id()), Some(arch));
        }
        assert_eq!(Architecture::from_id(0), None);
        assert_eq!(Architecture::Arch3.conv_channels(), 8);
    }

    #[test]
    fn flattened_size_is_level_independent() {
        let params = SpiralParams::default();
        let sizes: Vec<usize> = EquilibriumLevel::all()
            .map(|l| {
                let net = Network::<f32>::zeros(
                    Architecture::Arch3,
                    NetworkShape::default(),
                    generate_filter(l, &params).unwrap(),
                    1,
                )
                .unwrap();
                net.hidden().inputs()
            })
            .collect();
        assert!(sizes.iter().all(|&s| s == 32 * 32 * 8));
    }
}
