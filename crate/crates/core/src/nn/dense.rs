use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn slope_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Affine map of the raw input applied before the first layer: `x = (t − offset)·scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub offset: f64,
    pub scale: f64,
}

impl InputScaling {
    pub const IDENTITY: InputScaling = InputScaling {
        offset: 0.0,
        scale: 1.0,
    };

    /// Maps `[lo, hi]` onto `[0, 1]`.
    pub fn unit_interval(lo: f64, hi: f64) -> Self {
        InputScaling {
            offset: lo,
            scale: 1.0 / (hi - lo),
        }
    }

    pub fn map(&self, t: f64) -> f64 {
        (t - self.offset) * self.scale
    }
}

/// Affine map of the last layer's value: `y = offset + scale·z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputScaling {
    pub offset: f64,
    pub scale: f64,
}

impl OutputScaling {
    pub const IDENTITY: OutputScaling = OutputScaling {
        offset: 0.0,
        scale: 1.0,
    };

    pub fn map(&self, z: f64) -> f64 {
        self.offset + self.scale * z
    }
}

impl Default for OutputScaling {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// A scalar-in, scalar-out fully connected network.
///
/// Parameters live in one flat buffer; layer `l` stores its weight matrix
/// (`out × in`, row-major) followed by its bias vector. Hidden layers apply
/// the activation, the output layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
    activation: Activation,
    input: InputScaling,
    output: OutputScaling,
    seed: u64,
    generation: u64,
}

fn layout(layer_sizes: &[usize]) -> Result<(Vec<usize>, usize), NnError> {
    if layer_sizes.len() < 2 {
        return Err(NnError::Shape("a network needs at least two layers".into()));
    }
    if layer_sizes[0] != 1 || *layer_sizes.last().unwrap() != 1 {
        return Err(NnError::Shape(format!(
            "input and output widths must be 1, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(NnError::Shape("layer widths must be positive".into()));
    }
    let mut offsets = Vec::with_capacity(layer_sizes.len() - 1);
    let mut at = 0;
    for w in layer_sizes.windows(2) {
        offsets.push(at);
        at += w[0] * w[1] + w[1];
    }
    Ok((offsets, at))
}

/// `Σ (n_i·n_{i+1} + n_{i+1})`.
pub fn parameter_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNet {
    /// Random weights with variance `1/fan_in` (uniform), zero biases.
    pub fn new(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(layer_sizes, activation, seed, &mut rng)
    }

    /// Like [`new`](Self::new) but draws from a caller-owned generator, so
    /// several networks can share one seeded stream.
    pub fn with_rng(
        layer_sizes: &[usize],
        activation: Activation,
        seed: u64,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        net.seed = seed;
        for l in 0..net.layer_count() {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let bound = (3.0 / fan_in as f64).sqrt();
            let start = net.offsets[l];
            for p in &mut net.params[start..start + fan_in * fan_out] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self, NnError> {
        let (offsets, count) = layout(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; count],
            offsets,
            activation,
            input: InputScaling::IDENTITY,
            output: OutputScaling::IDENTITY,
            seed: 0,
            generation: 0,
        })
    }

    pub fn with_input_scaling(mut self, input: InputScaling) -> Self {
        self.input = input;
        self.generation += 1;
        self
    }

    pub fn with_output_scaling(mut self, output: OutputScaling) -> Self {
        self.output = output;
        self.generation += 1;
        self
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layer_count(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_scaling(&self) -> InputScaling {
        self.input
    }

    pub fn output_scaling(&self) -> OutputScaling {
        self.output
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates any recorded forward pass.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.params.len() {
            return Err(NnError::ShapeMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params_mut().copy_from_slice(params);
        Ok(())
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let start = self.offsets[layer];
        ArrayView2::from_shape((fan_out, fan_in), &self.params[start..start + fan_in * fan_out])
            .expect("layout")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let start = self.offsets[layer] + fan_in * fan_out;
        ArrayView1::from(&self.params[start..start + fan_out])
    }

    /// Index of the first bias entry of `layer` in the flat parameter buffer.
    pub fn bias_offset(&self, layer: usize) -> usize {
        self.offsets[layer] + self.layer_sizes[layer] * self.layer_sizes[layer + 1]
    }

    pub fn weight_offset(&self, layer: usize) -> usize {
        self.offsets[layer]
    }

    pub fn forward(&self, t: f64) -> f64 {
        self.forward_batch(&[t]).outputs[0]
    }

    /// Evaluates the network at every input, keeping the activations needed
    /// by [`backward`](Self::backward).
    pub fn forward_batch(&self, inputs: &[f64]) -> ForwardPass {
        let x = Array2::from_shape_fn((inputs.len(), 1), |(i, _)| self.input.map(inputs[i]));
        let mut activations = Vec::with_capacity(self.layer_count() + 1);
        activations.push(x);
        let last = self.layer_count() - 1;
        for l in 0..=last {
            let mut z = activations[l].dot(&self.weights(l).t());
            z += &self.bias(l);
            if l < last {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            activations.push(z);
        }
        let out = self.output;
        let outputs = activations[last + 1].column(0).iter().map(|z| out.map(*z)).collect();
        ForwardPass {
            generation: self.generation,
            param_count: self.params.len(),
            activations,
            outputs,
        }
    }

    /// Reverse-mode accumulation of `Σ_i upstream_i · ∂y_i/∂θ` over the batch
    /// recorded in `pass`.
    pub fn backward(&self, pass: &ForwardPass, upstream: &[f64]) -> Result<GradientTape, NnError> {
        if pass.generation != self.generation || pass.param_count != self.params.len() {
            return Err(NnError::StaleTape);
        }
        if upstream.len() != pass.outputs.len() {
            return Err(NnError::ShapeMismatch {
                expected: pass.outputs.len(),
                got: upstream.len(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let scale = self.output.scale;
        let mut delta = Array2::from_shape_fn((upstream.len(), 1), |(i, _)| upstream[i] * scale);
        for l in (0..self.layer_count()).rev() {
            let a_prev = &pass.activations[l];
            let dw = delta.t().dot(a_prev);
            let db = delta.sum_axis(Axis(0));
            let w_start = self.offsets[l];
            let b_start = self.bias_offset(l);
            for (g, v) in grads[w_start..b_start].iter_mut().zip(dw.iter()) {
                *g = *v;
            }
            for (g, v) in grads[b_start..b_start + db.len()].iter_mut().zip(db.iter()) {
                *g = *v;
            }
            if l > 0 {
                let mut next = delta.dot(&self.weights(l));
                let act = self.activation;
                next.zip_mut_with(a_prev, |d, a| *d *= act.slope_from_output(*a));
                delta = next;
            }
        }
        Ok(GradientTape {
            grads,
            layer_sizes: self.layer_sizes.clone(),
        })
    }
}

/// Activations recorded by a batched forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    generation: u64,
    param_count: usize,
    activations: Vec<Array2<f64>>,
    outputs: Vec<f64>,
}

impl ForwardPass {
    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }
}

/// Gradient accumulators aligned with a network's flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    grads: Vec<f64>,
    layer_sizes: Vec<usize>,
}

impl GradientTape {
    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn into_grads(self) -> Vec<f64> {
        self.grads
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parameter_count_formula() {
        let net = DenseNet::new(&[1, 20, 20, 20, 20, 20, 1], Activation::Tanh, 1).unwrap();
        assert_eq!(net.param_count(), 40 + 4 * 420 + 21);
        assert_eq!(parameter_count(&[1, 5, 1]), 16);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseNet::zeros(&[1], Activation::Tanh).is_err());
        assert!(DenseNet::zeros(&[2, 3, 1], Activation::Tanh).is_err());
        assert!(DenseNet::zeros(&[1, 0, 1], Activation::Tanh).is_err());
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = DenseNet::zeros(&[1, 4, 4, 1], Activation::Tanh).unwrap();
        for t in [-3.0, 0.0, 1.0, 250.0] {
            assert_eq!(net.forward(t), 0.0);
        }
    }

    #[test]
    fn hand_evaluated_one_two_one() {
        let mut net = DenseNet::zeros(&[1, 2, 1], Activation::Tanh).unwrap();
        // w1 = [0.5, -1.0], b1 = [0.1, 0.2], w2 = [2.0, 3.0], b2 = -0.5
        net.set_params(&[0.5, -1.0, 0.1, 0.2, 2.0, 3.0, -0.5]).unwrap();
        let t = 0.7;
        let expect = 2.0 * (0.5f64 * t + 0.1).tanh() + 3.0 * (-t + 0.2f64).tanh() - 0.5;
        assert_relative_eq!(net.forward(t), expect, epsilon = 1e-15);
    }

    #[test]
    fn forward_is_deterministic() {
        let net = DenseNet::new(&[1, 8, 8, 1], Activation::Tanh, 9).unwrap();
        assert_eq!(net.forward(0.3).to_bits(), net.forward(0.3).to_bits());
    }

    #[test]
    fn linear_net_gradient() {
        let mut net = DenseNet::zeros(&[1, 1], Activation::Tanh).unwrap();
        net.set_params(&[1.7, -0.4]).unwrap();
        let pass = net.forward_batch(&[2.5]);
        let tape = net.backward(&pass, &[1.0]).unwrap();
        assert_eq!(tape.grads(), &[2.5, 1.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let net = DenseNet::new(&[1, 5, 1], Activation::Tanh, 3).unwrap();
        let pass = net.forward_batch(&[0.2, 0.4]);
        let tape = net.backward(&pass, &[0.0, 0.0]).unwrap();
        assert!(tape.grads().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn stale_pass_is_rejected() {
        let mut net = DenseNet::new(&[1, 5, 1], Activation::Tanh, 3).unwrap();
        let pass = net.forward_batch(&[0.2]);
        net.params_mut()[0] += 0.1;
        assert!(matches!(net.backward(&pass, &[1.0]), Err(NnError::StaleTape)));
        let other = DenseNet::new(&[1, 3, 1], Activation::Tanh, 3).unwrap();
        assert!(matches!(other.backward(&pass, &[1.0]), Err(NnError::StaleTape)));
    }

    #[test]
    fn upstream_length_checked() {
        let net = DenseNet::new(&[1, 5, 1], Activation::Tanh, 3).unwrap();
        let pass = net.forward_batch(&[0.2, 0.3]);
        assert!(net.backward(&pass, &[1.0]).is_err());
    }

    #[test]
    fn input_scaling_maps_window() {
        let s = InputScaling::unit_interval(1.0, 31.0);
        assert_eq!(s.map(1.0), 0.0);
        assert_eq!(s.map(31.0), 1.0);
    }
}
