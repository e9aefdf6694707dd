use serde::{Deserialize, Serialize};

use super::{Activation, DenseNet, InputScaling, NnError, OutputScaling};

/// Portable form of a [`DenseNet`].
///
/// `weights[l]` is layer `l`'s `out × in` matrix flattened row-major and
/// `biases[l]` its bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
    pub input_scaling: InputScaling,
    #[serde(default)]
    pub output_scaling: OutputScaling,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<&DenseNet> for NetworkRecord {
    fn from(net: &DenseNet) -> Self {
        let layers = net.layer_count();
        NetworkRecord {
            layer_sizes: net.layer_sizes().to_vec(),
            activation: net.activation(),
            seed: net.seed(),
            input_scaling: net.input_scaling(),
            output_scaling: net.output_scaling(),
            weights: (0..layers).map(|l| net.weights(l).iter().copied().collect()).collect(),
            biases: (0..layers).map(|l| net.bias(l).to_vec()).collect(),
        }
    }
}

impl TryFrom<&NetworkRecord> for DenseNet {
    type Error = NnError;

    fn try_from(rec: &NetworkRecord) -> Result<Self, Self::Error> {
        let mut net = DenseNet::zeros(&rec.layer_sizes, rec.activation)?
            .with_input_scaling(rec.input_scaling)
            .with_output_scaling(rec.output_scaling);
        let layers = net.layer_count();
        if rec.weights.len() != layers || rec.biases.len() != layers {
            return Err(NnError::Shape(format!(
                "record has {} weight and {} bias blocks for {layers} layers",
                rec.weights.len(),
                rec.biases.len()
            )));
        }
        let mut flat = Vec::with_capacity(net.param_count());
        for l in 0..layers {
            let (fan_in, fan_out) = (rec.layer_sizes[l], rec.layer_sizes[l + 1]);
            if rec.weights[l].len() != fan_in * fan_out || rec.biases[l].len() != fan_out {
                return Err(NnError::Shape(format!("layer {l} block sizes do not match")));
            }
            flat.extend_from_slice(&rec.weights[l]);
            flat.extend_from_slice(&rec.biases[l]);
        }
        net.set_params(&flat)?;
        net.set_seed(rec.seed);
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_json() {
        let net = DenseNet::new(&[1, 6, 3, 1], Activation::Tanh, 77)
            .unwrap()
            .with_input_scaling(InputScaling::unit_interval(1.0, 30.0));
        let json = serde_json::to_string(&NetworkRecord::from(&net)).unwrap();
        let back: NetworkRecord = serde_json::from_str(&json).unwrap();
        let restored = DenseNet::try_from(&back).unwrap();
        assert_eq!(restored.params(), net.params());
        assert_eq!(restored.seed(), 77);
        for t in [1.0, 4.5, 30.0] {
            assert_eq!(restored.forward(t).to_bits(), net.forward(t).to_bits());
        }
    }

    #[test]
    fn rejects_truncated_record() {
        let net = DenseNet::new(&[1, 4, 1], Activation::Tanh, 1).unwrap();
        let mut rec = NetworkRecord::from(&net);
        rec.weights[0].pop();
        assert!(DenseNet::try_from(&rec).is_err());
    }
}
