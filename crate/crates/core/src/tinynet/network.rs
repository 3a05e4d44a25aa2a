use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{self, sigmoid, LayerSpec};
use super::{NetError, Tensor};

/// Per-feature z-score constants applied to raw inputs before the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Fits mean and population standard deviation per column. Columns with
    /// zero spread get a unit divisor.
    pub fn fit(rows: &[Vec<f64>]) -> Option<Self> {
        let first = rows.first()?;
        let n = rows.len() as f64;
        let dims = first.len();
        let mut mean = vec![0.0; dims];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dims];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Some(Self { mean, std })
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub architecture: String,
    pub seed: u64,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardization>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl ModelMetadata {
    pub fn new(architecture: impl Into<String>, seed: u64) -> Self {
        Self {
            architecture: architecture.into(),
            seed,
            ..Default::default()
        }
    }
}

/// A feed-forward network: layer list, parameters and metadata.
///
/// Every model ends in a `Sigmoid` producing one value; the constructors
/// reject anything else.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    params: Vec<Vec<Tensor>>,
    shapes: Vec<Vec<usize>>,
    pub metadata: ModelMetadata,
}

fn infer_shapes(input_shape: &[usize], layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>, NetError> {
    if input_shape.is_empty() || input_shape.contains(&0) {
        return Err(NetError::Architecture(format!(
            "input shape {input_shape:?} must be non-empty with positive dims"
        )));
    }
    let mut shapes = vec![input_shape.to_vec()];
    for (i, l) in layers.iter().enumerate() {
        let next = l
            .output_shape(shapes.last().expect("non-empty"))
            .map_err(|message| NetError::Architecture(format!("layer {i} ({}): {message}", l.name())))?;
        shapes.push(next);
    }
    match layers.last() {
        Some(LayerSpec::Sigmoid) => {}
        _ => {
            return Err(NetError::Architecture(
                "the last layer must be Sigmoid".into(),
            ))
        }
    }
    let out: usize = shapes.last().expect("non-empty").iter().product();
    if out != 1 {
        return Err(NetError::Architecture(format!(
            "the network must produce one value, got {out}"
        )));
    }
    Ok(shapes)
}

impl NetworkModel {
    /// Builds a model with Glorot-uniform weights drawn from a ChaCha8 stream
    /// seeded with `seed`, and zero biases.
    pub fn new(
        input_shape: Vec<usize>,
        layers: Vec<LayerSpec>,
        architecture: impl Into<String>,
        seed: u64,
    ) -> Result<Self, NetError> {
        let shapes = infer_shapes(&input_shape, &layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layers
            .iter()
            .map(|l| {
                let mut tensors: Vec<Tensor> = l.param_shapes().into_iter().map(Tensor::zeros).collect();
                if let (Some((fan_in, fan_out)), Some(w)) = (l.fans(), tensors.first_mut()) {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for v in w.data_mut() {
                        *v = rng.random_range(-limit..=limit);
                    }
                }
                tensors
            })
            .collect();
        Ok(Self {
            input_shape,
            layers,
            params,
            shapes,
            metadata: ModelMetadata::new(architecture, seed),
        })
    }

    /// Builds a model from explicit parameters, checking every tensor shape.
    pub fn from_parts(
        input_shape: Vec<usize>,
        layers: Vec<LayerSpec>,
        params: Vec<Vec<Tensor>>,
        metadata: ModelMetadata,
    ) -> Result<Self, NetError> {
        let shapes = infer_shapes(&input_shape, &layers)?;
        if params.len() != layers.len() {
            return Err(NetError::Architecture(format!(
                "{} parameter groups for {} layers",
                params.len(),
                layers.len()
            )));
        }
        for (i, (l, p)) in layers.iter().zip(&params).enumerate() {
            let expected = l.param_shapes();
            let found: Vec<Vec<usize>> = p.iter().map(|t| t.shape().to_vec()).collect();
            if expected != found {
                return Err(NetError::Architecture(format!(
                    "layer {i} parameters have shapes {found:?}, expected {expected:?}"
                )));
            }
        }
        Ok(Self {
            input_shape,
            layers,
            params,
            shapes,
            metadata,
        })
    }

    /// Copy with every weight and bias set to zero.
    pub fn zeroed(&self) -> Self {
        let mut copy = self.clone();
        for t in copy.params.iter_mut().flatten() {
            t.data_mut().fill(0.0);
        }
        copy
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Vec<Tensor>] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Vec<Tensor>] {
        &mut self.params
    }

    /// Activation shapes: the input followed by every layer's output.
    pub fn activation_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().flatten().map(Tensor::len).sum()
    }

    fn check_input(&self, input: &Tensor) -> Result<(), NetError> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(NetError::Shape {
                layer: 0,
                expected: self.input_shape.clone(),
                found: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Quality score in `(0, 1)`.
    pub fn forward(&self, input: &Tensor) -> Result<f64, NetError> {
        let z = self.logit(input)?;
        Ok(sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }

    /// Pre-sigmoid output.
    pub fn logit(&self, input: &Tensor) -> Result<f64, NetError> {
        self.check_input(input)?;
        let mut act = input.data().to_vec();
        for i in 0..self.layers.len() - 1 {
            act = layer::forward(&self.layers[i], &self.shapes[i], &self.params[i], &act);
        }
        Ok(act[0])
    }

    /// Input followed by the output of every layer before the final sigmoid.
    pub fn activations(&self, input: &Tensor) -> Result<Vec<Vec<f64>>, NetError> {
        self.check_input(input)?;
        Ok(self.trace(input.data()))
    }

    /// Runs every layer except the final sigmoid, keeping each activation.
    pub(crate) fn trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(input.to_vec());
        for i in 0..self.layers.len() - 1 {
            let next = layer::forward(&self.layers[i], &self.shapes[i], &self.params[i], &acts[i]);
            acts.push(next);
        }
        acts
    }

    /// [`Self::trace`] for a batch, indexed `[layer][sample]`.
    pub(crate) fn trace_batch(&self, inputs: Vec<Vec<f64>>) -> Vec<Vec<Vec<f64>>> {
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(inputs);
        for i in 0..self.layers.len() - 1 {
            let next = match &self.layers[i] {
                LayerSpec::Dense { out_units, .. } => {
                    layer::dense_forward_batch(&self.params[i], *out_units, &acts[i])
                }
                spec => acts[i]
                    .iter()
                    .map(|a| layer::forward(spec, &self.shapes[i], &self.params[i], a))
                    .collect(),
            };
            acts.push(next);
        }
        acts
    }

    /// [`Self::backprop`] for a batch traced by [`Self::trace_batch`]. Each
    /// gradient entry is summed in sample order.
    pub(crate) fn backprop_batch(&self, acts: &[Vec<Vec<f64>>], dlogits: &[f64], grads: &mut [Vec<Vec<f64>>]) {
        let last = self.layers.len() - 1;
        let mut grad: Vec<Vec<f64>> = dlogits.iter().map(|&d| vec![d]).collect();
        let lowest = self
            .layers
            .iter()
            .position(|l| l.fans().is_some())
            .unwrap_or(last);
        for i in (lowest..last).rev() {
            grad = match &self.layers[i] {
                LayerSpec::Dense { out_units, .. } => layer::dense_backward_batch(
                    &self.params[i],
                    *out_units,
                    &acts[i],
                    &grad,
                    &mut grads[i],
                    i > lowest,
                ),
                spec => (0..grad.len())
                    .map(|b| {
                        layer::backward(
                            spec,
                            &self.shapes[i],
                            &self.params[i],
                            &acts[i][b],
                            &acts[i + 1][b],
                            &grad[b],
                            &mut grads[i],
                            i > lowest,
                        )
                    })
                    .collect(),
            };
        }
    }

    pub(crate) fn zero_grads(&self) -> Vec<Vec<Vec<f64>>> {
        self.params
            .iter()
            .map(|p| p.iter().map(|t| vec![0.0; t.len()]).collect())
            .collect()
    }

    /// Adds d(loss)/d(params) into `grads` given the trace and d(loss)/d(logit).
    pub(crate) fn backprop(&self, acts: &[Vec<f64>], dlogit: f64, grads: &mut [Vec<Vec<f64>>]) {
        let last = self.layers.len() - 1;
        let mut grad = vec![dlogit];
        // first layer with parameters; nothing below it needs an input gradient
        let lowest = self
            .layers
            .iter()
            .position(|l| l.fans().is_some())
            .unwrap_or(last);
        for i in (lowest..last).rev() {
            grad = layer::backward(
                &self.layers[i],
                &self.shapes[i],
                &self.params[i],
                &acts[i],
                &acts[i + 1],
                &grad,
                &mut grads[i],
                i > lowest,
            );
        }
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `target`, evaluated from the
/// logit so it never overflows.
pub(crate) fn bce_from_logit(z: f64, target: f64) -> f64 {
    // softplus(z) - target * z
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - target * z
}
