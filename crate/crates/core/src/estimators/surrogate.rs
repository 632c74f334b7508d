//! Small perceptron regressor from an alignment matrix to its interaction map.
//!
//! Two hidden ReLU layers, trained with full-batch gradient descent with
//! momentum on mean squared error. Gradients are hand-derived; accumulation
//! order is fixed so training is reproducible bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cross_modal::AlignmentMatrix;
use crate::error::{Error, Result};
use crate::game::{InteractionMap, Method};
use crate::matrix::Matrix;

pub const DEFAULT_HIDDEN: usize = 64;
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MOMENTUM: f64 = 0.9;

/// Fully connected layer, `weights` is `outputs x inputs` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.random_range(-limit..limit))
                .collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(Error::DimensionMismatch(format!(
                "layer {}->{} has {} weights and {} biases",
                self.inputs,
                self.outputs,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self
            .weights
            .iter()
            .chain(&self.bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("model parameter".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub samples: usize,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub version: u32,
    /// `(N_v, N_t)` of the alignment matrices this model maps.
    pub shape: (usize, usize),
    pub hidden: usize,
    pub seed: u64,
    pub layers: [Dense; 3],
    #[serde(default)]
    pub training: Option<TrainingMeta>,
}

struct Activations {
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    y: Vec<f64>,
}

impl SurrogateModel {
    /// Glorot-uniform weights drawn from `seed`, zero biases.
    pub fn new(shape: (usize, usize), hidden: usize, seed: u64) -> Result<Self> {
        Self::check_shape(shape, hidden)?;
        let io = shape.0 * shape.1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = [
            Dense::glorot(io, hidden, &mut rng),
            Dense::glorot(hidden, hidden, &mut rng),
            Dense::glorot(hidden, io, &mut rng),
        ];
        Ok(SurrogateModel {
            version: MODEL_FORMAT_VERSION,
            shape,
            hidden,
            seed,
            layers,
            training: None,
        })
    }

    pub fn zeros(shape: (usize, usize), hidden: usize) -> Result<Self> {
        Self::check_shape(shape, hidden)?;
        let io = shape.0 * shape.1;
        Ok(SurrogateModel {
            version: MODEL_FORMAT_VERSION,
            shape,
            hidden,
            seed: 0,
            layers: [
                Dense::zeros(io, hidden),
                Dense::zeros(hidden, hidden),
                Dense::zeros(hidden, io),
            ],
            training: None,
        })
    }

    fn check_shape(shape: (usize, usize), hidden: usize) -> Result<()> {
        if shape.0 == 0 || shape.1 == 0 || hidden == 0 {
            return Err(Error::InvalidArgument(format!(
                "surrogate shape {shape:?} and hidden width {hidden} must be positive"
            )));
        }
        Ok(())
    }

    /// Checks internal consistency, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model version {} (expected {MODEL_FORMAT_VERSION})",
                self.version
            )));
        }
        Self::check_shape(self.shape, self.hidden)?;
        let io = self.shape.0 * self.shape.1;
        let expected = [
            (io, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, io),
        ];
        for (layer, (i, o)) in self.layers.iter().zip(expected) {
            if layer.inputs != i || layer.outputs != o {
                return Err(Error::DimensionMismatch(format!(
                    "layer is {}->{}, expected {i}->{o}",
                    layer.inputs, layer.outputs
                )));
            }
            layer.validate()?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    fn activations(&self, x: &[f64]) -> Activations {
        let [l1, l2, l3] = &self.layers;
        let mut z1 = vec![0.0; l1.outputs];
        l1.forward(x, &mut z1);
        let h1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let mut z2 = vec![0.0; l2.outputs];
        l2.forward(&h1, &mut z2);
        let h2: Vec<f64> = z2.iter().map(|v| v.max(0.0)).collect();
        let mut y = vec![0.0; l3.outputs];
        l3.forward(&h2, &mut y);
        Activations { z1, h1, z2, h2, y }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.activations(x).y
    }

    /// Mean squared error over every output entry of every sample, and its
    /// gradient with respect to [`Self::params`].
    pub fn loss_and_grad(&self, data: &[(Vec<f64>, Vec<f64>)]) -> (f64, Vec<f64>) {
        let mut grads: Vec<Dense> = self
            .layers
            .iter()
            .map(|l| Dense::zeros(l.inputs, l.outputs))
            .collect();
        let io = self.shape.0 * self.shape.1;
        let denom = (data.len() * io) as f64;
        let mut loss = 0.0;
        for (x, target) in data {
            let a = self.activations(x);
            let dy: Vec<f64> =
                a.y.iter()
                    .zip(target)
                    .map(|(y, t)| {
                        loss += (y - t) * (y - t);
                        2.0 * (y - t) / denom
                    })
                    .collect();
            let dh2 = backprop_layer(&self.layers[2], &mut grads[2], &a.h2, &dy);
            let dz2: Vec<f64> = dh2
                .iter()
                .zip(&a.z2)
                .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
                .collect();
            let dh1 = backprop_layer(&self.layers[1], &mut grads[1], &a.h1, &dz2);
            let dz1: Vec<f64> = dh1
                .iter()
                .zip(&a.z1)
                .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
                .collect();
            backprop_layer(&self.layers[0], &mut grads[0], x, &dz1);
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for g in &grads {
            flat.extend_from_slice(&g.weights);
            flat.extend_from_slice(&g.bias);
        }
        (loss / denom, flat)
    }

    pub fn mse(&self, data: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        let io = self.shape.0 * self.shape.1;
        let total: f64 = data
            .iter()
            .map(|(x, t)| {
                self.forward(x)
                    .iter()
                    .zip(t)
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
            })
            .sum();
        total / (data.len() * io) as f64
    }
}

/// Accumulates parameter gradients of `layer` and returns the gradient with
/// respect to its input.
fn backprop_layer(layer: &Dense, grad: &mut Dense, input: &[f64], dout: &[f64]) -> Vec<f64> {
    let mut din = vec![0.0; layer.inputs];
    for (o, &g) in dout.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grad.bias[o] += g;
        let row = o * layer.inputs;
        for (k, &x) in input.iter().enumerate() {
            grad.weights[row + k] += g * x;
            din[k] += g * layer.weights[row + k];
        }
    }
    din
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            learning_rate: 0.01,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: SurrogateModel,
    /// Training loss before each update.
    pub loss_trace: Vec<f64>,
}

/// Input and target vectors of one example.
type Example = (Vec<f64>, Vec<f64>);

pub(crate) fn flatten_dataset(
    dataset: &[(AlignmentMatrix, InteractionMap)],
) -> Result<((usize, usize), Vec<Example>)> {
    let (first, _) = dataset
        .first()
        .ok_or_else(|| Error::InvalidArgument("training dataset is empty".into()))?;
    let shape = first.matrix().shape();
    let mut data = Vec::with_capacity(dataset.len());
    for (k, (a, t)) in dataset.iter().enumerate() {
        if a.matrix().shape() != shape || t.shape() != shape {
            return Err(Error::DimensionMismatch(format!(
                "sample {k}: alignment {:?} and target {:?}, expected {shape:?}",
                a.matrix().shape(),
                t.shape()
            )));
        }
        data.push((a.matrix().as_slice().to_vec(), t.values.as_slice().to_vec()));
    }
    Ok((shape, data))
}

/// Fits a fresh model to `(alignment, exact interaction)` pairs.
pub fn surrogate_train(
    dataset: &[(AlignmentMatrix, InteractionMap)],
    cfg: &TrainConfig,
) -> Result<TrainingOutcome> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate {} must be positive",
            cfg.learning_rate
        )));
    }
    let (shape, data) = flatten_dataset(dataset)?;
    let mut model = SurrogateModel::new(shape, cfg.hidden, cfg.seed)?;
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = model.loss_and_grad(&data);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        trace.push(loss);
        for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
            *v = MOMENTUM * *v - cfg.learning_rate * g;
            *p += *v;
        }
        model.set_params(&params)?;
    }
    let final_loss = if cfg.epochs > 0 {
        let loss = model.mse(&data);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch: cfg.epochs,
                loss,
            });
        }
        Some(loss)
    } else {
        None
    };
    model.training = Some(TrainingMeta {
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        samples: data.len(),
        final_loss,
    });
    Ok(TrainingOutcome {
        model,
        loss_trace: trace,
    })
}

/// Estimated interaction map for one alignment matrix.
pub fn surrogate_predict(
    model: &SurrogateModel,
    alignment: &AlignmentMatrix,
) -> Result<InteractionMap> {
    if alignment.matrix().shape() != model.shape {
        return Err(Error::DimensionMismatch(format!(
            "model expects {:?} alignments, got {:?}",
            model.shape,
            alignment.matrix().shape()
        )));
    }
    let y = model.forward(alignment.matrix().as_slice());
    Ok(InteractionMap::new(
        Matrix::from_vec(model.shape.0, model.shape.1, y)?,
        Method::Surrogate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(seed: u64) -> (AlignmentMatrix, InteractionMap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        let t = Matrix::from_fn(2, 3, |_, _| rng.random_range(-0.5..0.5));
        (
            AlignmentMatrix::new(a).unwrap(),
            InteractionMap::new(t, Method::Exact),
        )
    }

    #[test]
    fn zero_model_predicts_zero() {
        let m = SurrogateModel::zeros((2, 3), 8).unwrap();
        let out = surrogate_predict(&m, &pair(0).0).unwrap();
        assert!(out.values.as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(out.method, Method::Surrogate);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = TrainConfig {
            epochs: 0,
            seed: 9,
            hidden: 16,
            ..TrainConfig::default()
        };
        let out = surrogate_train(&[pair(1)], &cfg).unwrap();
        let init = SurrogateModel::new((2, 3), 16, 9).unwrap();
        assert_eq!(out.model.layers, init.layers);
        assert!(out.loss_trace.is_empty());
    }

    #[test]
    fn memorizes_single_pair() {
        let cfg = TrainConfig {
            epochs: 3000,
            learning_rate: 0.01,
            seed: 5,
            hidden: DEFAULT_HIDDEN,
        };
        let sample = pair(2);
        let out = surrogate_train(std::slice::from_ref(&sample), &cfg).unwrap();
        let last = *out.loss_trace.last().unwrap();
        let final_loss = out.model.training.as_ref().unwrap().final_loss.unwrap();
        assert!(
            final_loss < 1e-6,
            "final mse {final_loss}, last trace {last}"
        );
        let pred = surrogate_predict(&out.model, &sample.0).unwrap();
        for (p, t) in pred
            .values
            .as_slice()
            .iter()
            .zip(sample.1.values.as_slice())
        {
            assert!((p - t).abs() <= 1e-3);
        }
    }

    #[test]
    fn deterministic_training() {
        let cfg = TrainConfig {
            epochs: 50,
            hidden: 12,
            ..TrainConfig::default()
        };
        let data = [pair(3), pair(4)];
        let a = surrogate_train(&data, &cfg).unwrap();
        let b = surrogate_train(&data, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainConfig {
            epochs: 500,
            learning_rate: 1e6,
            hidden: 8,
            seed: 1,
        };
        match surrogate_train(&[pair(5), pair(6)], &cfg) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn shape_errors() {
        let m = SurrogateModel::new((2, 3), 4, 0).unwrap();
        let wrong = AlignmentMatrix::new(Matrix::zeros(3, 2)).unwrap();
        assert!(surrogate_predict(&m, &wrong).is_err());
        let mismatched = (
            AlignmentMatrix::new(Matrix::zeros(3, 2)).unwrap(),
            InteractionMap::new(Matrix::zeros(3, 2), Method::Exact),
        );
        assert!(surrogate_train(&[pair(0), mismatched], &TrainConfig::default()).is_err());
        assert!(surrogate_train(&[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = SurrogateModel::new((2, 2), 5, 3).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: SurrogateModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        back.validate().unwrap();
        let mut broken = back;
        broken.layers[1].bias.pop();
        assert!(broken.validate().is_err());
    }
}
