//! Multilayer perceptron with z-normalized inputs/outputs and resilient
//! backpropagation (RPROP-, no weight backtracking) batch training.
//!
//! The network proper maps z-normalized inputs to z-normalized outputs;
//! [`MlpModel::forward`] wraps it with the stored normalizations so callers
//! deal in raw feature/target units. The training loss is the batch-mean
//! over patterns of the summed squared error of the z-normalized outputs,
//! and model selection returns the epoch snapshot with the best validation
//! loss.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math;

/// Components with standard deviation below this are treated as constant
/// and get unit scale so normalization stays a bijection.
const STD_FLOOR: f64 = 1e-12;

/// A batch of patterns: one inner vector per sample.
pub type Patterns = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub enum MlpError {
    BadTopology,
    DimensionMismatch { expected: usize, got: usize },
    EmptyBatch,
    BatchLengthMismatch,
    ParamCountMismatch { expected: usize, got: usize },
    BadConfig { what: &'static str },
    NonFiniteLoss { epoch: usize },
}

impl core::fmt::Display for MlpError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MlpError::BadTopology => f.write_str("topology needs >= 2 layer sizes, all nonzero"),
            MlpError::DimensionMismatch { expected, got } => {
                write!(f, "expected a vector of length {expected}, got {got}")
            }
            MlpError::EmptyBatch => f.write_str("batch is empty"),
            MlpError::BatchLengthMismatch => f.write_str("inputs and targets differ in count"),
            MlpError::ParamCountMismatch { expected, got } => {
                write!(f, "expected {expected} parameters, got {got}")
            }
            MlpError::BadConfig { what } => write!(f, "invalid training config: {what}"),
            MlpError::NonFiniteLoss { epoch } => {
                write!(f, "loss became non-finite at epoch {epoch}")
            }
        }
    }
}

impl core::error::Error for MlpError {}

/// Hidden-layer activation. The output layer is always identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Identity,
    Gaussian,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
            Activation::Gaussian => "gaussian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            "gaussian" => Some(Activation::Gaussian),
            _ => None,
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                // Branch keeps exp() argument non-positive for stability.
                if x >= 0.0 {
                    1.0 / (1.0 + math::exp(-x))
                } else {
                    let e = math::exp(x);
                    e / (1.0 + e)
                }
            }
            Activation::Identity => x,
            Activation::Gaussian => math::exp(-(x * x)),
        }
    }

    /// Derivative given the pre-activation and the already-computed value.
    fn derivative(&self, x: f64, fx: f64) -> f64 {
        match self {
            Activation::Sigmoid => fx * (1.0 - fx),
            Activation::Identity => 1.0,
            Activation::Gaussian => -2.0 * x * fx,
        }
    }
}

impl core::fmt::Display for Activation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-component affine standardization to zero mean, unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Normalization {
    /// Fits mean and (population) standard deviation per component.
    /// Near-constant components get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, MlpError> {
        if rows.is_empty() {
            return Err(MlpError::EmptyBatch);
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(MlpError::BatchLengthMismatch);
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .iter()
            .map(|&s| {
                let sd = math::sqrt(s / n);
                if sd < STD_FLOOR {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// The do-nothing normalization (mean 0, scale 1).
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, MlpError> {
        if mean.len() != std.len() {
            return Err(MlpError::DimensionMismatch { expected: mean.len(), got: std.len() });
        }
        if std.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(MlpError::BadConfig { what: "normalization scale must be positive" });
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn normalize(&self, v: &mut [f64]) {
        for ((x, m), s) in v.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = (*x - m) / s;
        }
    }

    pub fn denormalize(&self, v: &mut [f64]) {
        for ((x, m), s) in v.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = *x * s + m;
        }
    }
}

/// One fully-connected layer: `out = act(W . a + b)` with `W` stored
/// row-major, one row per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Vec<f64>,
    biases: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Row-major `out_dim x in_dim`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// `z = W a + b` written into `out`.
    fn affine(&self, a: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.in_dim).zip(&self.biases))
        {
            *o = b + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

/// A trained (or freshly initialized) perceptron together with the
/// normalizations of its raw input and output spaces. Immutable during
/// inference and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    layers: Vec<Layer>,
    input_norm: Normalization,
    output_norm: Normalization,
}

impl MlpModel {
    /// Fresh model with weights and biases drawn uniformly from
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` and identity normalizations.
    pub fn new_random(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, MlpError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(MlpError::BadTopology);
        }
        let layers = layer_sizes
            .windows(2)
            .map(|pair| {
                let (in_dim, out_dim) = (pair[0], pair[1]);
                let bound = 1.0 / math::sqrt(in_dim as f64);
                let weights =
                    (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..=bound)).collect();
                let biases = (0..out_dim).map(|_| rng.gen_range(-bound..=bound)).collect();
                Layer { weights, biases, in_dim, out_dim }
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation,
            layers,
            input_norm: Normalization::identity(layer_sizes[0]),
            output_norm: Normalization::identity(layer_sizes[layer_sizes.len() - 1]),
        })
    }

    /// Rebuilds a model from serialized pieces, validating shapes.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        layer_params: Vec<(Vec<f64>, Vec<f64>)>,
        input_norm: Normalization,
        output_norm: Normalization,
    ) -> Result<Self, MlpError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(MlpError::BadTopology);
        }
        if layer_params.len() != layer_sizes.len() - 1 {
            return Err(MlpError::BadTopology);
        }
        let mut layers = Vec::with_capacity(layer_params.len());
        for (pair, (weights, biases)) in layer_sizes.windows(2).zip(layer_params) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            if weights.len() != in_dim * out_dim {
                return Err(MlpError::ParamCountMismatch {
                    expected: in_dim * out_dim,
                    got: weights.len(),
                });
            }
            if biases.len() != out_dim {
                return Err(MlpError::ParamCountMismatch { expected: out_dim, got: biases.len() });
            }
            layers.push(Layer { weights, biases, in_dim, out_dim });
        }
        if input_norm.dim() != layer_sizes[0] {
            return Err(MlpError::DimensionMismatch {
                expected: layer_sizes[0],
                got: input_norm.dim(),
            });
        }
        if output_norm.dim() != layer_sizes[layer_sizes.len() - 1] {
            return Err(MlpError::DimensionMismatch {
                expected: layer_sizes[layer_sizes.len() - 1],
                got: output_norm.dim(),
            });
        }
        Ok(Self { layer_sizes, hidden_activation, layers, input_norm, output_norm })
    }

    pub fn topology(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_norm(&self) -> &Normalization {
        &self.input_norm
    }

    pub fn output_norm(&self) -> &Normalization {
        &self.output_norm
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 1]
    }

    pub fn set_norms(&mut self, input: Normalization, output: Normalization) -> Result<(), MlpError> {
        if input.dim() != self.input_dim() {
            return Err(MlpError::DimensionMismatch { expected: self.input_dim(), got: input.dim() });
        }
        if output.dim() != self.output_dim() {
            return Err(MlpError::DimensionMismatch {
                expected: self.output_dim(),
                got: output.dim(),
            });
        }
        self.input_norm = input;
        self.output_norm = output;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    /// Overwrites all parameters from the flat layout of [`Self::params`].
    pub fn set_params(&mut self, params: &[f64]) -> Result<(), MlpError> {
        if params.len() != self.param_count() {
            return Err(MlpError::ParamCountMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut at = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Raw input to raw output: z-normalize, propagate, de-normalize.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        if input.len() != self.input_dim() {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut x = input.to_vec();
        self.input_norm.normalize(&mut x);
        let mut out = self.forward_normalized(&x);
        self.output_norm.denormalize(&mut out);
        Ok(out)
    }

    /// Network proper: normalized input to normalized output.
    fn forward_normalized(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.out_dim];
            layer.affine(&a, &mut z);
            if l < last {
                for v in z.iter_mut() {
                    *v = self.hidden_activation.apply(*v);
                }
            }
            a = z;
        }
        a
    }

    /// Batch-mean over patterns of the summed squared error of the
    /// z-normalized outputs. Inputs and targets are raw.
    pub fn batch_loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, MlpError> {
        let (x, t) = self.normalized_batch(inputs, targets)?;
        Ok(self.loss_prenormalized(&x, &t))
    }

    fn normalized_batch(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<(Patterns, Patterns), MlpError> {
        if inputs.is_empty() {
            return Err(MlpError::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(MlpError::BatchLengthMismatch);
        }
        let mut xs = Vec::with_capacity(inputs.len());
        let mut ts = Vec::with_capacity(targets.len());
        for (input, target) in inputs.iter().zip(targets) {
            if input.len() != self.input_dim() {
                return Err(MlpError::DimensionMismatch {
                    expected: self.input_dim(),
                    got: input.len(),
                });
            }
            if target.len() != self.output_dim() {
                return Err(MlpError::DimensionMismatch {
                    expected: self.output_dim(),
                    got: target.len(),
                });
            }
            let mut x = input.clone();
            self.input_norm.normalize(&mut x);
            let mut t = target.clone();
            self.output_norm.normalize(&mut t);
            xs.push(x);
            ts.push(t);
        }
        Ok((xs, ts))
    }

    fn loss_prenormalized(&self, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> f64 {
        let mut acc = 0.0;
        for (x, t) in xs.iter().zip(ts) {
            let out = self.forward_normalized(x);
            acc += out.iter().zip(t).map(|(o, y)| (o - y) * (o - y)).sum::<f64>();
        }
        acc / xs.len() as f64
    }

    /// Exact backpropagation gradient of [`Self::batch_loss`] with respect
    /// to the flat parameter vector. Returns `(gradient, loss)`.
    pub fn gradient(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<(Vec<f64>, f64), MlpError> {
        let (xs, ts) = self.normalized_batch(inputs, targets)?;
        Ok(self.gradient_prenormalized(&xs, &ts))
    }

    /// Backprop core on pre-normalized patterns (training fast path).
    fn gradient_prenormalized(&self, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> (Vec<f64>, f64) {
        let n_layers = self.layers.len();
        let batch = xs.len() as f64;
        let mut grad = vec![0.0; self.param_count()];
        // Flat offsets of each layer's weight block.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut at = 0;
        for layer in &self.layers {
            offsets.push(at);
            at += layer.param_count();
        }
        // activations[0] = input, activations[l+1] = output of layer l.
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(Vec::new());
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        for layer in &self.layers {
            pre.push(vec![0.0; layer.out_dim]);
            activations.push(vec![0.0; layer.out_dim]);
        }
        let mut loss = 0.0;
        for (x, t) in xs.iter().zip(ts) {
            activations[0] = x.clone();
            for (l, layer) in self.layers.iter().enumerate() {
                let (head, tail) = activations.split_at_mut(l + 1);
                layer.affine(&head[l], &mut pre[l]);
                let act = &mut tail[0];
                if l < n_layers - 1 {
                    for (a, &z) in act.iter_mut().zip(&pre[l]) {
                        *a = self.hidden_activation.apply(z);
                    }
                } else {
                    act.copy_from_slice(&pre[l]);
                }
            }
            let out = &activations[n_layers];
            loss += out.iter().zip(t).map(|(o, y)| (o - y) * (o - y)).sum::<f64>();
            // delta = dL/dz per layer, walked backward.
            let mut delta: Vec<f64> =
                out.iter().zip(t).map(|(o, y)| 2.0 * (o - y) / batch).collect();
            for l in (0..n_layers).rev() {
                let layer = &self.layers[l];
                if l < n_layers - 1 {
                    for ((d, &z), &a) in
                        delta.iter_mut().zip(&pre[l]).zip(&activations[l + 1])
                    {
                        *d *= self.hidden_activation.derivative(z, a);
                    }
                }
                let a_in = &activations[l];
                let base = offsets[l];
                for (row, &d) in delta.iter().enumerate() {
                    let wbase = base + row * layer.in_dim;
                    for (k, &a) in a_in.iter().enumerate() {
                        grad[wbase + k] += d * a;
                    }
                    grad[base + layer.weights.len() + row] += d;
                }
                if l > 0 {
                    let mut prev = vec![0.0; layer.in_dim];
                    for (row, &d) in delta.iter().enumerate() {
                        let wrow = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                        for (p, &w) in prev.iter_mut().zip(wrow) {
                            *p += w * d;
                        }
                    }
                    delta = prev;
                }
            }
        }
        (grad, loss / batch)
    }
}

/// RPROP- hyperparameters and training protocol knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct RpropConfig {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta0: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Fraction of patterns held out for validation-based model selection.
    /// Zero keeps everything in training and selects on training loss.
    pub validation_fraction: f64,
    /// Stop after this many epochs without a new best validation loss.
    /// `None` always runs `max_epochs`.
    pub patience: Option<usize>,
}

impl Default for RpropConfig {
    fn default() -> Self {
        Self {
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta0: 0.1,
            delta_min: 1e-6,
            delta_max: 50.0,
            max_epochs: 300,
            seed: 0,
            validation_fraction: 0.3,
            patience: None,
        }
    }
}

impl RpropConfig {
    fn validate(&self) -> Result<(), MlpError> {
        if !(self.eta_minus > 0.0 && self.eta_minus < 1.0 && self.eta_plus > 1.0) {
            return Err(MlpError::BadConfig { what: "need 0 < eta_minus < 1 < eta_plus" });
        }
        if !(self.delta_min > 0.0
            && self.delta_min <= self.delta0
            && self.delta0 <= self.delta_max)
        {
            return Err(MlpError::BadConfig { what: "need 0 < delta_min <= delta0 <= delta_max" });
        }
        if self.max_epochs == 0 {
            return Err(MlpError::BadConfig { what: "max_epochs must be >= 1" });
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(MlpError::BadConfig { what: "validation_fraction must be in [0, 1)" });
        }
        Ok(())
    }
}

/// Everything `train_rprop` learned, including the loss curves for
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub model: MlpModel,
    /// Training loss of the parameters entering each epoch.
    pub train_curve: Vec<f64>,
    /// Selection loss (validation, or training when no holdout) after each
    /// epoch's update.
    pub validation_curve: Vec<f64>,
    pub best_epoch: usize,
    pub best_validation_mse: f64,
}

/// Trains a fresh model with RPROP-: per-parameter steps grow by
/// `eta_plus` on gradient-sign agreement and shrink by `eta_minus` on a
/// sign flip (the flip also zeroes the stored gradient, so that step makes
/// no move); every step stays inside `[delta_min, delta_max]`; parameters
/// move by `-sign(gradient) * step`. Model selection snapshots the best
/// validation loss; the input/output normalizations are fitted on the
/// training split only. Deterministic for a fixed config.
pub fn train_rprop(
    layer_sizes: &[usize],
    hidden_activation: Activation,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    config: &RpropConfig,
) -> Result<TrainingOutcome, MlpError> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(MlpError::EmptyBatch);
    }
    if inputs.len() != targets.len() {
        return Err(MlpError::BatchLengthMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = inputs.len();
    let held = math::round(n as f64 * config.validation_fraction) as usize;
    if held >= n {
        return Err(MlpError::BadConfig { what: "validation holdout leaves no training data" });
    }
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let val_idx = order.split_off(n - held);
    let train_idx = order;

    let mut model = MlpModel::new_random(layer_sizes, hidden_activation, &mut rng)?;
    let train_inputs: Vec<Vec<f64>> = train_idx.iter().map(|&i| inputs[i].clone()).collect();
    let train_targets: Vec<Vec<f64>> = train_idx.iter().map(|&i| targets[i].clone()).collect();
    model.set_norms(
        Normalization::fit(&train_inputs)?,
        Normalization::fit(&train_targets)?,
    )?;

    // Pre-normalize once; training runs entirely in normalized space.
    let (train_x, train_t) = model.normalized_batch(&train_inputs, &train_targets)?;
    let (val_x, val_t) = if val_idx.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let vi: Vec<Vec<f64>> = val_idx.iter().map(|&i| inputs[i].clone()).collect();
        let vt: Vec<Vec<f64>> = val_idx.iter().map(|&i| targets[i].clone()).collect();
        model.normalized_batch(&vi, &vt)?
    };

    let mut params = model.params();
    let mut steps = vec![config.delta0; params.len()];
    let mut prev_grad = vec![0.0; params.len()];

    let mut train_curve = Vec::with_capacity(config.max_epochs);
    let mut validation_curve = Vec::with_capacity(config.max_epochs);
    let mut best_params = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;

    for epoch in 0..config.max_epochs {
        let (grad, loss) = model.gradient_prenormalized(&train_x, &train_t);
        if !loss.is_finite() {
            return Err(MlpError::NonFiniteLoss { epoch });
        }
        train_curve.push(loss);

        for i in 0..params.len() {
            let mut g = grad[i];
            let product = prev_grad[i] * g;
            if product > 0.0 {
                steps[i] = (steps[i] * config.eta_plus).min(config.delta_max);
            } else if product < 0.0 {
                steps[i] = (steps[i] * config.eta_minus).max(config.delta_min);
                g = 0.0; // flip: adapt the step, skip the move this epoch
            }
            params[i] -= math::sign(g) * steps[i];
            prev_grad[i] = g;
        }
        model.set_params(&params)?;

        let selection_loss = if val_x.is_empty() {
            model.loss_prenormalized(&train_x, &train_t)
        } else {
            model.loss_prenormalized(&val_x, &val_t)
        };
        if !selection_loss.is_finite() {
            return Err(MlpError::NonFiniteLoss { epoch });
        }
        validation_curve.push(selection_loss);
        if selection_loss < best_loss {
            best_loss = selection_loss;
            best_epoch = epoch;
            best_params.copy_from_slice(&params);
        }
        if let Some(patience) = config.patience {
            if epoch - best_epoch >= patience {
                break;
            }
        }
    }

    model.set_params(&best_params)?;
    Ok(TrainingOutcome {
        model,
        train_curve,
        validation_curve,
        best_epoch,
        best_validation_mse: best_loss,
    })
}

/// Validation-space loss of an already-trained model on raw patterns
/// (normalized with the model's stored statistics) — the same quantity
/// training selects on.
pub fn normalized_mse(
    model: &MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<f64, MlpError> {
    model.batch_loss(inputs, targets)
}
