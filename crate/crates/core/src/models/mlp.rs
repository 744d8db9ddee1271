//! Feed-forward neural network trained with mini-batch Adam.
//!
//! ReLU hidden layers, a linear output layer and mean squared error over
//! every output jointly. Training shuffles each epoch with its own seeded
//! generator, tracks the validation loss after every epoch, and returns the
//! parameters from the epoch where validation was lowest (strict
//! improvement), not the final ones. Everything is plain `f64` loops —
//! single-threaded on purpose, so a given seed always reproduces the same
//! weights bit for bit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Matrix;

/// Network and optimizer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Hidden layer widths; empty means a plain linear model.
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![23, 23, 22, 22],
            learning_rate: 1e-4,
            epochs: 2000,
            batch_size: 256,
            seed: 7,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("hidden layer of width 0".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// One dense layer: `weights` is `[outputs x inputs]` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

/// A trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<LayerParams>,
}

impl MlpModel {
    pub fn n_inputs(&self) -> usize {
        self.layers[0].weights.cols
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().expect("at least one layer").weights.rows
    }

    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let input = Matrix {
            rows: 1,
            cols: row.len(),
            data: row.to_vec(),
        };
        let acts = forward_batch(self, &input);
        acts.last().expect("output activation").data.clone()
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Matrix {
        forward_batch(self, x).pop().expect("output activation")
    }

    /// Mean squared error over all rows and output dimensions.
    pub fn mse(&self, x: &Matrix, y: &Matrix) -> f64 {
        let pred = self.predict_matrix(x);
        let mut total = 0.0;
        for (p, t) in pred.data.iter().zip(&y.data) {
            let e = p - t;
            total += e * e;
        }
        total / (y.rows * y.cols) as f64
    }

    /// Batch MSE and its analytic gradients, per layer in parameter shape.
    ///
    /// Exists so external harnesses can cross-check backpropagation against
    /// finite differences; training itself uses the internal fused path.
    pub fn loss_and_gradients(&self, x: &Matrix, y: &Matrix) -> (f64, Vec<LayerParams>) {
        let mut grads = Gradients::zeros_like(self);
        let loss = batch_loss_and_grads(self, x, y, &mut grads);
        let layers = grads
            .weights
            .into_iter()
            .zip(grads.biases)
            .map(|(weights, biases)| LayerParams { weights, biases })
            .collect();
        (loss, layers)
    }
}

/// Loss curves and checkpoint bookkeeping from one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training MSE of each epoch (measured on the pre-update forward
    /// passes of its batches).
    pub train_loss: Vec<f64>,
    /// Full-pass validation MSE after each epoch.
    pub validation_loss: Vec<f64>,
    /// Epoch index (0-based) whose parameters were returned.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
}

/// Activations of every layer for a batch: `[input, hidden..., output]`.
fn forward_batch(model: &MlpModel, input: &Matrix) -> Vec<Matrix> {
    let n_layers = model.layers.len();
    let mut acts = Vec::with_capacity(n_layers + 1);
    acts.push(input.clone());
    for (l, layer) in model.layers.iter().enumerate() {
        let prev = acts.last().expect("previous activation");
        let out_dim = layer.weights.rows;
        let mut a = Matrix::zeros(prev.rows, out_dim);
        let last = l == n_layers - 1;
        for b in 0..prev.rows {
            let x = prev.row(b);
            let out = a.row_mut(b);
            for (o, slot) in out.iter_mut().enumerate() {
                let w = layer.weights.row(o);
                let mut z = layer.biases[o];
                for (wi, xi) in w.iter().zip(x) {
                    z += wi * xi;
                }
                *slot = if last { z } else { z.max(0.0) };
            }
        }
        acts.push(a);
    }
    acts
}

/// Per-layer gradients, same shapes as the parameters.
struct Gradients {
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.weights.rows, l.weights.cols))
                .collect(),
            biases: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.biases.len()])
                .collect(),
        }
    }
}

/// Forward + backward over one batch. Returns the batch MSE and fills
/// `grads` with the gradients of that MSE.
fn batch_loss_and_grads(model: &MlpModel, bx: &Matrix, by: &Matrix, grads: &mut Gradients) -> f64 {
    let acts = forward_batch(model, bx);
    let b = bx.rows;
    let k = by.cols;
    let norm = 1.0 / (b * k) as f64;
    let output = acts.last().expect("output activation");
    let mut loss = 0.0;
    let mut delta = Matrix::zeros(b, k);
    for i in 0..b {
        let (po, to, do_) = (output.row(i), by.row(i), delta.row_mut(i));
        for ((p, t), d) in po.iter().zip(to).zip(do_) {
            let e = p - t;
            loss += e * e;
            *d = 2.0 * e * norm;
        }
    }
    loss *= norm;

    for l in (0..model.layers.len()).rev() {
        let a_prev = &acts[l];
        let gw = &mut grads.weights[l];
        gw.data.fill(0.0);
        let gb = &mut grads.biases[l];
        gb.fill(0.0);
        for i in 0..b {
            let drow = delta.row(i);
            let arow = a_prev.row(i);
            for (o, &d) in drow.iter().enumerate() {
                gb[o] += d;
                for (slot, &a) in gw.row_mut(o).iter_mut().zip(arow) {
                    *slot += d * a;
                }
            }
        }
        if l > 0 {
            let w = &model.layers[l].weights;
            let mut prev_delta = Matrix::zeros(b, a_prev.cols);
            for i in 0..b {
                let drow = delta.row(i);
                let arow = a_prev.row(i);
                let prow = prev_delta.row_mut(i);
                for (o, &d) in drow.iter().enumerate() {
                    for (slot, &wv) in prow.iter_mut().zip(w.row(o)) {
                        *slot += d * wv;
                    }
                }
                // ReLU derivative: activations that clamped to zero pass no
                // gradient.
                for (slot, &a) in prow.iter_mut().zip(arow) {
                    if a <= 0.0 {
                        *slot = 0.0;
                    }
                }
            }
            delta = prev_delta;
        }
    }
    loss
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

fn adam_update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: f64,
    corr1: f64,
    corr2: f64,
) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / corr1;
        let v_hat = *v / corr2;
        *p -= step * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

fn he_style_init(config: &MlpConfig, n_inputs: usize, n_outputs: usize) -> MlpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dims = vec![n_inputs];
    dims.extend_from_slice(&config.hidden_layers);
    dims.push(n_outputs);
    let n_layers = dims.len() - 1;
    let layers = (0..n_layers)
        .map(|l| {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            // He scaling feeds ReLU layers; the linear output layer gets the
            // fan-balanced variant.
            let std = if l == n_layers - 1 {
                (2.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (2.0 / fan_in as f64).sqrt()
            };
            let mut weights = Matrix::zeros(fan_out, fan_in);
            for w in &mut weights.data {
                let g: f64 = rng.sample(StandardNormal);
                *w = std * g;
            }
            LayerParams {
                weights,
                biases: vec![0.0; fan_out],
            }
        })
        .collect();
    MlpModel { layers }
}

fn gather(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), m.cols);
    for (slot, &i) in idx.iter().enumerate() {
        out.row_mut(slot).copy_from_slice(m.row(i));
    }
    out
}

/// Trains a network and returns the validation-checkpointed model with its
/// loss curves.
///
/// Errors: [`Error::ShapeMismatch`] on inconsistent dimensions,
/// [`Error::EmptyInput`] on empty data, [`Error::Divergence`] when a loss
/// stops being finite.
pub fn train(
    train_x: &Matrix,
    train_y: &Matrix,
    val_x: &Matrix,
    val_y: &Matrix,
    config: &MlpConfig,
) -> Result<(MlpModel, TrainReport)> {
    config.validate()?;
    if train_x.rows == 0 || val_x.rows == 0 {
        return Err(Error::EmptyInput("network training data"));
    }
    if train_y.rows != train_x.rows {
        return Err(Error::ShapeMismatch {
            context: "training targets",
            expected: train_x.rows,
            got: train_y.rows,
        });
    }
    if val_x.cols != train_x.cols {
        return Err(Error::ShapeMismatch {
            context: "validation feature width",
            expected: train_x.cols,
            got: val_x.cols,
        });
    }
    if val_y.rows != val_x.rows || val_y.cols != train_y.cols {
        return Err(Error::ShapeMismatch {
            context: "validation targets",
            expected: val_x.rows * train_y.cols,
            got: val_y.rows * val_y.cols,
        });
    }

    let mut model = he_style_init(config, train_x.cols, train_y.cols);
    let mut adam = AdamState {
        m: Gradients::zeros_like(&model),
        v: Gradients::zeros_like(&model),
        t: 0,
    };
    let mut grads = Gradients::zeros_like(&model);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut indices: Vec<usize> = (0..train_x.rows).collect();

    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        validation_loss: Vec::with_capacity(config.epochs),
        best_epoch: 0,
        best_validation_loss: f64::INFINITY,
    };
    let mut checkpoint = model.clone();

    let k = train_y.cols;
    for epoch in 0..config.epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut squared_error = 0.0;
        for chunk in indices.chunks(config.batch_size) {
            let bx = gather(train_x, chunk);
            let by = gather(train_y, chunk);
            let loss = batch_loss_and_grads(&model, &bx, &by, &mut grads);
            squared_error += loss * (chunk.len() * k) as f64;
            adam.t += 1;
            let corr1 = 1.0 - BETA1.powi(adam.t as i32);
            let corr2 = 1.0 - BETA2.powi(adam.t as i32);
            for (l, layer) in model.layers.iter_mut().enumerate() {
                adam_update_slice(
                    &mut layer.weights.data,
                    &grads.weights[l].data,
                    &mut adam.m.weights[l].data,
                    &mut adam.v.weights[l].data,
                    config.learning_rate,
                    corr1,
                    corr2,
                );
                adam_update_slice(
                    &mut layer.biases,
                    &grads.biases[l],
                    &mut adam.m.biases[l],
                    &mut adam.v.biases[l],
                    config.learning_rate,
                    corr1,
                    corr2,
                );
            }
        }
        let train_loss = squared_error / (train_x.rows * k) as f64;
        let val_loss = model.mse(val_x, val_y);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        report.train_loss.push(train_loss);
        report.validation_loss.push(val_loss);
        if val_loss < report.best_validation_loss {
            report.best_validation_loss = val_loss;
            report.best_epoch = epoch;
            checkpoint = model.clone();
        }
    }
    Ok((checkpoint, report))
}
