//! Adam optimization, the epoch/validation loop, and batched evaluation.
//!
//! The loop is deterministic end to end: epoch shuffles and dropout
//! masks derive from `(seed, epoch)` substreams, gradient reduction uses
//! fixed-size chunks, so identical `(data, config, seed)` always yield
//! identical parameters and records (timing fields aside).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::nn::model::{backward_with, forward_inference, forward_training, GradientSet, Model};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Mat;
use crate::preprocess::{to_input_tensor, transform, ScalerParams};
use crate::rng::SplitMix64;

/// Optimizer and loop hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Stop after this many epochs without validation-loss improvement
    /// and restore the best parameters. Disabled when `None`.
    pub early_stop_patience: Option<usize>,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
    /// Unordered gradient reduction: slightly faster, but float addition
    /// order may differ between runs. Off by default (deterministic).
    #[serde(default)]
    pub fast: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 128,
            epochs: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            early_stop_patience: None,
            seed: 0,
            shuffle_each_epoch: true,
            fast: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Adam first/second moment estimates, one buffer per parameter tensor
/// in the model's canonical order, plus the shared step counter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new_for(model: &Model<T>) -> Self {
        let shapes: Vec<usize> = model.params.tensors().iter().map(|t| t.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            t: 0,
        }
    }
}

/// One Adam update with bias correction:
/// `m <- b1*m + (1-b1)*g`, `v <- b2*v + (1-b2)*g^2`,
/// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step<T: Scalar>(
    model: &mut Model<T>,
    grads: &GradientSet<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<()> {
    state.t += 1;
    let bc1 = T::from_f64(1.0 - config.adam_beta1.powi(state.t as i32));
    let bc2 = T::from_f64(1.0 - config.adam_beta2.powi(state.t as i32));
    let b1 = T::from_f64(config.adam_beta1);
    let b2 = T::from_f64(config.adam_beta2);
    let one_m_b1 = T::one() - b1;
    let one_m_b2 = T::one() - b2;
    let lr = T::from_f64(config.learning_rate);
    let eps = T::from_f64(config.adam_eps);

    let mut params = model.params.tensors_mut();
    let grads = grads.tensors();
    if params.len() != grads.len() {
        return Err(Error::Shape("gradient set does not match model".into()));
    }
    for ((theta, g), (m, v)) in params
        .iter_mut()
        .zip(&grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if theta.len() != g.len() {
            return Err(Error::Shape("gradient tensor shape mismatch".into()));
        }
        for i in 0..theta.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + one_m_b1 * gi;
            v[i] = b2 * v[i] + one_m_b2 * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Unit basis vector for a class label.
pub fn one_hot<T: Scalar>(label: usize, num_classes: usize) -> Result<Vec<T>> {
    if label >= num_classes {
        return Err(Error::Data(format!(
            "label {label} out of range for {num_classes} classes"
        )));
    }
    let mut v = vec![T::zero(); num_classes];
    v[label] = T::one();
    Ok(v)
}

/// Mean categorical cross-entropy:
/// `-(1/N) * sum_n sum_c y[n][c] * ln(max(p[n][c], 1e-12))`.
pub fn cross_entropy<T: Scalar>(probs: &Mat<T>, onehot: &Mat<T>) -> Result<f64> {
    if probs.rows() != onehot.rows() || probs.cols() != onehot.cols() {
        return Err(Error::Shape(format!(
            "cross_entropy: probs {}x{} vs targets {}x{}",
            probs.rows(),
            probs.cols(),
            onehot.rows(),
            onehot.cols()
        )));
    }
    let mut loss = 0.0f64;
    for i in 0..probs.rows() {
        for (p, y) in probs.row(i).iter().zip(onehot.row(i)) {
            let y = y.as_f64();
            if y != 0.0 {
                let p = p.as_f64();
                loss -= y * if p.is_nan() { f64::NAN } else { p.max(1e-12).ln() };
            }
        }
    }
    Ok(loss / probs.rows() as f64)
}

/// A dataset standardized and shaped for the model.
#[derive(Clone, Debug)]
pub struct PreparedSet<T> {
    pub inputs: Vec<Mat<T>>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> PreparedSet<T> {
    /// Standardize samples with an already-fitted scaler and shape them
    /// into input tensors; never re-fits.
    pub fn from_samples(samples: &[Sample], scaler: &ScalerParams) -> Result<Self> {
        let mut inputs = Vec::with_capacity(samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        for s in samples {
            inputs.push(to_input_tensor(&transform(scaler, &s.features)?));
            labels.push(s.label);
        }
        Ok(PreparedSet { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Per-epoch training record, the row format behind the history CSV and
/// JSON-lines log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    pub seconds: f64,
    pub ms_per_step: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str =
        "epoch,train_loss,train_acc,val_loss,val_acc,seconds,ms_per_step";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch,
            self.train_loss,
            self.train_acc,
            self.val_loss.map_or("NaN".to_string(), |v| v.to_string()),
            self.val_acc.map_or("NaN".to_string(), |v| v.to_string()),
            self.seconds,
            self.ms_per_step,
        )
    }

    /// Equality on the learning trajectory, ignoring wall-clock fields.
    pub fn same_trajectory(&self, other: &EpochRecord) -> bool {
        self.epoch == other.epoch
            && self.train_loss == other.train_loss
            && self.train_acc == other.train_acc
            && self.val_loss == other.val_loss
            && self.val_acc == other.val_acc
    }
}

fn argmax_row<T: Scalar>(row: &[T]) -> usize {
    // ties break to the lowest class index
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Train `model` in place; returns one record per completed epoch.
///
/// Each epoch shuffles the training order (substream `(seed, 2*epoch)`),
/// then runs minibatch forward/backward/Adam steps with dropout masks
/// drawn from substream `(seed, 2*epoch + 1)` keyed by the sample's
/// position in the epoch. The final partial minibatch is trained on.
/// After the pass, the validation set is scored in inference mode.
///
/// With `early_stop_patience` set, training stops once validation loss
/// has not improved for that many consecutive epochs, and the parameters
/// from the best epoch are restored.
pub fn fit<T: Scalar>(
    model: &mut Model<T>,
    train: &PreparedSet<T>,
    validation: &PreparedSet<T>,
    config: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if config.early_stop_patience.is_some() && validation.is_empty() {
        return Err(Error::Config(
            "early stopping requires a non-empty validation set".into(),
        ));
    }
    for input in &train.inputs {
        if input.rows() != model.config.seq_len || input.cols() != model.config.in_channels {
            return Err(Error::Shape(format!(
                "training input {}x{} does not match model {}x{}",
                input.rows(),
                input.cols(),
                model.config.seq_len,
                model.config.in_channels
            )));
        }
    }

    let kc = model.config.num_classes;
    let n = train.len();
    let mut state = AdamState::new_for(model);
    let mut records = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();

    let mut best: Option<(f64, crate::nn::model::ParamSet<T>)> = None;
    let mut epochs_since_improvement = 0usize;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        if config.shuffle_each_epoch {
            order = (0..n).collect();
            SplitMix64::with_stream(config.seed, 2 * epoch as u64).shuffle(&mut order);
        }
        let dropout_seed =
            SplitMix64::with_stream(config.seed, 2 * epoch as u64 + 1).next_u64();

        let mut epoch_loss = 0.0f64;
        let mut correct = 0usize;
        let mut steps = 0usize;
        let mut offset = 0usize;
        while offset < n {
            let end = (offset + config.batch_size).min(n);
            let batch_ids = &order[offset..end];
            let batch: Vec<Mat<T>> = batch_ids.iter().map(|&i| train.inputs[i].clone()).collect();
            let mut onehot = Mat::zeros(batch.len(), kc);
            for (r, &i) in batch_ids.iter().enumerate() {
                let row = one_hot::<T>(train.labels[i], kc)?;
                onehot.row_mut(r).copy_from_slice(&row);
            }

            let (probs, caches) = forward_training(model, &batch, dropout_seed, offset as u64);
            let (grads, loss) = backward_with(model, &caches, &onehot, !config.fast)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("NaN loss at epoch {epoch}")));
            }
            adam_step(model, &grads, &mut state, config)?;

            for (r, &i) in batch_ids.iter().enumerate() {
                if argmax_row(probs.row(r)) == train.labels[i] {
                    correct += 1;
                }
            }
            epoch_loss += loss * batch.len() as f64;
            steps += 1;
            offset = end;
        }

        let (val_loss, val_acc) = if validation.is_empty() {
            (None, None)
        } else {
            let eval = evaluate(model, validation, config.batch_size)?;
            (Some(eval.loss), Some(eval.accuracy()))
        };

        let seconds = started.elapsed().as_secs_f64();
        records.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / n as f64,
            train_acc: correct as f64 / n as f64,
            val_loss,
            val_acc,
            seconds,
            ms_per_step: seconds * 1000.0 / steps as f64,
        });

        if let Some(patience) = config.early_stop_patience {
            let current = val_loss.expect("validated above");
            let improved = best.as_ref().is_none_or(|(b, _)| current < *b);
            if improved {
                best = Some((current, model.params.clone()));
                epochs_since_improvement = 0;
            } else {
                epochs_since_improvement += 1;
                if epochs_since_improvement >= patience {
                    break;
                }
            }
        }
    }

    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(records)
}

/// Inference results over a dataset.
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub loss: f64,
    pub predictions: Vec<usize>,
    pub probabilities: Mat<T>,
    pub labels: Vec<usize>,
    pub seconds: f64,
    pub ms_per_step: f64,
    pub steps: usize,
}

impl<T: Scalar> Evaluation<T> {
    pub fn accuracy(&self) -> f64 {
        let correct = self
            .predictions
            .iter()
            .zip(&self.labels)
            .filter(|(p, l)| p == l)
            .count();
        correct as f64 / self.predictions.len().max(1) as f64
    }
}

/// Score a dataset in inference mode: argmax predictions (ties to the
/// lowest class index), mean cross-entropy, the probability matrix, and
/// wall-clock timing per batch step.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    dataset: &PreparedSet<T>,
    batch_size: usize,
) -> Result<Evaluation<T>> {
    if dataset.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let kc = model.config.num_classes;
    let n = dataset.len();
    let started = Instant::now();

    let mut probabilities = Mat::zeros(n, kc);
    let mut steps = 0usize;
    let mut offset = 0usize;
    while offset < n {
        let end = (offset + batch_size).min(n);
        let probs = forward_inference(model, &dataset.inputs[offset..end]);
        for r in 0..probs.rows() {
            probabilities.row_mut(offset + r).copy_from_slice(probs.row(r));
        }
        steps += 1;
        offset = end;
    }
    let seconds = started.elapsed().as_secs_f64();

    let mut loss = 0.0f64;
    let mut predictions = Vec::with_capacity(n);
    for i in 0..n {
        let row = probabilities.row(i);
        predictions.push(argmax_row(row));
        let label = dataset.labels[i];
        if label >= kc {
            return Err(Error::Data(format!(
                "label {label} out of range for {kc} classes"
            )));
        }
        let p = row[label].as_f64();
        loss -= if p.is_nan() { f64::NAN } else { p.max(1e-12).ln() };
    }
    loss /= n as f64;

    Ok(Evaluation {
        loss,
        predictions,
        probabilities,
        labels: dataset.labels.clone(),
        seconds,
        ms_per_step: seconds * 1000.0 / steps as f64,
        steps,
    })
}
