//! Siamese encoder and decoder training.
//!
//! The encoder maps a flattened series to a latent vector such that the
//! Euclidean distance between two latents approximates the DTW value of the
//! underlying pair: one shared-weight network is applied to both pair
//! members and trained on the squared difference between the latent distance
//! and the raw DTW target. The decoder is trained afterwards, against the
//! frozen encoder, to reconstruct both pair members from their latents.
//!
//! Training pairs are synthetic: i.i.d. Gaussian series using moments pooled
//! from the dataset, labeled with exact DTW values. [`train_naive`] is the
//! ablation that trains encoder and decoder jointly on reconstruction only,
//! so its latent geometry never sees DTW.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TimeSeries};
use crate::dtw::dtw_distance;
use crate::error::{Error, Result};
use crate::mlp::{Activation, AdamState, GradientSet, Mlp, adam_step};

/// Moments of the i.i.d. Gaussian used to synthesize training pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub mean: f64,
    pub std_dev: f64,
}

/// Pools every value in the dataset into one mean and standard deviation.
///
/// A dataset with zero spread would make every synthetic pair identical, so
/// the spread falls back to 1 (with a warning) in that case; the returned
/// params are otherwise exactly the pooled moments.
pub fn estimate_generator_params(dataset: &Dataset) -> GeneratorParams {
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for sample in dataset.iter() {
        for &v in sample.series.values().iter() {
            count += 1;
            let delta = v - mean;
            mean += delta / count as f64;
            m2 += delta * (v - mean);
        }
    }
    let mut std_dev = (m2 / count as f64).sqrt();
    if std_dev == 0.0 {
        log::warn!("dataset has zero value spread; using std dev 1 for pair generation");
        std_dev = 1.0;
    }
    GeneratorParams { mean, std_dev }
}

/// Two synthetic series and their exact DTW value.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub first: TimeSeries,
    pub second: TimeSeries,
    /// Raw DTW value of the pair (squared units, not normalized).
    pub target: f64,
}

/// Draws `count` random pairs of shape `(len, vars)` and labels each with its
/// DTW value. Elements are i.i.d. Normal with exactly the given moments;
/// labeling runs in parallel but the output order is the draw order.
pub fn generate_pairs(
    shape: (usize, usize),
    count: usize,
    params: &GeneratorParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PairSample>> {
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    let (len, vars) = shape;
    if len == 0 || vars == 0 {
        return Err(Error::EmptySeries);
    }
    if !(params.mean.is_finite() && params.std_dev.is_finite() && params.std_dev >= 0.0) {
        return Err(Error::InvalidConfig {
            reason: format!(
                "generator params need a finite mean and non-negative spread, got mean {} std {}",
                params.mean, params.std_dev
            ),
        });
    }
    let normal = Normal::new(params.mean, params.std_dev).map_err(|e| Error::InvalidConfig {
        reason: format!("bad generator params ({e})"),
    })?;
    let dim = len * vars;
    let mut raw = Vec::with_capacity(count);
    for _ in 0..count {
        let a: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let b: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        raw.push((
            TimeSeries::from_flat(a, len, vars)?,
            TimeSeries::from_flat(b, len, vars)?,
        ));
    }
    raw.into_par_iter()
        .map(|(first, second)| {
            let target = dtw_distance(&first, &second)?;
            Ok(PairSample {
                first,
                second,
                target,
            })
        })
        .collect()
}

/// Hyperparameters for encoder and decoder training.
#[derive(Debug, Clone, PartialEq)]
pub struct AeConfig {
    /// Synthetic training pairs to draw.
    pub pair_count: usize,
    /// Latent width as a multiple of the flattened input size.
    pub latent_mult: usize,
    /// Hidden width as a multiple of the flattened input size.
    pub hidden_mult: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Relative epoch-mean improvement below this counts as stalled.
    pub tolerance: f64,
    /// Consecutive stalled epochs before training stops.
    pub patience: usize,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            pair_count: 2000,
            latent_mult: 10,
            hidden_mult: 4,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 500,
            tolerance: 1e-3,
            patience: 5,
        }
    }
}

impl AeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidConfig { reason });
        if self.pair_count == 0 {
            return bad("pair_count must be at least 1".into());
        }
        if self.latent_mult == 0 || self.hidden_mult == 0 {
            return bad("latent and hidden multipliers must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be at least 1".into());
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }

    /// `(input, hidden, latent)` layer widths for series of `shape`.
    pub fn dims(&self, shape: (usize, usize)) -> (usize, usize, usize) {
        let input = shape.0 * shape.1;
        (input, self.hidden_mult * input, self.latent_mult * input)
    }
}

/// Loss curve of one training run: full-set loss before the first update and
/// after the last, plus the per-epoch mean losses used for the stop rule.
#[derive(Debug, Clone)]
pub struct TrainerStats {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

impl TrainerStats {
    pub fn epochs(&self) -> usize {
        self.epoch_losses.len()
    }
}

/// Summary of how a model was produced, persisted alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// "siamese" (encoder on DTW targets, then decoder) or "naive"
    /// (joint reconstruction-only training).
    pub method: String,
    pub pair_count: usize,
    pub encoder_epochs: usize,
    pub decoder_epochs: usize,
    pub initial_encoder_loss: f64,
    pub final_encoder_loss: f64,
    pub initial_decoder_loss: f64,
    pub final_decoder_loss: f64,
}

/// A trained encoder/decoder pair tied to one input shape.
#[derive(Debug, Clone)]
pub struct TrainedAutoencoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
    /// `(len, vars)` the networks were built for.
    pub shape: (usize, usize),
    pub report: TrainingReport,
}

impl TrainedAutoencoder {
    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }
}

/// Squared difference between the latent Euclidean distance and the DTW
/// target, for one pair.
pub fn encoder_loss(latent1: ArrayView1<'_, f64>, latent2: ArrayView1<'_, f64>, target: f64) -> Result<f64> {
    if latent1.len() != latent2.len() {
        return Err(Error::DimensionMismatch {
            what: "latent pair",
            expected: latent1.len(),
            found: latent2.len(),
        });
    }
    let mut sq = 0.0;
    for (a, b) in latent1.iter().zip(latent2.iter()) {
        sq += (a - b) * (a - b);
    }
    let residual = sq.sqrt() - target;
    Ok(residual * residual)
}

/// Encodes both members of a pair with the same network.
pub fn encode_pair(
    model: &TrainedAutoencoder,
    first: &TimeSeries,
    second: &TimeSeries,
) -> Result<(Array1<f64>, Array1<f64>)> {
    Ok((encode(model, first)?, encode(model, second)?))
}

/// Encodes one series; its shape must match the model's training shape.
pub fn encode(model: &TrainedAutoencoder, series: &TimeSeries) -> Result<Array1<f64>> {
    check_series_shape(model.shape, series, "encode")?;
    let flat = Array1::from_vec(series.flatten());
    model.encoder.forward(flat.view())
}

/// Decodes a latent vector back into a series of the model's shape.
pub fn decode(model: &TrainedAutoencoder, latent: ArrayView1<'_, f64>) -> Result<TimeSeries> {
    if latent.len() != model.latent_dim() {
        return Err(Error::DimensionMismatch {
            what: "latent vector",
            expected: model.latent_dim(),
            found: latent.len(),
        });
    }
    let flat = model.decoder.forward(latent)?;
    TimeSeries::from_flat(flat.to_vec(), model.shape.0, model.shape.1)
}

fn check_series_shape(expected: (usize, usize), series: &TimeSeries, op: &'static str) -> Result<()> {
    if (series.len(), series.vars()) != expected {
        return Err(Error::IncompatibleSeries {
            op,
            left_len: series.len(),
            left_vars: series.vars(),
            right_len: expected.0,
            right_vars: expected.1,
        });
    }
    Ok(())
}

/// Mean encoder loss over a pair set.
pub fn siamese_loss(encoder: &Mlp, pairs: &[PairSample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (a, b, targets) = pair_matrices(pairs);
    let (ha, _) = encoder.forward_batch(&a)?;
    let (hb, _) = encoder.forward_batch(&b)?;
    let dists = row_norms(&(&ha - &hb));
    let total: f64 = dists
        .iter()
        .zip(&targets)
        .map(|(d, y)| (d - y) * (d - y))
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Mean reconstruction loss over a pair set: half the squared error of each
/// branch, averaged over pairs.
pub fn reconstruction_loss(encoder: &Mlp, decoder: &Mlp, pairs: &[PairSample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (a, b, _) = pair_matrices(pairs);
    let (ha, _) = encoder.forward_batch(&a)?;
    let (hb, _) = encoder.forward_batch(&b)?;
    let (ra, _) = decoder.forward_batch(&ha)?;
    let (rb, _) = decoder.forward_batch(&hb)?;
    let sq_a = (&a - &ra).mapv(|v| v * v).sum();
    let sq_b = (&b - &rb).mapv(|v| v * v).sum();
    Ok((sq_a + sq_b) / (2.0 * pairs.len() as f64))
}

/// One siamese evaluation over the rows of `xa`/`xb`: the sum of per-pair
/// losses and the gradient of their mean with respect to the shared encoder
/// parameters (both branches accumulated).
fn siamese_step(
    encoder: &Mlp,
    xa: &Array2<f64>,
    xb: &Array2<f64>,
    targets: &[f64],
) -> Result<(f64, GradientSet)> {
    let rows = xa.nrows() as f64;
    let (ha, tape_a) = encoder.forward_batch(xa)?;
    let (hb, tape_b) = encoder.forward_batch(xb)?;
    let diff = &ha - &hb;
    let dists = row_norms(&diff);
    let mut loss_sum = 0.0;
    let mut gout_a = diff;
    for (i, mut row) in gout_a.rows_mut().into_iter().enumerate() {
        let residual = dists[i] - targets[i];
        loss_sum += residual * residual;
        // d/dh1 of (||h1-h2|| - y)^2 is 2(d-y)(h1-h2)/d; the guard keeps the
        // d=0 subgradient at zero (the diff row is zero there anyway).
        row *= 2.0 * residual / (rows * dists[i].max(1e-12));
    }
    let gout_b = gout_a.mapv(|v| -v);
    let (mut grads, _) = encoder.backward(&tape_a, &gout_a);
    let (grads_b, _) = encoder.backward(&tape_b, &gout_b);
    grads.add_assign(&grads_b);
    Ok((loss_sum, grads))
}

/// One reconstruction evaluation of a single branch: half the summed squared
/// error, the gradient of its per-row mean with respect to the decoder
/// parameters, and the gradient with respect to the latent inputs (needed by
/// joint training).
fn reconstruction_step(
    decoder: &Mlp,
    latents: &Array2<f64>,
    inputs: &Array2<f64>,
) -> Result<(f64, GradientSet, Array2<f64>)> {
    let rows = latents.nrows() as f64;
    let (rec, tape) = decoder.forward_batch(latents)?;
    let err = &rec - inputs;
    let loss_sum = 0.5 * err.mapv(|v| v * v).sum();
    // d/drec of ||x-rec||^2 / 2 is (rec - x).
    let gout = err.mapv(|v| v / rows);
    let (grads, input_grad) = decoder.backward(&tape, &gout);
    Ok((loss_sum, grads, input_grad))
}

/// Mean siamese loss over a pair set and its analytic gradient with respect
/// to the encoder parameters. This is exactly what every training batch
/// steps on, evaluated on the whole set.
pub fn encoder_gradient(encoder: &Mlp, pairs: &[PairSample]) -> Result<(f64, GradientSet)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (a, b, targets) = pair_matrices(pairs);
    let (loss_sum, grads) = siamese_step(encoder, &a, &b, &targets)?;
    Ok((loss_sum / pairs.len() as f64, grads))
}

/// Mean reconstruction loss over a pair set and its analytic gradient with
/// respect to the decoder parameters, with the encoder held frozen.
pub fn decoder_gradient(
    encoder: &Mlp,
    decoder: &Mlp,
    pairs: &[PairSample],
) -> Result<(f64, GradientSet)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (a, b, _) = pair_matrices(pairs);
    let (ha, _) = encoder.forward_batch(&a)?;
    let (hb, _) = encoder.forward_batch(&b)?;
    let (sum_a, mut grads, _) = reconstruction_step(decoder, &ha, &a)?;
    let (sum_b, grads_b, _) = reconstruction_step(decoder, &hb, &b)?;
    grads.add_assign(&grads_b);
    Ok(((sum_a + sum_b) / pairs.len() as f64, grads))
}

/// Trains the shared-weight encoder on DTW targets. Returns the network and
/// its loss curve; the stop rule and divergence handling follow the config.
pub fn train_encoder(
    pairs: &[PairSample],
    shape: (usize, usize),
    config: &AeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Mlp, TrainerStats)> {
    config.validate()?;
    validate_pairs(pairs, shape)?;
    let (input, hidden, latent) = config.dims(shape);
    let mut encoder = Mlp::glorot(
        &[input, hidden, latent],
        &[Activation::Relu, Activation::Linear],
        rng,
    )?;
    let (a, b, targets) = pair_matrices(pairs);
    let initial_loss = siamese_loss(&encoder, pairs)?;

    let mut adam = AdamState::new(&encoder, config.learning_rate);
    let mut epoch_losses = Vec::new();
    let mut stop = StopRule::new(config);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xa = a.select(Axis(0), batch);
            let xb = b.select(Axis(0), batch);
            let batch_targets: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let (batch_sum, grads) = siamese_step(&encoder, &xa, &xb, &batch_targets)?;
            loss_sum += batch_sum;
            adam_step(&mut encoder, &grads, &mut adam)?;
        }
        let epoch_loss = loss_sum / pairs.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_finite: epoch_losses.last().copied().unwrap_or(initial_loss),
            });
        }
        epoch_losses.push(epoch_loss);
        if stop.stalled(epoch_loss) {
            break;
        }
    }
    let final_loss = siamese_loss(&encoder, pairs)?;
    Ok((
        encoder,
        TrainerStats {
            initial_loss,
            final_loss,
            epoch_losses,
        },
    ))
}

/// Trains a decoder to invert a frozen encoder on the same pair set. The
/// encoder is immutable here; its latents are computed once up front.
pub fn train_decoder(
    encoder: &Mlp,
    pairs: &[PairSample],
    shape: (usize, usize),
    config: &AeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Mlp, TrainerStats)> {
    config.validate()?;
    validate_pairs(pairs, shape)?;
    let (input, hidden, _) = config.dims(shape);
    let latent = encoder.output_dim();
    let mut decoder = Mlp::glorot(
        &[latent, hidden, input],
        &[Activation::Relu, Activation::Linear],
        rng,
    )?;
    let (a, b, _) = pair_matrices(pairs);
    let (ha, _) = encoder.forward_batch(&a)?;
    let (hb, _) = encoder.forward_batch(&b)?;
    let initial_loss = reconstruction_loss(encoder, &decoder, pairs)?;

    let mut adam = AdamState::new(&decoder, config.learning_rate);
    let mut epoch_losses = Vec::new();
    let mut stop = StopRule::new(config);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut step_grads: Option<GradientSet> = None;
            for (latents, inputs) in [(&ha, &a), (&hb, &b)] {
                let hx = latents.select(Axis(0), batch);
                let x = inputs.select(Axis(0), batch);
                let (branch_sum, grads, _) = reconstruction_step(&decoder, &hx, &x)?;
                loss_sum += branch_sum;
                match &mut step_grads {
                    Some(acc) => acc.add_assign(&grads),
                    None => step_grads = Some(grads),
                }
            }
            adam_step(&mut decoder, &step_grads.expect("two branches ran"), &mut adam)?;
        }
        let epoch_loss = loss_sum / pairs.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_finite: epoch_losses.last().copied().unwrap_or(initial_loss),
            });
        }
        epoch_losses.push(epoch_loss);
        if stop.stalled(epoch_loss) {
            break;
        }
    }
    let final_loss = reconstruction_loss(encoder, &decoder, pairs)?;
    Ok((
        decoder,
        TrainerStats {
            initial_loss,
            final_loss,
            epoch_losses,
        },
    ))
}

/// Full two-stage training: siamese encoder on DTW targets, then decoder
/// against the frozen result.
pub fn train_siamese(
    pairs: &[PairSample],
    shape: (usize, usize),
    config: &AeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainedAutoencoder> {
    let (encoder, enc_stats) = train_encoder(pairs, shape, config, rng)?;
    let (decoder, dec_stats) = train_decoder(&encoder, pairs, shape, config, rng)?;
    Ok(TrainedAutoencoder {
        report: TrainingReport {
            method: "siamese".into(),
            pair_count: pairs.len(),
            encoder_epochs: enc_stats.epochs(),
            decoder_epochs: dec_stats.epochs(),
            initial_encoder_loss: enc_stats.initial_loss,
            final_encoder_loss: enc_stats.final_loss,
            initial_decoder_loss: dec_stats.initial_loss,
            final_decoder_loss: dec_stats.final_loss,
        },
        encoder,
        decoder,
        shape,
    })
}

/// Ablation: encoder and decoder trained jointly on reconstruction alone.
/// The DTW targets of the pairs are ignored; the latent space has no
/// distance structure beyond what reconstruction induces.
pub fn train_naive(
    pairs: &[PairSample],
    shape: (usize, usize),
    config: &AeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainedAutoencoder> {
    config.validate()?;
    validate_pairs(pairs, shape)?;
    let (input, hidden, latent) = config.dims(shape);
    let mut encoder = Mlp::glorot(
        &[input, hidden, latent],
        &[Activation::Relu, Activation::Linear],
        rng,
    )?;
    let mut decoder = Mlp::glorot(
        &[latent, hidden, input],
        &[Activation::Relu, Activation::Linear],
        rng,
    )?;
    let (a, b, _) = pair_matrices(pairs);
    let initial_encoder_loss = siamese_loss(&encoder, pairs)?;
    let initial_decoder_loss = reconstruction_loss(&encoder, &decoder, pairs)?;

    let mut adam_enc = AdamState::new(&encoder, config.learning_rate);
    let mut adam_dec = AdamState::new(&decoder, config.learning_rate);
    let mut epoch_losses = Vec::new();
    let mut stop = StopRule::new(config);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epochs = 0;
    for epoch in 1..=config.max_epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut enc_grads: Option<GradientSet> = None;
            let mut dec_grads: Option<GradientSet> = None;
            for inputs in [&a, &b] {
                let x = inputs.select(Axis(0), batch);
                let (h, enc_tape) = encoder.forward_batch(&x)?;
                let (branch_sum, dg, dh) = reconstruction_step(&decoder, &h, &x)?;
                loss_sum += branch_sum;
                let (eg, _) = encoder.backward(&enc_tape, &dh);
                match &mut dec_grads {
                    Some(acc) => acc.add_assign(&dg),
                    None => dec_grads = Some(dg),
                }
                match &mut enc_grads {
                    Some(acc) => acc.add_assign(&eg),
                    None => enc_grads = Some(eg),
                }
            }
            adam_step(&mut encoder, &enc_grads.expect("two branches ran"), &mut adam_enc)?;
            adam_step(&mut decoder, &dec_grads.expect("two branches ran"), &mut adam_dec)?;
        }
        let epoch_loss = loss_sum / pairs.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                last_finite: epoch_losses.last().copied().unwrap_or(initial_decoder_loss),
            });
        }
        epoch_losses.push(epoch_loss);
        epochs = epoch;
        if stop.stalled(epoch_loss) {
            break;
        }
    }
    let final_encoder_loss = siamese_loss(&encoder, pairs)?;
    let final_decoder_loss = reconstruction_loss(&encoder, &decoder, pairs)?;
    Ok(TrainedAutoencoder {
        report: TrainingReport {
            method: "naive".into(),
            pair_count: pairs.len(),
            encoder_epochs: epochs,
            decoder_epochs: epochs,
            initial_encoder_loss,
            final_encoder_loss,
            initial_decoder_loss,
            final_decoder_loss,
        },
        encoder,
        decoder,
        shape,
    })
}

/// Consecutive-stall counter implementing the stop rule.
struct StopRule {
    tolerance: f64,
    patience: usize,
    prev: Option<f64>,
    streak: usize,
}

impl StopRule {
    fn new(config: &AeConfig) -> Self {
        Self {
            tolerance: config.tolerance,
            patience: config.patience,
            prev: None,
            streak: 0,
        }
    }

    /// Feeds one epoch-mean loss; true once `patience` consecutive epochs
    /// improved by less than `tolerance` relative to the epoch before.
    fn stalled(&mut self, loss: f64) -> bool {
        if let Some(prev) = self.prev {
            let improvement = (prev - loss) / prev.abs().max(f64::EPSILON);
            if improvement < self.tolerance {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
        }
        self.prev = Some(loss);
        self.streak >= self.patience
    }
}

fn validate_pairs(pairs: &[PairSample], shape: (usize, usize)) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    for pair in pairs {
        check_series_shape(shape, &pair.first, "pair training")?;
        check_series_shape(shape, &pair.second, "pair training")?;
        if !pair.target.is_finite() || pair.target < 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("pair target must be a finite non-negative DTW value, got {}", pair.target),
            });
        }
    }
    Ok(())
}

/// Stacks the pair members into `(n, len*vars)` matrices plus targets.
fn pair_matrices(pairs: &[PairSample]) -> (Array2<f64>, Array2<f64>, Vec<f64>) {
    let n = pairs.len();
    let dim = pairs[0].first.len() * pairs[0].first.vars();
    let mut a = Array2::zeros((n, dim));
    let mut b = Array2::zeros((n, dim));
    let mut targets = Vec::with_capacity(n);
    for (i, pair) in pairs.iter().enumerate() {
        for (j, v) in pair.first.flatten().into_iter().enumerate() {
            a[[i, j]] = v;
        }
        for (j, v) in pair.second.flatten().into_iter().enumerate() {
            b[[i, j]] = v;
        }
        targets.push(pair.target);
    }
    (a, b, targets)
}

fn row_norms(m: &Array2<f64>) -> Array1<f64> {
    m.map_axis(Axis(1), |row| row.dot(&row).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledSample;
    use crate::mlp::DenseLayer;
    use crate::rng::seed_stream;
    use ndarray::array;

    fn small_config() -> AeConfig {
        AeConfig {
            pair_count: 64,
            latent_mult: 2,
            hidden_mult: 2,
            max_epochs: 60,
            ..AeConfig::default()
        }
    }

    fn small_pairs(shape: (usize, usize), count: usize, seed: u64) -> Vec<PairSample> {
        let params = GeneratorParams {
            mean: 0.0,
            std_dev: 1.0,
        };
        let mut rng = seed_stream(seed, 0);
        generate_pairs(shape, count, &params, &mut rng).unwrap()
    }

    #[test]
    fn estimate_pools_all_values() {
        let ds = Dataset::new(vec![
            LabeledSample::new(TimeSeries::univariate(vec![0.0, 2.0]).unwrap(), "a"),
            LabeledSample::new(TimeSeries::univariate(vec![4.0, 6.0]).unwrap(), "b"),
        ])
        .unwrap();
        let p = estimate_generator_params(&ds);
        assert_eq!(p.mean, 3.0);
        assert!((p.std_dev - 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn estimate_falls_back_on_zero_spread() {
        let ds = Dataset::new(vec![LabeledSample::new(
            TimeSeries::univariate(vec![2.0, 2.0, 2.0]).unwrap(),
            "a",
        )])
        .unwrap();
        let p = estimate_generator_params(&ds);
        assert_eq!(p.mean, 2.0);
        assert_eq!(p.std_dev, 1.0);
    }

    #[test]
    fn pairs_have_requested_shape_and_exact_targets() {
        let pairs = small_pairs((6, 2), 20, 3);
        assert_eq!(pairs.len(), 20);
        for pair in &pairs {
            assert_eq!((pair.first.len(), pair.first.vars()), (6, 2));
            assert_eq!((pair.second.len(), pair.second.vars()), (6, 2));
            assert_eq!(pair.target, dtw_distance(&pair.first, &pair.second).unwrap());
            assert!(pair.target >= 0.0);
        }
    }

    #[test]
    fn degenerate_generator_gives_identical_members() {
        // Zero spread is honored verbatim: both members collapse to the mean
        // and the DTW target is exactly zero.
        let params = GeneratorParams {
            mean: 1.5,
            std_dev: 0.0,
        };
        let mut rng = seed_stream(0, 0);
        let pairs = generate_pairs((4, 1), 5, &params, &mut rng).unwrap();
        for pair in &pairs {
            assert_eq!(pair.first, pair.second);
            assert_eq!(pair.target, 0.0);
            assert!(pair.first.flatten().iter().all(|&v| v == 1.5));
        }
    }

    #[test]
    fn pair_generation_is_seed_deterministic() {
        let a = small_pairs((5, 1), 10, 9);
        let b = small_pairs((5, 1), 10, 9);
        let c = small_pairs((5, 1), 10, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn pair_generation_rejects_bad_requests() {
        let params = GeneratorParams {
            mean: 0.0,
            std_dev: 1.0,
        };
        let mut rng = seed_stream(0, 0);
        assert!(matches!(
            generate_pairs((4, 1), 0, &params, &mut rng),
            Err(Error::EmptyInput)
        ));
        let neg = GeneratorParams {
            mean: 0.0,
            std_dev: -1.0,
        };
        assert!(generate_pairs((4, 1), 1, &neg, &mut rng).is_err());
    }

    #[test]
    fn encoder_loss_hand_values() {
        let h1 = array![0.0, 0.0];
        let h2 = array![3.0, 4.0];
        // distance 5, target 1 -> (5-1)^2.
        assert_eq!(encoder_loss(h1.view(), h2.view(), 1.0).unwrap(), 16.0);
        assert_eq!(encoder_loss(h1.view(), h1.view(), 0.0).unwrap(), 0.0);
        // identical latents, positive target -> target^2.
        assert_eq!(encoder_loss(h1.view(), h1.view(), 2.0).unwrap(), 4.0);
        let h3 = array![1.0];
        assert!(encoder_loss(h1.view(), h3.view(), 0.0).is_err());
    }

    #[test]
    fn weight_sharing_maps_equal_inputs_to_equal_latents() {
        let pairs = small_pairs((4, 1), 32, 1);
        let cfg = small_config();
        let mut rng = seed_stream(2, 0);
        let model = train_siamese(&pairs, (4, 1), &cfg, &mut rng).unwrap();
        let s = TimeSeries::univariate(vec![0.4, -0.2, 1.0, 0.3]).unwrap();
        let (h1, h2) = encode_pair(&model, &s, &s).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(model.latent_dim(), 8);
    }

    #[test]
    fn encoder_training_reduces_siamese_loss() {
        let pairs = small_pairs((4, 1), 64, 5);
        let cfg = small_config();
        let mut rng = seed_stream(3, 0);
        let (_, stats) = train_encoder(&pairs, (4, 1), &cfg, &mut rng).unwrap();
        assert!(stats.final_loss < stats.initial_loss);
        assert!(stats.epochs() >= 1);
    }

    #[test]
    fn decoder_training_reduces_reconstruction_loss_and_freezes_encoder() {
        let pairs = small_pairs((4, 1), 64, 6);
        let cfg = small_config();
        let mut rng = seed_stream(4, 0);
        let (encoder, _) = train_encoder(&pairs, (4, 1), &cfg, &mut rng).unwrap();
        let snapshot = encoder.clone();
        let (_, stats) = train_decoder(&encoder, &pairs, (4, 1), &cfg, &mut rng).unwrap();
        assert_eq!(encoder, snapshot);
        assert!(stats.final_loss < stats.initial_loss);
    }

    #[test]
    fn identity_networks_give_zero_reconstruction_loss() {
        // Latent width equal to the input makes a perfect autoencoder
        // expressible; identity weights realize it exactly.
        let identity = Mlp::from_layers(vec![DenseLayer::identity(4, Activation::Linear)]).unwrap();
        let pairs = small_pairs((4, 1), 8, 7);
        let loss = reconstruction_loss(&identity, &identity, &pairs).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn siamese_loss_zero_when_latents_match_targets() {
        // An identity encoder on identical pair members gives distance 0 and
        // target 0 for every pair.
        let identity = Mlp::from_layers(vec![DenseLayer::identity(4, Activation::Linear)]).unwrap();
        let params = GeneratorParams {
            mean: 0.5,
            std_dev: 0.0,
        };
        let mut rng = seed_stream(1, 0);
        let pairs = generate_pairs((4, 1), 6, &params, &mut rng).unwrap();
        assert_eq!(siamese_loss(&identity, &pairs).unwrap(), 0.0);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let pairs = small_pairs((4, 1), 48, 8);
        let cfg = small_config();
        let a = train_siamese(&pairs, (4, 1), &cfg, &mut seed_stream(5, 0)).unwrap();
        let b = train_siamese(&pairs, (4, 1), &cfg, &mut seed_stream(5, 0)).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.decoder, b.decoder);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn naive_training_reduces_reconstruction_loss() {
        let pairs = small_pairs((4, 1), 64, 11);
        let cfg = small_config();
        let mut rng = seed_stream(6, 0);
        let model = train_naive(&pairs, (4, 1), &cfg, &mut rng).unwrap();
        assert_eq!(model.report.method, "naive");
        assert!(model.report.final_decoder_loss < model.report.initial_decoder_loss);
        assert_eq!(model.report.encoder_epochs, model.report.decoder_epochs);
    }

    #[test]
    fn round_trip_decode_matches_shape() {
        let pairs = small_pairs((5, 2), 32, 12);
        let cfg = small_config();
        let mut rng = seed_stream(7, 0);
        let model = train_siamese(&pairs, (5, 2), &cfg, &mut rng).unwrap();
        let h = encode(&model, &pairs[0].first).unwrap();
        assert_eq!(h.len(), 20);
        let rec = decode(&model, h.view()).unwrap();
        assert_eq!((rec.len(), rec.vars()), (5, 2));
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let pairs = small_pairs((4, 1), 16, 13);
        let cfg = small_config();
        let mut rng = seed_stream(8, 0);
        let model = train_siamese(&pairs, (4, 1), &cfg, &mut rng).unwrap();
        let wrong = TimeSeries::univariate(vec![0.0; 5]).unwrap();
        assert!(matches!(
            encode(&model, &wrong),
            Err(Error::IncompatibleSeries { .. })
        ));
        let short = array![0.0, 1.0];
        assert!(matches!(
            decode(&model, short.view()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(train_encoder(&pairs, (5, 1), &cfg, &mut rng).is_err());
        assert!(train_encoder(&[], (4, 1), &cfg, &mut rng).is_err());
    }

    #[test]
    fn config_validation_rejects_degenerate_values() {
        let mut cfg = AeConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.pair_count = 0;
        assert!(cfg.validate().is_err());
        cfg = AeConfig {
            learning_rate: 0.0,
            ..AeConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg = AeConfig {
            batch_size: 0,
            ..AeConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg = AeConfig {
            tolerance: -1.0,
            ..AeConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stop_rule_requires_consecutive_stalls() {
        let cfg = AeConfig {
            tolerance: 1e-3,
            patience: 3,
            ..AeConfig::default()
        };
        let mut stop = StopRule::new(&cfg);
        // Strong improvements keep it running.
        assert!(!stop.stalled(100.0));
        assert!(!stop.stalled(50.0));
        // Two stalls, then a real improvement resets the streak.
        assert!(!stop.stalled(49.999));
        assert!(!stop.stalled(49.999));
        assert!(!stop.stalled(40.0));
        // Three consecutive stalls trip it.
        assert!(!stop.stalled(39.999));
        assert!(!stop.stalled(39.998));
        assert!(stop.stalled(39.998));
    }

    #[test]
    fn default_architecture_matches_multipliers() {
        // Input 80 with the default multipliers: hidden 320, latent 800.
        let cfg = AeConfig::default();
        let (input, hidden, latent) = cfg.dims((80, 1));
        assert_eq!((input, hidden, latent), (80, 320, 800));
        let (input, hidden, latent) = cfg.dims((24, 2));
        assert_eq!((input, hidden, latent), (48, 192, 480));
    }
}
